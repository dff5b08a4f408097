//! Egocentric spatial elaboration from object detections.
//!
//! Detections arrive as user-relative bearings. A [`SpatialContext`] is
//! frozen when a step starts and every rewrite below is a pure function of
//! `(text, context)`.

use std::ops::Range;
use std::sync::{Arc, LazyLock};

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::find_whole_word;
use crate::types::now_utc;

/// Half-width of the "in front of you" band, in degrees.
pub const FRONT_BAND_DEG: f64 = 20.0;
/// Detections below this confidence are ignored.
pub const MIN_CONFIDENCE: f64 = 0.5;
/// Relative tolerance for matching a measure against an object's size.
pub const SIZE_TOLERANCE: f64 = 0.25;

const REFERENCE_PREFIX: &str = ", or the length of ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub label: String,
    /// Bearing in degrees, 0 straight ahead, positive to the right.
    pub azimuth_deg: f64,
    pub distance_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristic_length_m: Option<f64>,
    pub confidence: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("detection `{0}`: label must be nonempty")]
    EmptyLabel(String),
    #[error("detection `{0}`: azimuth {1} outside -180..180")]
    Azimuth(String, f64),
    #[error("detection `{0}`: distance {1} must be positive")]
    Distance(String, f64),
    #[error("detection `{0}`: characteristic length {1} must be positive")]
    Length(String, f64),
    #[error("detection `{0}`: confidence {1} outside 0..1")]
    Confidence(String, f64),
}

impl DetectedObject {
    pub fn new(label: impl Into<String>, azimuth_deg: f64, distance_m: f64) -> Self {
        Self {
            label: label.into(),
            azimuth_deg,
            distance_m,
            characteristic_length_m: None,
            confidence: 1.0,
        }
    }

    pub fn with_length(mut self, meters: f64) -> Self {
        self.characteristic_length_m = Some(meters);
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn check(&self) -> Result<(), DetectionError> {
        let l = || self.label.clone();
        if self.label.trim().is_empty() {
            return Err(DetectionError::EmptyLabel(l()));
        }
        if !(-180.0..=180.0).contains(&self.azimuth_deg) {
            return Err(DetectionError::Azimuth(l(), self.azimuth_deg));
        }
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(DetectionError::Distance(l(), self.distance_m));
        }
        if let Some(len) = self.characteristic_length_m {
            if !(len > 0.0 && len.is_finite()) {
                return Err(DetectionError::Length(l(), len));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(DetectionError::Confidence(l(), self.confidence));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRelation {
    OnYourLeft,
    OnYourRight,
    InFrontOfYou,
}

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 3] = [
        SpatialRelation::OnYourLeft,
        SpatialRelation::OnYourRight,
        SpatialRelation::InFrontOfYou,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            Self::OnYourLeft => "on your left",
            Self::OnYourRight => "on your right",
            Self::InFrontOfYou => "in front of you",
        }
    }
}

/// Snapshot of detected objects. Frozen snapshots are attached to a step and
/// never change afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialContext {
    pub objects: Vec<DetectedObject>,
    pub captured_at: DateTime<Utc>,
    pub frozen: bool,
}

impl Default for SpatialContext {
    fn default() -> Self {
        Self::empty()
    }
}

impl SpatialContext {
    pub fn empty() -> Self {
        Self {
            objects: Vec::new(),
            captured_at: now_utc(),
            frozen: true,
        }
    }

    pub fn frozen(objects: Vec<DetectedObject>) -> Self {
        Self {
            objects,
            captured_at: now_utc(),
            frozen: true,
        }
    }

    /// Detections trusted for rewriting, one per lowercased label (highest
    /// confidence wins, earlier entry on ties).
    pub fn usable_objects(&self) -> Vec<&DetectedObject> {
        let mut out: Vec<&DetectedObject> = Vec::new();
        for obj in self
            .objects
            .iter()
            .filter(|o| o.confidence >= MIN_CONFIDENCE)
        {
            let key = obj.label.trim().to_lowercase();
            if key.is_empty() {
                continue;
            }
            match out
                .iter_mut()
                .find(|o| o.label.trim().to_lowercase() == key)
            {
                Some(slot) if obj.confidence > slot.confidence => *slot = obj,
                Some(_) => {}
                None => out.push(obj),
            }
        }
        out
    }

    /// One-line summary used in prompts, e.g.
    /// `coffee mug (on your right, 0.6 m); dripper (on your left, 0.4 m)`.
    pub fn summary(&self) -> String {
        self.usable_objects()
            .iter()
            .map(|o| {
                format!(
                    "{} ({}, {:.1} m)",
                    o.label.trim(),
                    relation_of(o).phrase(),
                    o.distance_m
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn relation_of(obj: &DetectedObject) -> SpatialRelation {
    if obj.azimuth_deg < -FRONT_BAND_DEG {
        SpatialRelation::OnYourLeft
    } else if obj.azimuth_deg > FRONT_BAND_DEG {
        SpatialRelation::OnYourRight
    } else {
        SpatialRelation::InFrontOfYou
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub label: String,
    pub span: Range<usize>,
}

/// First whole-word, case-insensitive occurrence of every usable detected
/// label, sorted by position. A mention nested inside a longer one ("mug"
/// inside "coffee mug") is dropped.
pub fn first_mentions(text: &str, context: &SpatialContext) -> Vec<Mention> {
    let mut found: Vec<Mention> = context
        .usable_objects()
        .into_iter()
        .filter_map(|o| {
            find_whole_word(text, o.label.trim())
                .into_iter()
                .next()
                .map(|span| Mention {
                    label: o.label.trim().to_string(),
                    span,
                })
        })
        .collect();
    found.sort_by(|a, b| {
        a.span
            .start
            .cmp(&b.span.start)
            .then(b.span.end.cmp(&a.span.end))
    });
    let mut out: Vec<Mention> = Vec::with_capacity(found.len());
    for m in found {
        if out
            .iter()
            .any(|o| o.span.start < m.span.end && m.span.start < o.span.end)
        {
            continue;
        }
        out.push(m);
    }
    out
}

fn follows_relation_phrase(rest: &str) -> bool {
    let rest = rest.trim_start_matches([' ', '(']);
    SpatialRelation::ALL.iter().any(|r| {
        rest.get(..r.phrase().len())
            .is_some_and(|p| p.eq_ignore_ascii_case(r.phrase()))
    })
}

/// Inserts the relation phrase right after each first mention:
/// "coffee mug" becomes "coffee mug on your right". Mentions already followed
/// by a relation phrase are left alone, which makes the rewrite idempotent.
pub fn elaborate_locations(text: &str, context: &SpatialContext) -> String {
    let objects = context.usable_objects();
    let mut out = String::with_capacity(text.len() + 32);
    let mut cursor = 0;
    for m in first_mentions(text, context) {
        if follows_relation_phrase(&text[m.span.end..]) {
            continue;
        }
        let Some(obj) = objects
            .iter()
            .find(|o| o.label.trim().eq_ignore_ascii_case(&m.label))
        else {
            continue;
        };
        out.push_str(&text[cursor..m.span.end]);
        out.push(' ');
        out.push_str(relation_of(obj).phrase());
        cursor = m.span.end;
    }
    out.push_str(&text[cursor..]);
    out
}

/// A numeric measure found in text, converted to meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub span: Range<usize>,
    pub meters: f64,
}

static MEASURE_RE: LazyLock<Regex> = LazyLock::new(|| {
    RegexBuilder::new(
        r"\b(\d+(?:\.\d+)?|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve)[\s-]*(inches|inch|in|centimeters|centimetres|cm|millimeters|millimetres|mm|feet|foot|ft|meters|metres|meter|metre|m)\b",
    )
    .case_insensitive(true)
    .build()
    .expect("measure pattern")
});

fn number_value(s: &str) -> Option<f64> {
    const WORDS: [&str; 12] = [
        "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
        "twelve",
    ];
    let lower = s.to_lowercase();
    WORDS
        .iter()
        .position(|w| *w == lower)
        .map(|i| (i + 1) as f64)
        .or_else(|| s.parse().ok())
}

fn unit_meters(unit: &str) -> f64 {
    match unit.to_lowercase().as_str() {
        "inches" | "inch" | "in" => 0.0254,
        "centimeters" | "centimetres" | "cm" => 0.01,
        "millimeters" | "millimetres" | "mm" => 0.001,
        "feet" | "foot" | "ft" => 0.3048,
        _ => 1.0,
    }
}

/// Numeric measures `<number> <unit>` with number words one..twelve.
pub fn find_measures(text: &str) -> Vec<Measure> {
    MEASURE_RE
        .captures_iter(text)
        .filter_map(|c| {
            let whole = c.get(0)?;
            let unit = c.get(2)?.as_str();
            // "2 in the box" is a preposition, not inches.
            if unit.eq_ignore_ascii_case("in")
                && text[whole.end()..]
                    .trim_start()
                    .chars()
                    .next()
                    .is_some_and(char::is_alphabetic)
            {
                return None;
            }
            let value = number_value(c.get(1)?.as_str())?;
            Some(Measure {
                span: whole.range(),
                meters: value * unit_meters(unit),
            })
        })
        .collect()
}

fn clause_end(text: &str, from: usize) -> usize {
    text[from..]
        .find([',', '.', ';', ':', '!', '?', '\n'])
        .map_or(text.len(), |i| from + i)
}

fn indefinite_article(label: &str) -> &'static str {
    match label.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Appends ", or the length of a <label>" to the clause holding a measure
/// whenever a detected object's size is within 25% of it. The object with
/// the ratio nearest 1 wins. One reference per clause.
pub fn substitute_measures(text: &str, context: &SpatialContext) -> String {
    let sized: Vec<(&DetectedObject, f64)> = context
        .usable_objects()
        .into_iter()
        .filter_map(|o| o.characteristic_length_m.map(|l| (o, l)))
        .collect();
    if sized.is_empty() {
        return text.to_string();
    }
    let mut inserts: Vec<(usize, String)> = Vec::new();
    for m in find_measures(text) {
        let end = clause_end(text, m.span.end);
        if inserts.iter().any(|(at, _)| *at == end) || text[end..].starts_with(REFERENCE_PREFIX) {
            continue;
        }
        let best = sized
            .iter()
            .map(|(o, len)| (o, (len / m.meters - 1.0).abs()))
            .filter(|(_, dev)| *dev <= SIZE_TOLERANCE + 1e-12)
            .fold(None::<(&&DetectedObject, f64)>, |acc, cur| match acc {
                Some(a) if a.1 <= cur.1 => Some(a),
                _ => Some(cur),
            });
        if let Some((obj, _)) = best {
            let label = obj.label.trim();
            inserts.push((
                end,
                format!("{REFERENCE_PREFIX}{} {label}", indefinite_article(label)),
            ));
        }
    }
    let mut out = text.to_string();
    for (at, s) in inserts.into_iter().rev() {
        out.insert_str(at, &s);
    }
    out
}

/// Relation phrases followed by size references.
pub fn elaborate(text: &str, context: &SpatialContext) -> String {
    elaborate_locations(&substitute_measures(text, context), context)
}

/// Receives detection messages concurrently and hands out frozen snapshots.
/// Updates are last-write-wins; freezing copies the current list.
#[derive(Debug, Default)]
pub struct DetectionFeed {
    latest: ArcSwap<Vec<DetectedObject>>,
}

impl DetectionFeed {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, objects: Vec<DetectedObject>) -> Result<(), DetectionError> {
        for o in &objects {
            o.check()?;
        }
        self.latest.store(Arc::new(objects));
        Ok(())
    }

    pub fn current(&self) -> Arc<Vec<DetectedObject>> {
        self.latest.load_full()
    }

    pub fn freeze(&self) -> SpatialContext {
        SpatialContext::frozen(self.current().as_ref().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(objects: Vec<DetectedObject>) -> SpatialContext {
        SpatialContext::frozen(objects)
    }

    #[test]
    fn relation_thresholds() {
        let at = |az| relation_of(&DetectedObject::new("x", az, 1.0));
        assert_eq!(at(-90.0), SpatialRelation::OnYourLeft);
        assert_eq!(at(0.0), SpatialRelation::InFrontOfYou);
        assert_eq!(at(20.0), SpatialRelation::InFrontOfYou);
        assert_eq!(at(-20.0), SpatialRelation::InFrontOfYou);
        assert_eq!(at(20.5), SpatialRelation::OnYourRight);
    }

    #[test]
    fn first_mentions_of_coffee_manual() {
        let text = "Place the coffee mug with the dripper";
        let c = ctx(vec![
            DetectedObject::new("coffee mug", 45.0, 0.5),
            DetectedObject::new("dripper", -30.0, 0.4),
        ]);
        let m = first_mentions(text, &c);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].label, "coffee mug");
        assert_eq!(&text[m[0].span.clone()], "coffee mug");
        assert_eq!(&text[m[1].span.clone()], "dripper");
    }

    #[test]
    fn repeated_label_yields_single_first_span() {
        let m = first_mentions(
            "mug mug mug",
            &ctx(vec![DetectedObject::new("mug", 0.0, 1.0)]),
        );
        assert_eq!(
            m,
            vec![Mention {
                label: "mug".into(),
                span: 0..3
            }]
        );
    }

    #[test]
    fn plural_is_not_a_mention() {
        let m = first_mentions(
            "Wash the mugs",
            &ctx(vec![DetectedObject::new("mug", 0.0, 1.0)]),
        );
        assert!(m.is_empty());
    }

    #[test]
    fn nested_label_is_suppressed() {
        let c = ctx(vec![
            DetectedObject::new("mug", -45.0, 1.0),
            DetectedObject::new("coffee mug", 45.0, 1.0),
        ]);
        let out = elaborate_locations("Then place the coffee mug down", &c);
        assert_eq!(out, "Then place the coffee mug on your right down");
    }

    #[test]
    fn coffee_mug_gets_relation_phrase() {
        let c = ctx(vec![DetectedObject::new("coffee mug", 45.0, 0.5)]);
        assert_eq!(
            elaborate_locations("Then place the coffee mug with the dripper", &c),
            "Then place the coffee mug on your right with the dripper"
        );
    }

    #[test]
    fn empty_context_is_identity() {
        let t = "Then place the coffee mug with the dripper";
        assert_eq!(elaborate_locations(t, &SpatialContext::empty()), t);
        assert_eq!(substitute_measures(t, &SpatialContext::empty()), t);
    }

    #[test]
    fn low_confidence_detections_are_ignored() {
        let c = ctx(vec![
            DetectedObject::new("mug", 45.0, 0.5).with_confidence(0.3)
        ]);
        assert_eq!(elaborate_locations("Lift the mug", &c), "Lift the mug");
    }

    #[test]
    fn screwdriver_reference() {
        let c = ctx(vec![
            DetectedObject::new("screwdriver", 10.0, 0.6).with_length(0.18)
        ]);
        assert_eq!(
            substitute_measures("Move the gear to seven inches left", &c),
            "Move the gear to seven inches left, or the length of a screwdriver"
        );
    }

    #[test]
    fn nearer_ratio_wins() {
        // 10 cm measure: ratios 1.10 and 1.20.
        let c = ctx(vec![
            DetectedObject::new("pencil", 0.0, 1.0).with_length(0.12),
            DetectedObject::new("eraser", 0.0, 1.0).with_length(0.11),
        ]);
        assert_eq!(
            substitute_measures("Cut 10 cm of tape.", &c),
            "Cut 10 cm of tape, or the length of an eraser."
        );
    }

    #[test]
    fn out_of_tolerance_is_unchanged() {
        let c = ctx(vec![
            DetectedObject::new("pencil", 0.0, 1.0).with_length(0.5)
        ]);
        assert_eq!(
            substitute_measures("Cut 10 cm of tape.", &c),
            "Cut 10 cm of tape."
        );
    }

    #[test]
    fn measure_parsing() {
        let m = find_measures("roughly 1.5 feet apart, 7 in. and put 2 in the box, 30 mm");
        let meters: Vec<f64> = m.iter().map(|m| m.meters).collect();
        assert_eq!(meters.len(), 3);
        assert!((meters[0] - 0.4572).abs() < 1e-12);
        assert!((meters[1] - 0.1778).abs() < 1e-12);
        assert!((meters[2] - 0.03).abs() < 1e-12);
    }

    #[test]
    fn substitution_is_idempotent() {
        let c = ctx(vec![
            DetectedObject::new("screwdriver", 10.0, 0.6).with_length(0.18)
        ]);
        let once = substitute_measures("Move the gear to seven inches left", &c);
        assert_eq!(substitute_measures(&once, &c), once);
    }

    #[test]
    fn feed_freeze_is_a_snapshot() {
        let feed = DetectionFeed::new();
        feed.publish(vec![DetectedObject::new("mug", 30.0, 1.0)])
            .unwrap();
        let frozen = feed.freeze();
        feed.publish(vec![DetectedObject::new("mug", -30.0, 1.0)])
            .unwrap();
        assert!(frozen.frozen);
        assert_eq!(frozen.objects[0].azimuth_deg, 30.0);
        assert!(feed
            .publish(vec![DetectedObject::new("mug", 200.0, 1.0)])
            .is_err());
    }
}
