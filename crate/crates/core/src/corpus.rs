//! Seed corpus: two recorded task manuals with expert-approved
//! simplifications, the dumbbell worked example, few-shot exemplars built
//! from them, and a scripted backend fixture for the coffee manual.

use crate::calibration::{GoldSample, GoldSource};
use crate::prompt::{Exemplar, PromptTemplate};
use crate::types::{
    ErrorClass, ManualDocument, PlanAction, SimplificationPlan, SimplificationTechnique,
};

use SimplificationTechnique::*;

pub const COFFEE_TITLE: &str = "Pour-over coffee";
pub const MEETING_TITLE: &str = "Meeting room setup";

/// (original, simplified) pairs for the pour-over coffee task.
pub const COFFEE_PAIRS: [(&str, &str); 9] = [
    (
        "To create a coffee, first please carefully place the pour-over dripper over the coffee mug.",
        "Place dripper (on your left) on coffee mug.",
    ),
    (
        "Prepare the filter insert by folding the paper filter in half to create a semi-circle, and in half again to create a quarter-circle. Place the paper filter in the dripper and spread open to create a cone.",
        "Fold paper filter in half, then half again. Put filter in dripper, form cone shape.",
    ),
    (
        "Rinse the filter. Pour enough hot water into the filter to wet it. The entire paper filter should be moist. Rinsing the filter will remove any papery residue so your coffee doesn't have a woodsy taste.",
        "Wet filter with water to rinse away residue.",
    ),
    (
        "Lift up the dripper and pour out the water. Then set the dripper with the wet filter back on the coffee mug.",
        "Remove dripper, pour out water, and return dripper to coffee mug.",
    ),
    (
        "Get out a digital scale and measure out 3 tablespoons (about 30 g) of coffee beans. Measure out 30 g of whole beans and place them in your grinder.",
        "Measure 30g coffee beans on a digital scale (right side), place in grinder (right side).",
    ),
    (
        "Grind the beans until the coffee grounds are the consistency of coarse sand, about 20 seconds.",
        "Grind beans for 20 seconds, until coarse sand consistency.",
    ),
    (
        "Transfer the coffee grounds to the filter cone. Then place the coffee mug with the dripper on a digital scale and set it to zero.",
        "Move grounds to filter cone. Set coffee mug with dripper on scale, zero it.",
    ),
    (
        "Slowly pour the water over the grounds in a circular motion. Do not overfill beyond the top of the paper filter. Your scale should read 100 g once you've poured enough water into the dripper.",
        "Slowly pour water in circles over grounds, stopping at 100g on scale.",
    ),
    (
        "Let the coffee drain completely into the mug and wait for 30 seconds and you can complete the task;",
        "Drain coffee into mug and wait for 30 seconds to end.",
    ),
];

/// (original, simplified) pairs for the meeting room task.
pub const MEETING_PAIRS: [(&str, &str); 7] = [
    (
        "Before arranging the meeting room, take a moment to tidy up the desk and move anything that's not necessary to other desks;",
        "Tidy desk, move the unnecessary items to other desks.",
    ),
    (
        "Once the desk is clear, bring the power strip on the desk and connect the Charger to the power strip so the meeting attendants can use.",
        "Put power strip on desk, connect phone charger to it.",
    ),
    (
        "Connect the camera's charger to the power strip and position the camera at the opposite end of the desk from the TV.",
        "Connect camera to strip, facing opposite of TV.",
    ),
    (
        "Arrange the chairs in the meeting room. Make sure that there's enough space between each chair - roughly 1.5 feet should suffice. Position one chair on the window side, and place five chairs on the other side.",
        "Arrange chairs on two sides. Leave space of roughly two A4 papers' length apart. Window side: 1 chair. Other side: 5 chairs.",
    ),
    (
        "Next, place cups of water and papers on each chair. Each person should have one cup of water and paper;",
        "Place water, paper onto desk in front of chairs.",
    ),
    (
        "Put up the desk nameplates on on each chair. When Alice is on the side of the window, other desk nameplates should be put on the other side. The sequence is Bob, Amy, Andy, Dave and Luis.",
        "Place nameplates: Window side: Alice (window); sequence (left to right) on other side: Bob, Amy, Andy, Dave, Luis.",
    ),
    (
        "Since Alice is the VIP in the meeting, place make it clearly by putting the remote controller to Alice’s position.",
        "Place remote controller at Alice’s position on desk.",
    ),
];

pub const DUMBBELL_INPUT: &str = "Grab a pair of 10 to 12 lb (4.5 to 5.4 kg) dumbbells and lie on your back with your arms behind you and your legs extended and raised to a 45-degree angle";

pub const DUMBBELL_OUTPUT: &str = "Grab a pair of 10 to 12 lb (4.5 to 5.4 kg) dumbbells. Lie on your back with your arms behind you. Extend your legs and raise them to a 45-degree angle.";

pub const DUMBBELL_THOUGHTS: &str = "The sentence is overly long for the display and joins more than three phrases, so it needs syntactic simplification.";

pub fn dumbbell_plan() -> SimplificationPlan {
    SimplificationPlan {
        thoughts: DUMBBELL_THOUGHTS.to_string(),
        actions: vec![
            PlanAction::new(
                SyntacticSimplification,
                "split the sentence at the first \"and\" because the two joined clauses are too long",
            ),
            PlanAction::new(
                SyntacticSimplification,
                "split the sentence at the second \"and\" for the same reason",
            ),
            PlanAction::new(
                SyntacticSimplification,
                "adjust the passive voice in \"your legs extended and raised\"",
            ),
        ],
    }
}

/// Every recorded (original, simplified) pair, coffee first.
pub fn appendix_pairs() -> Vec<(&'static str, &'static str)> {
    COFFEE_PAIRS
        .iter()
        .chain(MEETING_PAIRS.iter())
        .copied()
        .collect()
}

pub fn coffee_manual() -> ManualDocument {
    ManualDocument::new(COFFEE_TITLE, COFFEE_PAIRS.iter().map(|(o, _)| *o))
        .expect("coffee manual is well-formed")
        .with_tags([
            "coffee",
            "kitchen",
            "term:dripper",
            "term:filter",
            "term:scale",
        ])
}

pub fn meeting_manual() -> ManualDocument {
    ManualDocument::new(MEETING_TITLE, MEETING_PAIRS.iter().map(|(o, _)| *o))
        .expect("meeting manual is well-formed")
        .with_tags(["office", "meeting", "term:power strip", "term:camera"])
}

fn exemplar(
    input: &str,
    spatial: Option<&str>,
    thoughts: &str,
    actions: Vec<PlanAction>,
    output: &str,
) -> Exemplar {
    Exemplar {
        input_text: input.to_string(),
        spatial_context_summary: spatial.map(String::from),
        thoughts: thoughts.to_string(),
        plan: SimplificationPlan {
            thoughts: thoughts.to_string(),
            actions,
        },
        output_text: output.to_string(),
    }
}

/// Few-shot exemplars with intermediate reasoning.
pub fn seed_exemplars() -> Vec<Exemplar> {
    vec![
        exemplar(
            DUMBBELL_INPUT,
            None,
            DUMBBELL_THOUGHTS,
            dumbbell_plan().actions,
            DUMBBELL_OUTPUT,
        ),
        exemplar(
            COFFEE_PAIRS[0].0,
            Some("dripper (on your left, 0.4 m); coffee mug (in front of you, 0.5 m)"),
            "Polite filler and the purpose clause add length without task content. The dripper was detected on the user's left.",
            vec![
                PlanAction::new(ContentReduction, "drop \"To create a coffee, first please carefully\""),
                PlanAction::new(LexicalSimplification, "keep the task terms dripper and coffee mug"),
                PlanAction::new(ElaborativeSimplification, "add the dripper's location on your left"),
            ],
            COFFEE_PAIRS[0].1,
        ),
        exemplar(
            COFFEE_PAIRS[2].0,
            None,
            "Four sentences repeat the same action; the explanation of residue is non-essential and the text would fill many lines.",
            vec![
                PlanAction::new(ContentReduction, "merge the repeated rinse and wet instructions"),
                PlanAction::new(ContentReduction, "drop the explanation about the woodsy taste"),
            ],
            COFFEE_PAIRS[2].1,
        ),
        exemplar(
            MEETING_PAIRS[0].0,
            None,
            "The opening clause only sets context; the instruction is two actions.",
            vec![
                PlanAction::new(ContentReduction, "drop \"Before arranging the meeting room, take a moment to\""),
                PlanAction::new(SyntacticSimplification, "turn the two actions into a comma list"),
            ],
            MEETING_PAIRS[0].1,
        ),
        exemplar(
            MEETING_PAIRS[6].0,
            None,
            "The reason clause is not needed to act, and \"place make it clearly\" is confusing.",
            vec![
                PlanAction::new(ContentReduction, "drop the reason clause about the VIP"),
                PlanAction::new(SyntacticSimplification, "rewrite as a single imperative"),
            ],
            MEETING_PAIRS[6].1,
        ),
    ]
}

pub fn default_template() -> PromptTemplate {
    PromptTemplate::new(seed_exemplars(), 7)
}

/// Scripted backend fixture for simplifying [`coffee_manual`]: nine plan
/// responses and five candidates per step, consumed in step order.
pub const COFFEE_MOCK_FIXTURE: &str = include_str!("../../../fixtures/coffee_mock.json");

/// Gold samples from the recorded pairs: each approved simplification as a
/// positive, and a meaning-altering truncation of it as a negative.
pub fn seed_gold() -> Vec<GoldSample> {
    let mut out = Vec::new();
    for (original, simplified) in appendix_pairs() {
        out.push(GoldSample::correct(
            original,
            simplified,
            GoldSource::Seeded,
        ));
        let truncated: Vec<&str> = simplified.split_whitespace().take(2).collect();
        out.push(GoldSample::erroneous(
            original,
            truncated.join(" "),
            ErrorClass::MeaningAltered,
            GoldSource::Seeded,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_manual;

    #[test]
    fn manuals_are_well_formed() {
        assert!(validate_manual(&coffee_manual()).is_empty());
        assert!(validate_manual(&meeting_manual()).is_empty());
        assert_eq!(coffee_manual().steps.len(), 9);
        assert_eq!(appendix_pairs().len(), 16);
    }

    #[test]
    fn exemplars_are_valid() {
        assert!(seed_exemplars().iter().all(Exemplar::is_valid));
    }
}
