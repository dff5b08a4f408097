"""Smoke test for the arsimplify extension module.

Build and run from the repository root:

    cargo build -p arsimplify-py --release
    mkdir -p /tmp/arsimplify-py && cp target/release/libarsimplify.so /tmp/arsimplify-py/arsimplify.so
    PYTHONPATH=/tmp/arsimplify-py python3 python/smoke_test.py

With maturin installed, `maturin develop -m crates/python/Cargo.toml` works too.
"""

import json
import math
import tempfile

import arsimplify as ar


def check_spatial():
    assert ar.relation(0.0) == "in front of you"
    assert ar.relation(20.0) == "in front of you"
    assert ar.relation(-35.0) == "on your left"
    assert ar.relation(90.0) == "on your right"
    mug = [{"label": "coffee mug", "azimuth_deg": -40.0, "distance_m": 0.6, "confidence": 0.9}]
    out = ar.elaborate("Place the coffee mug under the dripper.", mug)
    assert "on your left" in out, out
    assert ar.elaborate(out, mug) == out


def check_classify_and_validate():
    probs = ar.classify("Place the filter in the dripper.", "Place the filter in the dripper.")
    assert len(probs) == 3 and probs[0] == 0.0
    report = ar.validate("Place the filter in the dripper.", "Place the filter in the dripper.")
    assert report["passed"], report
    long_text = "Rinse the filter with hot water " * 6
    report = ar.validate("Rinse.", long_text, chars_per_line=20)
    assert not report["passed"]


def check_calibrate():
    out = ar.calibrate([0.2, 0.6, 0.9], [[0.0, 0.0, 0.0]] * 3, w_diag=[1.0, 0.0, 0.0, 0.0])
    logits = [0.2, 0.6, 0.9]
    denom = sum(math.exp(z) for z in logits)
    for got, z in zip(out, logits):
        assert abs(got - math.exp(z) / denom) < 1e-12, out


def check_plan_round_trip():
    pipe = ar.Pipeline()
    step = pipe.simplify("Remove the filter and discard it once the water has drained through.")
    plan = step["plan"]
    assert ar.parse_plan(ar.render_plan(plan)) == plan
    assert len(step["candidates"]["candidates"]) == 5
    again = pipe.simplify("Remove the filter and discard it once the water has drained through.")
    assert json.dumps(step, sort_keys=True) == json.dumps(again, sort_keys=True)


def check_manual_and_store():
    manual = ar.example_manual("coffee")
    edited, outcome = ar.Pipeline().simplify_manual(manual)
    assert len(outcome["steps"]) == len(manual["steps"])
    assert all(s["status"] == "simplified" for s in edited["steps"])
    with tempfile.TemporaryDirectory() as d:
        store = ar.ManualStore(d)
        mid = store.create(manual)
        doc = store.get(mid)
        assert doc["version"] == 1
        edited["manual_id"] = mid
        edited["version"] = 1
        assert store.update(mid, edited) == 2
        try:
            store.update(mid, edited)
            raise AssertionError("stale update accepted")
        except ar.ConflictError:
            pass
        try:
            store.get("missing-manual")
            raise AssertionError("missing manual found")
        except ar.NotFoundError:
            pass
        assert [v["version"] for v in store.versions(mid)] == [1, 2]
        assert [m["manual_id"] for m in store.search("coffee")] == [mid]


def check_training():
    gold = []
    for original, simplified in ar.corpus_pairs():
        gold.append({"original_text": original, "simplified_text": simplified,
                     "verdict": 1, "source": "seeded", "raw_probability": 0.8})
        gold.append({"original_text": original, "simplified_text": " ".join(simplified.split()[:2]),
                     "verdict": 0, "error_label": "meaning_altered", "source": "seeded",
                     "raw_probability": 0.3})
    a = ar.train(gold, seed=3, epochs=200)
    b = ar.train(gold, seed=3, epochs=200)
    assert a == b
    assert a["loss_history"][-1] < a["loss_history"][0]
    assert not a["degenerate"]


if __name__ == "__main__":
    check_spatial()
    check_classify_and_validate()
    check_calibrate()
    check_plan_round_trip()
    check_manual_and_store()
    check_training()
    print("python smoke test: ok")
