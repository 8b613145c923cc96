"""Smoke tests for the amilab python module.

Runs under pytest or directly: `python test_smoke.py`.
"""

import json
import math
import tempfile
from pathlib import Path

import amilab


def make_lab():
    data = amilab.generate_dataset(per_class=12, noise_sigma=0.25, seed=5)
    train_split, holdout = amilab.split_dataset(data, 0.75)
    model = amilab.train(train_split, epochs=8, batch=8, learning_rate=0.05)
    witness = amilab.extract_witnesses(
        model, train_split, sample_count=24, randomizations=3
    )
    return data, train_split, holdout, model, witness


LAB = make_lab()


def test_dataset_shape():
    data, train_split, holdout, _, _ = LAB
    assert data.num_classes == 8
    assert len(data) == 96
    assert len(train_split) + len(holdout) == len(data)
    image = data.image(0)
    assert image.shape == [1, 16, 16]
    assert all(0.0 <= v <= 1.0 for v in image.data)
    assert len(data.labels) == len(data)


def test_training_is_reproducible():
    _, train_split, _, model, _ = LAB
    again = amilab.train(train_split, epochs=8, batch=8, learning_rate=0.05)
    assert again.weight_digest == model.weight_digest
    assert 0.0 <= model.train_accuracy <= 1.0


def test_predict_and_accuracy():
    data, _, holdout, model, _ = LAB
    label, logits = amilab.predict(model, data.image(0))
    assert 0 <= label < data.num_classes
    assert len(logits) == data.num_classes
    assert 0.0 <= amilab.accuracy(model, holdout) <= 1.0


def test_witness_map_structure():
    _, _, _, _, witness = LAB
    assert witness.attributes
    assert set(witness.attributes) <= {"eyes", "mouth", "nose"}
    assert witness.layers()
    for attr in witness.attributes:
        for layer in witness.layers():
            units = witness.units(attr, layer)
            assert units == sorted(units)


def test_steering_formulas():
    assert math.isclose(
        amilab.weaken_value(2.0, 1.0, 0.5, 100.0),
        1.9603973466135105,
        rel_tol=0.0,
        abs_tol=1e-15,
    )
    assert math.isclose(
        amilab.strengthen_value(1.0, 0.5, 0.25, 5.0, 1.15),
        1.4796799539643606,
        rel_tol=0.0,
        abs_tol=1e-15,
    )


def test_attribute_predict():
    data, _, _, model, witness = LAB
    label, logits = amilab.attribute_predict(model, witness, data.image(0))
    assert 0 <= label < data.num_classes
    assert len(logits) == data.num_classes
    assert all(math.isfinite(v) for v in logits)


def test_classify_case_names():
    assert amilab.classify_case(1, 1, 1) == "true_negative"
    assert amilab.classify_case(1, 1, 2) == "false_positive"
    assert amilab.classify_case(1, 2, 1) == "true_positive_restored"
    assert amilab.classify_case(1, 2, 2) == "false_negative"
    assert amilab.classify_case(1, 2, 3) == "true_positive_diverted"


def test_run_attack_and_verify():
    _, _, holdout, model, _ = LAB
    adv = amilab.run_attack(model, holdout, [0, 1, 2], method="fgsm", budget=0.15)
    assert len(adv) == 3
    for i in range(len(adv)):
        ex = adv.example(i)
        assert ex["method"] == "fgsm"
        label, _ = amilab.predict(model, ex["image"])
        assert ex["label"] == label
        assert ex["success"] == (label != ex["gold"])


def test_detect_record():
    data, _, _, model, witness = LAB
    rec = amilab.detect(model, witness, data.image(0), int(data.labels[0]))
    assert rec["flagged"] == (rec["original"] != rec["attribute"])
    assert rec["case"] in {
        "true_negative",
        "false_positive",
        "true_positive_restored",
        "false_negative",
        "true_positive_diverted",
    }


def test_aggregate_triples():
    report = json.loads(
        amilab.aggregate_triples([(202, 1674, 1484), (1997, 32, 31), (441, 416, 70)])
    )
    assert report["detection_rate"]["cumulative"] == "1.00 [3/3]"
    assert report["cases"]["total"] == 3


def test_artifact_round_trips():
    data, _, _, model, witness = LAB
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        amilab.save_dataset(data, root / "d.amld")
        assert len(amilab.load_dataset(root / "d.amld")) == len(data)
        amilab.save_model(model, root / "m.amlm")
        assert amilab.load_model(root / "m.amlm").weight_digest == model.weight_digest
        amilab.save_witness_map(witness, root / "w.json")
        assert amilab.load_witness_map(root / "w.json").attributes == witness.attributes


def test_pipeline_and_determinism():
    config = json.dumps(
        {
            "dataset": {"per_class": 6, "noise_sigma": 0.2},
            "train": {"epochs": 2},
            "witness": {"sample_count": 12, "randomizations": 2},
            "attack": {"method": "fgsm"},
            "attack_count": 3,
        }
    )
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        result = amilab.run_pipeline(config, root / "run")
        names = [name for name, _ in result["artifacts"]]
        assert names == [
            "dataset.amld",
            "model.amlm",
            "witness.json",
            "adv.amld",
            "records.csv",
            "metrics.json",
        ]
        assert result["record_count"] > 0
        json.loads(result["metrics"])

        passed, divergent = amilab.determinism_check(config, 2, root / "det")
        assert passed and divergent == ""
        passed, divergent = amilab.determinism_check(
            config, 2, root / "control", reseed_between_runs=True
        )
        assert not passed and divergent == "dataset.amld"


def test_exception_mapping():
    try:
        amilab.aggregate_triples([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty aggregation must raise a usage error")
    try:
        amilab.generate_dataset(classes=0)
    except RuntimeError:
        pass
    else:
        raise AssertionError("zero-class dataset must be rejected")


if __name__ == "__main__":
    passed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            passed += 1
    print(f"python smoke: {passed} checks passed")
