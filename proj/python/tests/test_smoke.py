import json

import numpy as np
import pytest

import striatum


def small_cohort(n_normal=12, n_pd=18, seed=3):
    xn, yn = striatum.generate_phantoms("normal", n_normal, seed=seed)
    xp, yp = striatum.generate_phantoms("pd", n_pd, seed=seed + 1)
    return np.concatenate([xn, xp]), yn + yp


def test_phantoms_shape_range_and_determinism():
    x, y = striatum.generate_phantoms("pd", 3, seed=5)
    assert x.shape == (3, 109, 91)
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert y == ["pd"] * 3
    x2, _ = striatum.generate_phantoms("pd", 3, seed=5)
    assert np.array_equal(x, x2)
    with pytest.raises(ValueError):
        striatum.generate_phantoms("other", 1)


def test_metrics_match_hand_computation():
    m = striatum.metrics_from_confusion(433, 10, 1, 209)
    assert m["accuracy"] == pytest.approx(642 / 653)
    assert m["precision"] == pytest.approx(433 / 434)
    assert m["recall"] == pytest.approx(433 / 443)
    assert m["specificity"] == pytest.approx(209 / 210)
    assert striatum.metrics_from_confusion(0, 0, 0, 5)["precision"] is None
    assert striatum.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert striatum.auc([0.5] * 4, [0, 1, 0, 1]) == pytest.approx(0.5)
    assert striatum.average_precision([0.9, 0.1], [0, 1]) == pytest.approx(0.5)


def test_stratified_folds():
    folds = striatum.stratified_kfold(["pd"] * 443 + ["normal"] * 210, k=10, seed=1)
    counts = sorted(
        (sum(1 for i, f in enumerate(folds) if f == k and i < 443), sum(1 for i, f in enumerate(folds) if f == k and i >= 443))
        for k in range(10)
    )
    assert counts == [(44, 21)] * 7 + [(45, 21)] * 3


def test_nifti_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vol = rng.integers(0, 32768, size=(91, 109, 91), dtype=np.uint16)
    for big in (False, True):
        p = tmp_path / f"v{int(big)}.nii"
        striatum.write_nifti(vol, str(p), "int16", big)
        assert np.array_equal(striatum.read_nifti(str(p)), vol)


def test_train_score_save_load(tmp_path):
    x, y = small_cohort()
    model = striatum.train("logreg", x, y, seed=2)
    assert model.family == "logreg"
    pred = model.predict(x)
    assert np.mean([a == b for a, b in zip(pred, y)]) >= 0.9
    path = tmp_path / "m.model"
    model.save(str(path))
    again = striatum.load_model(str(path))
    assert again.score(x) == model.score(x)

    mlp = striatum.train("mlp", x, y, seed=2, epochs=3)
    assert mlp.epochs_run <= 3
    assert all(0.0 <= s <= 1.0 for s in mlp.score(x[:4]))
    with pytest.raises(ValueError):
        striatum.train("mlp", x, y[:-1])


def test_crossval_report():
    x, y = small_cohort()
    report = striatum.crossval("svm", x, y, k=3, seed=4)
    assert report["k"] == 3
    assert report["schema_version"] == 1
    c = report["confusion"]
    assert c["tp"] + c["fn"] + c["fp"] + c["tn"] == 30
    assert len(report["predictions"]) == 30
    json.dumps(report)


def test_tpe_startup_is_random_and_best_is_minimum():
    space = [
        {"name": "lr", "kind": "log_uniform", "low": 1e-4, "high": 1e-1},
        {"name": "units", "kind": "integer", "low": 8, "high": 64},
        {"name": "act", "kind": "categorical", "choices": ["relu", "tanh"]},
    ]

    def f(a):
        return (np.log10(a["lr"]) + 2.5) ** 2 + ((a["units"] - 40) / 20) ** 2 + (a["act"] == "tanh") * 0.5

    best, value, history = striatum.optimize(f, space, budget=25, seed=9)
    assert len(history) == 25
    assert value == min(t["objective"] for t in history)
    assert 8 <= best["units"] <= 64 and best["act"] in ("relu", "tanh")
    again = striatum.optimize(f, space, budget=25, seed=9)
    assert again[2] == history


def test_cli_in_process(tmp_path):
    code, out, err = striatum.run_cli(
        ["generate-phantoms", "--normal", "4", "--pd", "6", "--swedd", "2", "--seed", "1", "--out", str(tmp_path / "d")]
    )
    assert code == 0, err
    assert "swedd 2" in out
    x, y = striatum.load_manifest(str(tmp_path / "d" / "manifest.csv"), "average")
    assert x.shape == (12, 109, 91)
    assert sorted(set(y)) == ["normal", "pd", "swedd"]
    assert striatum.run_cli(["crossval"])[0] == 2
