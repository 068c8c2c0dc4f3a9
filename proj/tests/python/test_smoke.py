import numpy as np
import pytest

import srcatr


def unit_columns(rng, d, n):
    a = rng.standard_normal((d, n))
    return a / np.linalg.norm(a, axis=0)


def test_chip_generation_is_deterministic_and_bounded():
    a = srcatr.generate_chip("cone", 11, 32, 32)
    b = srcatr.generate_chip("cone", 11, 32, 32)
    assert a.shape == (32, 32)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0
    with pytest.raises(ValueError):
        srcatr.generate_chip("teapot", 1)


def test_corruption_and_features():
    chip = srcatr.generate_chip("sphere", 3, 32, 32)
    assert np.array_equal(srcatr.add_noise(chip, 0.0, 5), chip)
    blurred = srcatr.apply_blur(chip, 3.0)
    assert blurred.shape == chip.shape
    assert np.isclose(srcatr.blur_kernel(3.0).sum(), 1.0)
    f = srcatr.vectorize(chip, 8, 8)
    assert f.shape == (64,)
    assert np.isclose(np.linalg.norm(f), 1.0)


def test_pgm_round_trip():
    chip = srcatr.generate_chip("block", 2, 16, 16)
    back = srcatr.read_pgm(srcatr.write_pgm(chip))
    assert np.max(np.abs(back - chip)) <= 1.0 / 510.0
    with pytest.raises(srcatr.DataError):
        srcatr.read_pgm(b"P2\n")


def test_homotopy_matches_ista():
    rng = np.random.default_rng(0)
    a = unit_columns(rng, 12, 24)
    y = rng.standard_normal(12)
    lam = 0.3 * np.max(np.abs(a.T @ y))
    code = srcatr.homotopy_solve(a, y, epsilon=0.0, lambda_min=lam)
    assert srcatr.kkt_violation(a, y, code["x"], code["lambda_final"]) <= 1e-8
    x_ista, f_ista, converged = srcatr.ista_solve(a, y, code["lambda_final"])
    f_h = srcatr.lasso_objective(a, y, code["x"], code["lambda_final"])
    assert converged
    assert abs(f_h - f_ista) <= 1e-6 * max(1.0, f_ista)


def test_classify_with_dictionary():
    feats, labels = [], []
    for cls in srcatr.MAIN_CLASSES:
        for seed in range(6):
            feats.append(srcatr.vectorize(srcatr.generate_chip(cls, seed, 32, 32), 8, 8))
            labels.append(cls)
    d = srcatr.Dictionary(feats, labels)
    assert d.atoms.shape == (64, 24)
    assert d.classes == srcatr.MAIN_CLASSES
    r = srcatr.classify(d, feats[7], kappa=0.1)
    assert r["predicted"] == labels[7]
    assert int(np.argmin(r["residuals"])) == d.classes.index(r["predicted"])
    assert 0.0 <= r["sci"] <= 1.0
    assert srcatr.nearest_neighbor(d, feats[7]) == labels[7]


def test_small_experiment(tmp_path):
    config = "\n".join([
        "trials = 2",
        "train_per_class = 4",
        "test_per_class = 2",
        "noise_variances = 0, 0.05",
        "chip_size = 32x32",
        "feature_dim = 8x8",
        "pool_sizes = block:8, cone:8, cylinder:8, sphere:8",
    ])
    out = srcatr.run_experiment("noise", config, output_dir=tmp_path)
    assert [p["value"] for p in out["points"]] == [0.0, 0.05]
    assert out["records"] == 2 * 2 * 4 * 2
    assert (tmp_path / "noise_records.csv").exists()
    with pytest.raises(srcatr.ConfigError):
        srcatr.run_experiment("noise", "trials = zero")
