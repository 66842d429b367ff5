import os
import pathlib

import numpy as np
import pytest

import ucdl

FIXTURE = pathlib.Path(os.environ.get("UCDL_FIXTURE", pathlib.Path(__file__).parents[2] / "tests" / "data" / "golden"))


def test_fft_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 5, 3)) + 1j * rng.standard_normal((6, 5, 3))
    np.testing.assert_allclose(ucdl.fft(x), np.fft.fftn(x), atol=1e-12)
    np.testing.assert_allclose(ucdl.ifft(ucdl.fft(x)), x, atol=1e-12)


def test_soft_threshold():
    assert ucdl.soft_threshold(3.0, 1.0) == 2.0
    assert ucdl.soft_threshold(-0.5, 1.0) == 0.0
    assert ucdl.soft_threshold(-2.0, 0.5) == -1.5


def test_synthesis_is_circular_convolution():
    rng = np.random.default_rng(1)
    kernel = np.zeros((1, 3, 3))
    kernel[0, 1, 1] = 1.0
    s = rng.standard_normal((8, 8)) + 0j
    np.testing.assert_allclose(ucdl.dictionary_synthesis(kernel, [s]), s, atol=1e-12)


def test_sparse_code_primal_residual_shrinks():
    cfg = ucdl.NetworkConfig("2d")
    cfg.K, cfg.kf = 2, 3
    filters = ucdl.init_network(cfg, seed=3).filters
    rng = np.random.default_rng(2)
    x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    out = ucdl.sparse_code(x, filters, lam=1.0, alpha=1.0, beta=1.0, iterations=300)
    gap = max(np.abs(u - s).max() for u, s in zip(out["u"], out["s"]))
    assert gap < 1e-5


def test_tensor_round_trip(tmp_path):
    x = np.arange(24, dtype=np.complex128).reshape(2, 3, 4) * (1 - 2j)
    ucdl.write_tensor(tmp_path / "x.ucdl", x)
    np.testing.assert_array_equal(ucdl.read_tensor(tmp_path / "x.ucdl"), x)


def test_defaults_and_unit_norm_init():
    cfg = ucdl.NetworkConfig("2d")
    assert (cfg.K, cfg.kf) == (96, 9)
    cfg = ucdl.NetworkConfig("3d")
    assert (cfg.K, cfg.kf) == (16, 7)
    params = ucdl.init_network(cfg, seed=0)
    assert params.filters.shape == (16, 7, 7, 7)
    norms = np.sqrt((params.filters ** 2).reshape(16, -1).sum(axis=1))
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    assert params.parameter_count == 16 * 343 + 3


def test_bad_mode_raises():
    with pytest.raises(ucdl.UcdlError):
        ucdl.NetworkConfig("4d")


def test_zero_iterations_give_zero_filled():
    (sample,) = ucdl.synth_dataset((12, 12, 3), 1, coils=2, acceleration=2.0, seed=5)
    cfg = ucdl.NetworkConfig("3d")
    cfg.K, cfg.kf, cfg.T = 2, 3, 0
    params = ucdl.init_network(cfg, seed=1)
    np.testing.assert_array_equal(ucdl.reconstruct(sample, params, cfg), sample.zero_filled())


def test_golden_fixture_matches_cli_report():
    import json

    params, cfg = ucdl.load_checkpoint(FIXTURE / "checkpoint.json")
    sample = ucdl.load_sample(FIXTURE / "sample")
    x = ucdl.reconstruct(sample, params, cfg)
    report = ucdl.evaluate(x, sample.target)
    expected = json.loads((FIXTURE / "metrics.json").read_text())
    assert report["psnr"] == expected["psnr"]
    assert report["nrmse"] == expected["nrmse"]
    assert report["ssim"] == expected["ssim"]
    assert list(report["roi"]) == expected["roi"]


def test_identical_images_metrics():
    img = ucdl.make_phantom((16, 16, 2), seed=4)
    report = ucdl.evaluate(img, img)
    assert report["psnr"] == float("inf")
    assert report["nrmse"] == 0.0
    assert report["ssim"] == pytest.approx(1.0)


def test_short_training_keeps_unit_norm_filters():
    data = ucdl.synth_dataset((12, 12, 3), 3, coils=2, acceleration=2.0, seed=8)
    cfg = ucdl.NetworkConfig("3d")
    cfg.K, cfg.kf, cfg.T, cfg.n_cg = 2, 3, 1, 2
    params, log = ucdl.train(data[:2], data[2:], cfg, epochs=2, lr=1e-3, seed=1)
    assert [row[0] for row in log] == [0, 1, 2]
    assert params.max_norm_defect() < 1e-12
    assert all(np.isfinite(row[1]) and np.isfinite(row[2]) for row in log)
