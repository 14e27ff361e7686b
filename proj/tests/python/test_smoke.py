import json
import pathlib

import numpy as np
import pytest

import repsim

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"


def test_actv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    frames = [rng.standard_normal((t, 5)).astype(np.float32) for t in (1, 3, 2)]
    s = repsim.ActivationSet("m", "L3", "deu", "speech", ["a", "b", "c"], frames)
    repsim.write_actv(s, tmp_path / "x.actv")
    back = repsim.read_actv(tmp_path / "x.actv")
    assert back.ids == ["a", "b", "c"]
    assert back.modality == "speech" and back.layer_tag == "L3"
    for f, g in zip(frames, back.frames):
        np.testing.assert_array_equal(f, g)
    assert repsim.encode_actv(back) == (tmp_path / "x.actv").read_bytes()
    features, ids = repsim.meanpool(back)
    assert features.shape == (5, 3)
    np.testing.assert_allclose(features[:, 1], frames[1].mean(axis=0), rtol=1e-6)


def test_corrupt_bytes_raise():
    s = repsim.ActivationSet("m", "L1", "eng", "text", ["a"], [np.ones((1, 2), np.float32)])
    raw = repsim.encode_actv(s)
    with pytest.raises(repsim.CorruptionError):
        repsim.decode_actv(raw[:-4])
    with pytest.raises(repsim.Error):
        repsim.decode_actv(b"XXXX" + raw[4:])


def test_svcca_properties():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 60))
    assert repsim.svcca(x, x)["score"] == pytest.approx(1.0, abs=1e-6)
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    y = 3.0 * q @ x + 2.0
    assert repsim.svcca(x, y)["score"] == pytest.approx(1.0, abs=1e-6)
    z = rng.standard_normal((6, 60))
    assert repsim.svcca(x, z)["score"] == pytest.approx(repsim.svcca(z, x)["score"], abs=1e-8)
    with pytest.raises(repsim.AlignmentError):
        repsim.svcca(x, z[:, :50])


def test_align_and_baseline():
    x = np.arange(12.0).reshape(2, 6)
    a, b, ids = repsim.align(x, list("abcdef"), x[:, ::-1], list("fedcba"), cap=4)
    assert ids == list("abcd")
    np.testing.assert_array_equal(a, b)
    r1 = repsim.random_baseline(16, 16, 100, trials=20, seed=3)
    r2 = repsim.random_baseline(16, 16, 100, trials=20, seed=3, workers=2)
    assert r1 == r2
    assert 0.0 < r1["mean"] < 1.0


def test_statistics():
    assert repsim.pearson([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
    assert 0.0 < repsim.pearson_p_value(0.228, 435) < 1e-5
    assert repsim.shared_token_proportion([1, 2, 3], [2, 3, 4]) == pytest.approx(0.5)
    assert repsim.silhouette(np.array([[0, 0], [0, 0.1], [5, 5], [5, 5.1]]), ["a", "a", "b", "b"]) > 0.9


def test_projection_keeps_order():
    rng = np.random.default_rng(2)
    data = np.vstack([rng.standard_normal((20, 6)) + 6 * k for k in range(2)])
    ids = [f"s{i}" for i in range(40)]
    langs = ["aaa"] * 20 + ["bbb"] * 20
    pca = repsim.project_2d(data, ids, langs, method="pca")
    assert pca["coords"].shape == (40, 2)
    # 40 points: the default step overshoots under exaggeration, so use a smaller one.
    tsne = repsim.project_2d(data, ids, langs, perplexity=5.0, iterations=1000, learning_rate=50.0)
    assert tsne["kl_final"] < tsne["kl_initial"]
    assert repsim.silhouette(tsne["coords"], langs) > 0.5


def test_synth_study(tmp_path):
    cfg = (DATA / "synth_small.json").read_text()
    repsim.write_world(cfg, tmp_path / "world", workers=2)
    truth = json.loads(repsim.ground_truth(cfg))
    assert truth["curves_rise"]
    assert "resource_order_ascending" in truth
    summary = repsim.run_study(tmp_path / "world", tmp_path / "out", workers=2, seed=1, baseline_trials=2)
    assert summary["crossmodal_records"] == 24
    assert (tmp_path / "out" / "curves.csv").exists()
    with pytest.raises(repsim.Error):
        repsim.run_study(tmp_path / "missing", tmp_path / "out2")
    assert summary["crosslingual_records"] == 15 * 4 * 2
