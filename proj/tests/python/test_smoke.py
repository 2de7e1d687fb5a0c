import numpy as np
import pytest

import svdkd

SMALL = {"n_identities": 12, "d": 16, "d_in": 8, "latent_rank": 8, "seed": 3}


def test_generate_and_round_trip(tmp_path):
    data = svdkd.generate_dataset(SMALL)
    assert len(data) == 12 * 4 * 2
    assert data.dim == 16
    assert data.raw_inputs.shape == (96, 8)
    assert data.source_tag == "synthetic"
    assert set(data.modalities) == {"rgb", "ir", "sketch", "text"}
    path = tmp_path / "set.emb1"
    svdkd.save_set(data, str(path))
    assert svdkd.load_set(str(path)) == data


def test_spectrum_matches_numpy():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(40, 12))
    u, s, v = svdkd.thin_svd(f)
    np.testing.assert_allclose(s, np.linalg.svd(f, compute_uv=False), rtol=1e-10)
    np.testing.assert_allclose(u @ np.diag(s) @ v.T, f, atol=1e-10)
    report = svdkd.spectrum_report(f)
    assert report["cumulative"][-1] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(report["weights"], s**2 / np.sum(s**2), rtol=1e-12)


def test_losses_return_gradients():
    rng = np.random.default_rng(1)
    t = rng.normal(size=(6, 5))
    s = rng.normal(size=(6, 5))
    value, grad = svdkd.cosine_loss(t, s)
    cos = np.sum(t * s, axis=1) / (np.linalg.norm(t, axis=1) * np.linalg.norm(s, axis=1))
    assert value == pytest.approx(np.mean(1.0 - cos), abs=1e-12)
    assert grad.shape == s.shape
    assert svdkd.fr_loss(t, t)[0] < 1e-12
    labels = [0, 0, 1, 1, 2, 2]
    mods = ["rgb", "ir", "rgb", "ir", "rgb", "ir"]
    value, grad, terms = svdkd.sdm_total(s, labels, mods)
    assert terms == 2 and grad.shape == s.shape


def test_evaluate_contract_error():
    data = svdkd.generate_dataset(SMALL)
    with pytest.raises(svdkd.SvdkdError, match="e2c contract"):
        svdkd.evaluate_retrieval(data, data, "sketch:rgb", "e2c")
    m = svdkd.evaluate_retrieval(data, data, "sketch:rgb", "c2c")
    assert 0.0 <= m["map"] <= 1.0 and m["n_queries"] == 24


def test_train_embed_and_checkpoint(tmp_path):
    train, heldout = svdkd.generate_split(SMALL, 4)
    student, log = svdkd.train_distill(
        train, {"epochs": 2, "hidden_dim": 16, "depth": 2, "pcm_k": 8, "seed": 1}, heldout
    )
    assert len(log["epochs"]) == 2
    assert all(np.isfinite(step["shared"]) for step in log["steps"])
    edge = student.embed(heldout)
    assert edge.source_tag == "edge" and edge.features.shape == (len(heldout), 16)
    path = tmp_path / "student.stu1"
    student.save(str(path))
    again = svdkd.load_student(str(path)).embed(heldout)
    np.testing.assert_array_equal(again.features, edge.features)


def test_config_errors_raise():
    with pytest.raises(svdkd.SvdkdError):
        svdkd.generate_dataset({"latent_rank": 99, "d": 16})
    assert "paper" in svdkd.config_schema()
