"""Clustering and PCA: purity against a brute-force counting oracle, PCA
against a dense eigensolve, streaming assignment behavior, LACT file format."""

import numpy as np
import pytest

from lace import clustering
from lace.clustering import (ActivationSet, ClusterModel, FormatError,
                             InsufficientDataError, ZeroVectorError,
                             cluster_layer, fit_pca, layer_sweep, purity,
                             read_activations, write_activations)


def oracle_purity(assignments, labels):
    """Brute-force counting definition of cluster purity."""
    total = 0
    for c in set(assignments):
        members = [l for a, l in zip(assignments, labels) if a == c]
        best = max(members.count(v) for v in set(members))
        total += best
    return total / len(labels)


def test_purity_matches_counting_oracle_many_instances():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        a = rng.integers(0, int(rng.integers(1, 6)), n)
        l = rng.integers(0, int(rng.integers(1, 6)), n)
        rep = purity(a, l)
        assert rep.purity == pytest.approx(oracle_purity(list(a), list(l)))
        assert rep.k == len(set(a.tolist()))


def test_purity_validation():
    with pytest.raises(ValueError):
        purity([0, 1], [0])
    with pytest.raises(ValueError):
        purity([], [])


def test_pca_matches_dense_eigensolve():
    rng = np.random.default_rng(1)
    for d in (3, 8, 17, 64):
        x = rng.standard_normal((200, d)) * rng.uniform(0.5, 3.0, d)
        acts = ActivationSet(values=x)
        basis = fit_pca(acts, d_pca=d)
        cov = np.cov(x, rowvar=False)
        evals = np.sort(np.linalg.eigvalsh(cov))[::-1]
        rel = abs(basis.eigenvalues[0] - evals[0]) / evals[0]
        assert rel < 1e-8
        assert np.allclose(np.sort(basis.eigenvalues)[::-1],
                           evals[:len(basis.eigenvalues)], rtol=1e-8)


def test_pca_components_orthonormal_and_reconstruct_subspace():
    rng = np.random.default_rng(2)
    # data lying in a 3-dim subspace of 10 dims
    basis_true = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    x = rng.standard_normal((300, 3)) @ basis_true.T
    basis = fit_pca(ActivationSet(values=x), d_pca=3)
    c = basis.components
    assert np.allclose(c.T @ c, np.eye(3), atol=1e-10)
    # projection then reconstruction recovers the centered data
    proj = basis.project(x)
    rec = proj @ c.T + basis.mean
    assert np.allclose(rec, x, atol=1e-8)


def test_pca_sign_convention_deterministic():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 5))
    b1 = fit_pca(ActivationSet(values=x), d_pca=5)
    b2 = fit_pca(ActivationSet(values=x.copy()), d_pca=5)
    assert np.array_equal(b1.components, b2.components)
    for j in range(5):
        k = np.argmax(np.abs(b1.components[:, j]))
        assert b1.components[k, j] > 0


def test_pca_insufficient_data():
    with pytest.raises(InsufficientDataError):
        fit_pca(ActivationSet(values=np.zeros((3, 8))), d_pca=5)


def test_activation_set_validation():
    with pytest.raises(ValueError):
        ActivationSet(values=np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        ActivationSet(values=np.zeros((3, 2)), labels=np.zeros(2))


def test_cluster_spawn_and_join():
    m = ClusterModel(distance_threshold=0.15)
    a = m.assign(np.array([1.0, 0.0]))
    b = m.assign(np.array([0.99, 0.01]))  # tiny cosine distance, joins
    c = m.assign(np.array([0.0, 1.0]))    # orthogonal, spawns
    assert a == b == 0 and c == 1
    assert m.k == 2
    assert m.counts == [2, 1]


def test_cluster_center_is_running_mean():
    m = ClusterModel(distance_threshold=1.5)  # everything joins cluster 0
    xs = [np.array([1.0, 0.0]), np.array([0.8, 0.1]), np.array([0.9, -0.1])]
    for x in xs:
        m.assign(x)
    assert np.allclose(m.centers[0], np.mean(xs, axis=0))


def test_zero_vector_rejected():
    m = ClusterModel()
    with pytest.raises(ZeroVectorError):
        m.assign(np.zeros(4))


def test_three_blob_sweep_purity():
    """Three well-separated gaussian blobs: purity >= 0.99 across a sweep of
    spawn thresholds."""
    rng = np.random.default_rng(4)
    centers = np.eye(3) * 10
    vals, labs = [], []
    for d in range(3):
        vals.append(centers[d] + 0.2 * rng.standard_normal((100, 3)))
        labs.extend([d] * 100)
    order = rng.permutation(300)
    acts = ActivationSet(values=np.concatenate(vals)[order],
                         labels=np.array(labs)[order])
    for delta in (0.05, 0.15, 0.3, 0.6):
        rep, _ = cluster_layer(acts, d_pca=3, distance_threshold=delta)
        assert rep.purity >= 0.99, f"delta={delta}: purity {rep.purity}"


def test_cluster_layer_unlabeled():
    rng = np.random.default_rng(5)
    acts = ActivationSet(values=rng.standard_normal((40, 4)))
    rep, assignments = cluster_layer(acts, d_pca=4)
    assert rep is None
    assert len(assignments) == 40


def test_layer_sweep_rows():
    rng = np.random.default_rng(6)
    sets = [ActivationSet(values=rng.standard_normal((30, 4)) + 5,
                          labels=np.zeros(30, dtype=int), layer=i + 1)
            for i in range(3)]
    rows = layer_sweep(sets, d_pca=4)
    assert [r[0] for r in rows] == [1, 2, 3]
    with pytest.raises(ValueError):
        layer_sweep([])


def test_lact_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    vals = rng.standard_normal((25, 6)).astype(np.float32)
    labs = rng.integers(0, 5, 25)
    p = tmp_path / "acts.lact"
    write_activations(p, 3, vals, labs)
    back = read_activations(p)
    assert back.layer == 3
    assert np.array_equal(back.values, vals)  # bit-identical
    assert np.array_equal(back.labels, labs)


def test_lact_unlabeled_roundtrip(tmp_path):
    vals = np.ones((4, 2), dtype=np.float32)
    p = tmp_path / "u.lact"
    write_activations(p, 0, vals)
    back = read_activations(p)
    assert back.labels is None


def test_lact_format_errors(tmp_path):
    p = tmp_path / "bad.lact"
    p.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(FormatError, match="offset 0"):
        read_activations(p)
    p.write_bytes(b"LACT" + b"\x00\x00")
    with pytest.raises(FormatError, match="truncated"):
        read_activations(p)
    # wrong version
    import struct
    p.write_bytes(b"LACT" + struct.pack("<4I", 9, 0, 0, 0))
    with pytest.raises(FormatError, match="version"):
        read_activations(p)
    # truncated payload
    good = tmp_path / "good.lact"
    write_activations(good, 0, np.ones((3, 2), dtype=np.float32))
    data = good.read_bytes()
    p.write_bytes(data[:-2])
    with pytest.raises(FormatError, match="expected"):
        read_activations(p)
