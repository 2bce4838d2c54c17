import io

import numpy as np
import pytest

from decenopt.graph import (MixingMatrix, Topology, build_topology, lazy_metropolis_weights,
                            read_edge_list, spectral_quantities, validate_mixing,
                            write_edge_list, write_weights_csv)

SUITE = [
    build_topology("complete", 3),
    build_topology("complete", 4),
    build_topology("ring", 4),
    build_topology("ring", 9),
    build_topology("path", 2),
    build_topology("path", 7),
    build_topology("grid", 12, rows=3, cols=4),
    build_topology("exponential", 10),
]


def test_complete3_edges():
    t = build_topology("complete", 3)
    assert t.edges == frozenset({(0, 1), (0, 2), (1, 2)})


def test_ring4_edges():
    t = build_topology("ring", 4)
    assert t.edges == frozenset({(0, 1), (1, 2), (2, 3), (0, 3)})


def test_exponential10_neighbor_offsets():
    # offsets 2^j for j=0..3, folded mod 10 and deduplicated: {1,2,4,6,8,9}
    expected = set()
    for j in range(4):
        expected |= {2 ** j % 10, (-2 ** j) % 10}
    expected.discard(0)
    t = build_topology("exponential", 10)
    for i in range(10):
        offs = {(nb - i) % 10 for nb in t.neighbors(i)}
        assert offs == expected
        assert len(t.neighbors(i)) == 6


def test_build_errors():
    with pytest.raises(ValueError):
        build_topology("ring", 0)
    with pytest.raises(ValueError):
        build_topology("grid", 10, rows=3, cols=4)
    with pytest.raises(ValueError):
        build_topology("grid", 12)
    with pytest.raises(ValueError):
        build_topology("custom", 4, edges=[(0, 1), (2, 3)])  # disconnected
    with pytest.raises(ValueError):
        build_topology("custom", 3, edges=[(0, 5)])
    with pytest.raises(ValueError):
        build_topology("nonsense", 3)


def test_custom_drops_self_loops():
    t = build_topology("custom", 3, edges=[(0, 0), (0, 1), (1, 0), (1, 2)])
    assert t.edges == frozenset({(0, 1), (1, 2)})


def test_lazy_metropolis_path2():
    w = lazy_metropolis_weights(build_topology("path", 2))
    assert np.array_equal(w.entries, np.array([[0.75, 0.25], [0.25, 0.75]]))


def test_lazy_metropolis_complete3():
    w = lazy_metropolis_weights(build_topology("complete", 3)).entries
    off = np.array([w[0, 1], w[0, 2], w[1, 2]])
    assert np.allclose(off, 1 / 6, atol=1e-15)
    assert np.allclose(np.diag(w), 2 / 3, atol=1e-15)


def test_lazy_metropolis_path3():
    # degrees (1, 2, 1): edge weights 1/3 -> lazy 1/6; end diagonals 5/6, middle 2/3
    w = lazy_metropolis_weights(build_topology("path", 3)).entries
    assert w[0, 1] == pytest.approx(1 / 6, abs=1e-15)
    assert w[1, 2] == pytest.approx(1 / 6, abs=1e-15)
    assert w[0, 0] == pytest.approx(5 / 6, abs=1e-15)
    assert w[2, 2] == pytest.approx(5 / 6, abs=1e-15)
    assert w[1, 1] == pytest.approx(2 / 3, abs=1e-15)
    assert w[0, 2] == 0.0


def test_single_node():
    w = lazy_metropolis_weights(build_topology("complete", 1))
    assert np.array_equal(w.entries, np.array([[1.0]]))
    assert w.lam == 0.0


@pytest.mark.parametrize("topo", SUITE, ids=lambda t: f"{t.kind}{t.n}")
def test_mixing_invariants(topo):
    mix = lazy_metropolis_weights(topo)
    w = mix.entries
    n = topo.n
    assert np.abs(w.sum(axis=1) - 1.0).max() <= 1e-12
    assert np.abs(w.sum(axis=0) - 1.0).max() <= 1e-12
    assert (np.diag(w) > 0).all()
    assert (w >= 0).all()
    assert np.array_equal(w, w.T)
    # zero wherever the topology has no edge
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in topo.edges:
                assert w[i, j] == 0.0
    assert np.abs(w @ np.ones(n) - 1.0).max() <= 1e-12
    assert np.abs(np.ones(n) @ w - 1.0).max() <= 1e-12
    assert 0.0 <= mix.lam < 1.0
    assert validate_mixing(w).ok


def test_spectral_exact_averaging_matrix():
    for n in (2, 5, 9):
        lam, gap = spectral_quantities(np.full((n, n), 1.0 / n))
        assert lam == 0.0 and gap == 1.0


def test_spectral_path2_half():
    # eigenvalues of [[.75,.25],[.25,.75]] are {1, 0.5}
    lam, gap = spectral_quantities(lazy_metropolis_weights(build_topology("path", 2)).entries)
    assert lam == pytest.approx(0.5, abs=1e-12)
    assert gap == pytest.approx(0.5, abs=1e-12)


def test_spectral_permutation_invariance():
    rng = np.random.default_rng(42)
    w = lazy_metropolis_weights(build_topology("exponential", 10)).entries
    lam, _ = spectral_quantities(w)
    for _ in range(5):
        perm = rng.permutation(10)
        pw = w[np.ix_(perm, perm)]
        lam_p, _ = spectral_quantities(pw)
        assert lam_p == pytest.approx(lam, abs=1e-12)


def test_spectral_nonsquare_rejected():
    with pytest.raises(ValueError):
        spectral_quantities(np.ones((2, 3)))
    with pytest.raises(ValueError):
        validate_mixing(np.ones((2, 3)))


def test_validate_identity_fails_primitivity():
    rep = validate_mixing(np.eye(2))
    assert not rep.primitive
    assert rep.positive_diagonal and rep.rows_stochastic and rep.cols_stochastic
    assert not rep.ok


def test_validate_antidiagonal_fails_positive_diagonal():
    rep = validate_mixing(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not rep.positive_diagonal
    assert not rep.ok


def test_validate_ring4_passes():
    rep = validate_mixing(lazy_metropolis_weights(build_topology("ring", 4)).entries)
    assert rep.ok


@pytest.mark.parametrize("topo", SUITE, ids=lambda t: f"{t.kind}{t.n}")
def test_contraction_property(topo):
    # ||W x - J x|| <= lambda ||x - J x|| for the Kronecker-lifted mix
    mix = lazy_metropolis_weights(topo)
    rng = np.random.default_rng(7)
    p = 3
    for _ in range(100):
        X = rng.normal(size=(topo.n, p))
        Xbar = X.mean(axis=0)
        lhs = np.linalg.norm(mix.entries @ X - Xbar)
        rhs = mix.lam * np.linalg.norm(X - Xbar)
        assert lhs <= rhs + 1e-9


def test_edge_list_roundtrip():
    t = build_topology("grid", 6, rows=2, cols=3)
    buf = io.StringIO()
    write_edge_list(t, buf)
    back = read_edge_list(io.StringIO(buf.getvalue()))
    assert back.n == t.n
    assert back.edges == t.edges


def test_edge_list_file_roundtrip(tmp_path):
    t = build_topology("ring", 5)
    path = tmp_path / "ring.edges"
    write_edge_list(t, str(path))
    text = path.read_text().splitlines()
    assert text[0] == "5"
    assert read_edge_list(str(path)).edges == t.edges


def test_edge_list_parse_errors():
    with pytest.raises(ValueError):
        read_edge_list(io.StringIO(""))
    with pytest.raises(ValueError):
        read_edge_list(io.StringIO("abc\n"))
    with pytest.raises(ValueError):
        read_edge_list(io.StringIO("3\n0 1 2\n"))


def test_weights_csv_roundtrip(tmp_path):
    w = lazy_metropolis_weights(build_topology("ring", 4)).entries
    path = tmp_path / "w.csv"
    write_weights_csv(w, str(path))
    rows = [[float(v) for v in line.split(",")] for line in path.read_text().splitlines()]
    assert np.array_equal(np.array(rows), w)


def test_topology_validates_on_construction():
    with pytest.raises(ValueError):
        Topology(kind="custom", n=4, edges=frozenset({(0, 1)}))  # disconnected
    with pytest.raises(ValueError):
        Topology(kind="custom", n=2, edges=frozenset({(1, 0)}))  # non-canonical


def test_mixing_matrix_spectral_gap():
    mix = lazy_metropolis_weights(build_topology("path", 2))
    assert isinstance(mix, MixingMatrix)
    assert mix.spectral_gap == pytest.approx(0.5, abs=1e-12)
