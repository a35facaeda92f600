import math

import numpy as np
import pytest

from otmlab.nets import (
    _axis_values,
    build_kraus_net,
    build_qubit_net,
    cardinality_bounds,
    NET_CSV_COLUMNS,
    round_into_U,
    sample_contraction,
    sample_qubit_element,
    sample_two_local_outcome,
    separable_net,
    svd_clamp,
    two_local_net,
    write_net_csv,
)
from otmlab.quantum import assemble_two_local, PovmElement


def _opnorm_herm(x):
    return float(np.abs(np.linalg.eigvalsh(x)).max())


def _opnorm(x):
    return float(np.linalg.norm(x, 2))


def _random_u_element(rng):
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, _ = np.linalg.qr(g)
    return (q * rng.random(2)) @ q.conj().T


def test_axis_values_spacing_and_coverage():
    spacing = 0.25 * math.sqrt(2.0)
    axis = _axis_values(math.sqrt(2.0), spacing)
    assert axis.size == int(math.floor(2.0 / 0.25)) + 1
    assert np.allclose(np.diff(axis), spacing)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-math.sqrt(2.0), math.sqrt(2.0), size=200):
        assert np.abs(axis - x).min() <= spacing / 2.0 + 1e-12


def test_axis_values_degenerate_single_point():
    axis = _axis_values(2.0, 3.0 * math.sqrt(2.0))
    assert axis.size == 1
    assert axis[0] == pytest.approx(0.0)


def test_round_into_U_fixed_points():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = _random_u_element(rng)
        assert np.abs(round_into_U(x).matrix - x).max() < 1e-12
    assert np.allclose(round_into_U(2.0 * np.eye(2)).matrix, np.eye(2))
    assert np.allclose(round_into_U(-np.eye(2)).matrix, np.zeros((2, 2)))


def test_round_into_U_is_operator_norm_projection():
    # clamping beats any sampled element of U, up to numerical slack
    rng = np.random.default_rng(1)
    for _ in range(10):
        y = rng.normal(size=(2, 2)) * 2.0
        y = y + y.T
        best = _opnorm_herm(round_into_U(y).matrix - y)
        for _ in range(50):
            assert best <= _opnorm_herm(_random_u_element(rng) - y) + 1e-9


def test_round_into_U_rejects_bad_input():
    with pytest.raises(ValueError):
        round_into_U(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        round_into_U(np.eye(3))


def test_build_qubit_net_delta_one():
    net = build_qubit_net(1.0)
    assert net.grid_params.shape == (81, 4)
    assert net.point_index.shape == (81,)
    assert len(net) <= 81
    for p in net.points:
        eig = np.linalg.eigvalsh(p.matrix)
        assert eig.min() >= -1e-10 and eig.max() <= 1.0 + 1e-10
    # the trace maps every grid point to the member it rounded to
    for i in range(81):
        a, d, rb, ib = net.grid_params[i]
        rounded = round_into_U(np.array([[a, rb + 1j * ib], [rb - 1j * ib, d]])).matrix
        assert np.abs(net.points[net.point_index[i]].matrix - rounded).max() < 1e-12


def test_build_qubit_net_cardinality_boundary():
    net = build_qubit_net(0.25)
    assert net.grid_params.shape[0] == (2 / 0.25 + 1) ** 4 == 6561
    assert len(net) <= 6561


def test_build_qubit_net_grid_cap():
    with pytest.raises(ValueError):
        build_qubit_net(0.03)  # 67^4 > 10^7
    with pytest.raises(ValueError):
        build_qubit_net(0.0)
    with pytest.raises(ValueError):
        build_qubit_net(1.5)


def test_qubit_net_snap_covering_radius():
    net = build_qubit_net(0.25)
    rng = np.random.default_rng(7)
    for _ in range(300):
        x = _random_u_element(rng)
        i = net.snap_index(x)
        d_snap = _opnorm_herm(net.points[i].matrix - x)
        assert d_snap <= 4.0 * 0.25 + 1e-12
        j = net.nearest_index(x, method="brute")
        assert _opnorm_herm(net.points[j].matrix - x) <= d_snap + 1e-12


def test_qubit_net_nearest_rejects_unknown_method():
    net = build_qubit_net(1.0)
    with pytest.raises(ValueError):
        net.nearest_index(np.eye(2), method="fancy")


def test_separable_net_index_space():
    spec = separable_net(2, 1.0)
    assert spec.qubit_net.delta == pytest.approx(0.125)
    base = len(spec.qubit_net)
    assert spec.size == base ** 2
    assert spec.log2_size == pytest.approx(2 * math.log2(base))
    assert spec.log2_size <= cardinality_bounds(2, 1.0)["separable_log2"]
    idx = 12345 % spec.size
    factors = spec.factors_at(idx)
    assembled = spec.point(idx)
    oracle = np.kron(factors[0].matrix, factors[1].matrix)
    assert np.abs(assembled.matrix - oracle).max() < 1e-12
    with pytest.raises(ValueError):
        spec.factors_at(spec.size)


def test_separable_net_materialize_guards():
    with pytest.raises(ValueError):
        separable_net(2, 1.0).materialize()  # 17^8 elements
    with pytest.raises(ValueError):
        separable_net(4, 1.0).materialize()  # m > 3
    small = separable_net(1, 1.0)
    pts = small.materialize()
    assert len(pts) == small.size
    assert all(isinstance(p, PovmElement) for p in pts)


def test_separable_net_covering_telescopes():
    spec = separable_net(2, 1.0)
    rng = np.random.default_rng(11)
    for _ in range(100):
        factors = [_random_u_element(rng) for _ in range(2)]
        idx = spec.covering_index(factors)
        snapped = spec.factors_at(idx)
        for f, s in zip(factors, snapped):
            assert _opnorm_herm(s.matrix - f) <= 4.0 * spec.qubit_net.delta + 1e-12
        target = np.kron(factors[0], factors[1])
        assert _opnorm_herm(spec.point(idx).matrix - target) <= spec.mu + 1e-12
    with pytest.raises(ValueError):
        spec.covering_index(factors[:1])


def test_separable_net_argument_guards():
    with pytest.raises(ValueError):
        separable_net(0, 1.0)
    with pytest.raises(ValueError):
        separable_net(2, 1.25)


def test_svd_clamp_behaviour():
    rng = np.random.default_rng(4)
    x = sample_contraction(rng)
    assert svd_clamp(x) is x  # identity on contractions, bit for bit
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    assert np.abs(svd_clamp(2.0 * q) - q).max() < 1e-12
    big = rng.normal(size=(4, 4)) * 5.0
    assert _opnorm(svd_clamp(big)) <= 1.0 + 1e-12
    # projection optimality against sampled contractions
    for _ in range(50):
        assert _opnorm(svd_clamp(big) - big) <= _opnorm(sample_contraction(rng) - big) + 1e-9


def test_build_kraus_net_overflow_contract():
    with pytest.raises(ValueError, match="subsample"):
        build_kraus_net(1.0)
    with pytest.raises(ValueError):
        build_kraus_net(1.0, subsample=10)  # rng required
    with pytest.raises(ValueError):
        build_kraus_net(0.0)
    rng = np.random.default_rng(9)
    net = build_kraus_net(1.0, subsample=40, rng=rng)
    assert net.subsampled
    assert len(net.points) == 40
    for p in net.points:
        assert _opnorm(p) <= 1.0 + 1e-12


def test_build_kraus_net_tiny_grid_materializes():
    net = build_kraus_net(3.0)
    assert not net.subsampled
    assert len(net.points) == 1
    assert np.allclose(net.points[0], np.zeros((4, 4)))
    assert net.log2_size == 0.0


def test_kraus_net_snap_covering_radius():
    rng = np.random.default_rng(13)
    net = build_kraus_net(0.1, subsample=5, rng=rng)
    axis = net.axis
    for _ in range(100):
        x = sample_contraction(rng)
        y = net.snap(x)
        assert _opnorm(y - x) <= 8.0 * 0.1 + 1e-12
        assert _opnorm(y) <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        net.snap(np.eye(2))
    # snapping a grid-aligned contraction leaves its parameters on the grid
    vals = axis[np.abs(axis) <= 0.2]
    aligned = np.diag(vals[:1].repeat(4) if vals.size else np.zeros(4))
    snapped = net.snap(aligned)
    for entry in snapped.ravel():
        assert np.abs(axis - entry.real).min() < 1e-9 or _opnorm(snapped) <= 1.0


def test_two_local_net_structure():
    spec = two_local_net(2, 1, 1.0)
    assert spec.kraus_net.delta == pytest.approx(1.0 / 16.0)
    assert spec.pairings == [((0, 1),)]
    n = spec.kraus_net.axis.size
    assert n == int(math.floor(2.0 * math.sqrt(2.0) * 16.0)) + 1 == 46
    assert spec.log2_size == pytest.approx(32.0 * math.log2(46))
    assert len(two_local_net(4, 1, 1.0).pairings) == 3


def test_two_local_net_argument_guards():
    for bad in [(3, 1, 1.0), (0, 1, 1.0), (2, 0, 1.0), (2, 1, 2.0)]:
        with pytest.raises(ValueError):
            two_local_net(*bad)


def test_two_local_log2_size_below_closed_form():
    for m in (2, 4):
        for d in (1, 2):
            for mu in (1.0, 0.5, 0.25):
                spec = two_local_net(m, d, mu)
                bound = cardinality_bounds(m, mu, d=d)["two_local_log2"]
                assert spec.log2_size <= bound


def test_two_local_covering_map():
    rng = np.random.default_rng(17)
    for d in (1, 2):
        spec = two_local_net(2, d, 1.0)
        for _ in range(20):
            t = sample_two_local_outcome(2, d, rng)
            snapped = spec.covering_map(t)
            assert snapped.m == t.m and snapped.d == t.d
            for lay, slay in zip(t.layers, snapped.layers):
                assert slay.pairing == lay.pairing
            a = assemble_two_local(t).matrix
            b = assemble_two_local(snapped).matrix
            assert _opnorm_herm(b - a) <= spec.mu + 1e-12
    with pytest.raises(ValueError):
        spec.covering_map(sample_two_local_outcome(4, 1, rng))


def test_two_local_sample_point_is_valid_member():
    rng = np.random.default_rng(19)
    spec = two_local_net(4, 2, 0.5)
    t = spec.sample_point(rng)
    assert t.m == 4 and t.d == 2
    for layer in t.layers:
        assert tuple(layer.pairing) in [tuple(p) for p in spec.pairings]
        for f in layer.factors:
            assert _opnorm(f) <= 1.0 + 1e-12


def test_cardinality_bounds_values():
    out = cardinality_bounds(1, 1.0)
    assert out["separable_log2"] == pytest.approx(4.0 * math.log2(9.0))
    # halving mu raises the separable log2 bound by exactly 4m
    for m in (1, 2, 5):
        a = cardinality_bounds(m, 1.0)["separable_log2"]
        b = cardinality_bounds(m, 0.5)["separable_log2"]
        assert b - a == pytest.approx(4.0 * m)
    two = cardinality_bounds(2, 0.5, d=3)
    assert two["two_local_log2"] == pytest.approx(
        16.0 * 2 * 3 * math.log2(24.0 * 3 * 2 ** (17.0 / 16.0) / 0.5))
    with pytest.raises(ValueError):
        cardinality_bounds(2, 1.5)
    with pytest.raises(ValueError):
        cardinality_bounds(0, 1.0)
    with pytest.raises(ValueError):
        cardinality_bounds(2, 1.0, d=0)


def test_cardinality_bounds_envelopes():
    env = {"gamma": 16.0, "k": 16, "theta": 1.0, "phi": 1.0}
    ok = cardinality_bounds(16, 1.0, d=4, envelope=env)
    assert ok["envelope_separable_log2"] == pytest.approx(16.0 * 16 ** 2)
    assert ok["envelope_separable_holds"]
    assert ok["envelope_two_local_log2"] == pytest.approx(16.0 * 16 ** 3)
    assert ok["envelope_two_local_holds"]
    tight = cardinality_bounds(16, 2.0 ** -200, envelope=env)
    assert not tight["envelope_separable_holds"]


def test_sample_helpers_land_in_their_sets():
    rng = np.random.default_rng(23)
    for _ in range(50):
        x = sample_qubit_element(rng)
        eig = np.linalg.eigvalsh(x.matrix)
        assert eig.min() >= -1e-12 and eig.max() <= 1.0 + 1e-12
        assert _opnorm(sample_contraction(rng)) <= 1.0 + 1e-12


def test_net_csv_round_trip(tmp_path):
    rows = [dict(zip(NET_CSV_COLUMNS, [1, "", 1.0, 0.25, 12.68, 11.2, 0.71, 1000, 42]))]
    path = tmp_path / "net.csv"
    write_net_csv(path, rows)
    import csv as _csv
    with open(path) as fh:
        got = list(_csv.DictReader(fh))
    assert got[0]["m"] == "1" and got[0]["covering_radius_p99"] == "0.71"
    assert list(got[0]) == NET_CSV_COLUMNS
