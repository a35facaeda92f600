r"""Epsilon-net constructions for measurement-outcome sets.

Single-qubit elements U = {0 <= X <= I} are covered by a grid over the
ambient Hermitian box V = {X = X^dag, |X|_linf <= sqrt(2)} (4 real
parameters, spacing delta*sqrt(2)), with each grid point rounded into U by
eigenvalue clamping.  A grid point within half a spacing per axis is within
sqrt(3)*delta of X in operator norm, and clamping (the operator-norm
projection onto U) at most doubles that, so every X in U has a net point
within 4*delta: with delta = mu/(4m), tensoring m per-qubit nets and
telescoping gives a mu-net for separable outcomes with at most (9m/mu)^{4m}
points.

General 4x4 contractions {|X| <= 1} are covered the same way from the box
{|X|_linf <= 2} (32 real parameters), rounding by singular-value clamping;
the per-factor radius is 8*delta.  A depth-d 2-local net uses delta =
mu/(8dm): each layer is a tensor of m/2 factors (error 4m*delta per layer),
and M = K^dag K telescopes across 2d layer slots to 8dm*delta = mu, with
cardinality at most (24 d m^{17/16} / mu)^{16md}.

The 32-parameter grid is never materializable (even 2 points per axis is
2^32 elements), so nets are lazily indexed: cardinalities are exact counts
of the index space, membership queries go through the constructive
snap-to-grid map (O(1), lands on a net member by construction), and
experiments that want concrete far-apart points draw a flagged random
subsample of the index space.
"""

import csv
import itertools
import math

import numpy as np

from .quantum import PovmElement, SeparableOutcome, KrausLayer, TwoLocalOutcome

MAX_GRID_POINTS = 10 ** 7
QUBIT_BOX = math.sqrt(2.0)  # |X|_linf bound on the Hermitian ambient box
KRAUS_BOX = 2.0             # |X|_linf bound on the 4x4 ambient box


def _axis_values(half_width, spacing):
    """Centered grid on [-half_width, half_width]; consecutive values are
    `spacing` apart and every point of the interval is within spacing/2."""
    n = int(math.floor(2.0 * half_width / spacing)) + 1
    start = -half_width + (2.0 * half_width - (n - 1) * spacing) / 2.0
    return start + spacing * np.arange(n)


def _snap(values, x):
    """Nearest grid value (values ascending, uniformly spaced)."""
    i = int(np.clip(np.round((x - values[0]) / (values[1] - values[0])), 0, values.size - 1)) \
        if values.size > 1 else 0
    return i


def _herm2(a, d, b):
    return np.array([[a, b], [np.conj(b), d]], dtype=complex)


def _clamp01_herm2_batch(a, d, b):
    """Eigenvalue clamp of Hermitian 2x2 [[a, b], [conj(b), d]] into [0, I],
    vectorized over flat parameter arrays.  Returns (N, 2, 2) complex."""
    mean = (a + d) / 2.0
    half = (a - d) / 2.0
    rad = np.sqrt(half ** 2 + np.abs(b) ** 2)
    hi = np.clip(mean + rad, 0.0, 1.0)
    lo = np.clip(mean - rad, 0.0, 1.0)
    out = np.zeros(a.shape + (2, 2), dtype=complex)
    safe = rad > 1e-15
    # X = hi*P+ + lo*P-, with P+/- = (X - lam_-/+ I) / (lam_+ - lam_-)
    coef = np.where(safe, (hi - lo) / np.where(safe, 2.0 * rad, 1.0), 0.0)
    base = (hi + lo) / 2.0
    out[..., 0, 0] = base + coef * half
    out[..., 1, 1] = base - coef * half
    out[..., 0, 1] = coef * b
    out[..., 1, 0] = coef * np.conj(b)
    return out


def _opnorm2_batch(delta_mats):
    """Operator norms of a stack of Hermitian 2x2 matrices, analytically."""
    a = delta_mats[..., 0, 0].real
    d = delta_mats[..., 1, 1].real
    b = delta_mats[..., 0, 1]
    mean = (a + d) / 2.0
    rad = np.sqrt(((a - d) / 2.0) ** 2 + np.abs(b) ** 2)
    return np.maximum(np.abs(mean + rad), np.abs(mean - rad))


def round_into_U(x):
    """Round a Hermitian 2x2 matrix into U = {0 <= X <= I} by eigenvalue clamp.

    Clamping is the operator-norm projection onto U, so for any X within
    operator distance s of U the result stays within 2s of X -- the covering
    property the net constructions rely on.  Points already in U are fixed.

    Parameters
    ----------
    x : Hermitian 2x2 matrix (checked to 1e-10)

    Returns
    -------
    PovmElement
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix, got shape %r" % (x.shape,))
    if np.abs(x - x.conj().T).max() > 1e-10:
        raise ValueError("matrix is not Hermitian to 1e-10")
    out = _clamp01_herm2_batch(np.array(x[0, 0].real), np.array(x[1, 1].real),
                               np.array(x[0, 1]))
    return PovmElement(out)


class QubitNet:
    """Grid-plus-clamp net over single-qubit POVM elements.

    points are the deduplicated net members (all in U); grid_params and
    point_index record the construction trace (which grid point rounded to
    which member).  Covering radius in operator norm: 4*delta.
    """

    def __init__(self, delta, points, grid_params, point_index, axis):
        self.delta = delta
        self.points = points
        self.grid_params = grid_params
        self.point_index = point_index
        self.axis = axis

    def __len__(self):
        return len(self.points)

    def snap_index(self, x):
        """Index of the net member obtained by snapping x's four real
        parameters to the grid and clamping; O(1), and within 4*delta of x
        whenever x is in U."""
        x = np.asarray(x, dtype=complex)
        key = (self.axis[_snap(self.axis, x[0, 0].real)],
               self.axis[_snap(self.axis, x[1, 1].real)],
               self.axis[_snap(self.axis, x[0, 1].real)],
               self.axis[_snap(self.axis, x[0, 1].imag)])
        return self._param_lookup[key]

    def nearest_index(self, x, method="snap"):
        """Net index near x: "snap" is the constructive O(1) map, "brute"
        scans all members for the true operator-norm nearest."""
        if method == "snap":
            return self.snap_index(x)
        if method != "brute":
            raise ValueError("unknown method %r" % (method,))
        stack = np.stack([p.matrix for p in self.points])
        dists = _opnorm2_batch(stack - np.asarray(x, dtype=complex)[None])
        return int(np.argmin(dists))

    def __repr__(self):
        return "QubitNet(delta=%g, points=%d)" % (self.delta, len(self))


def build_qubit_net(delta):
    """Construct the delta-resolution single-qubit net.

    Parameters
    ----------
    delta : float in (0, 1]

    Returns
    -------
    QubitNet with at most (2/delta + 1)^4 members, each a valid POVM
    element; rejected if the raw grid would exceed 10^7 points.
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta=%r outside (0, 1]" % (delta,))
    axis = _axis_values(QUBIT_BOX, delta * math.sqrt(2.0))
    n = axis.size
    if n ** 4 > MAX_GRID_POINTS:
        raise ValueError("grid of %d points exceeds the 10^7 cap; increase delta" % n ** 4)
    aa, dd, rb, ib = [g.ravel() for g in np.meshgrid(axis, axis, axis, axis, indexing="ij")]
    clamped = _clamp01_herm2_batch(aa, dd, rb + 1j * ib)
    points = []
    point_index = np.empty(n ** 4, dtype=np.int64)
    seen = {}
    for i in range(n ** 4):
        key = np.round(clamped[i], 12).tobytes()
        j = seen.get(key)
        if j is None:
            j = len(points)
            seen[key] = j
            points.append(PovmElement(clamped[i]))
        point_index[i] = j
    grid_params = np.column_stack([aa, dd, rb, ib])
    net = QubitNet(delta, points, grid_params, point_index, axis)
    # snap lookup: grid parameter tuple -> deduplicated member index
    lookup = {}
    for i in range(n ** 4):
        lookup[(aa[i], dd[i], rb[i], ib[i])] = int(point_index[i])
    net._param_lookup = lookup
    return net


class SeparableNetSpec:
    """Lazy mu-net over m-qubit separable outcomes: the m-fold product of a
    per-qubit net at delta = mu/(4m)."""

    def __init__(self, m, mu, qubit_net):
        self.m = m
        self.mu = mu
        self.qubit_net = qubit_net

    @property
    def size(self):
        return len(self.qubit_net) ** self.m

    @property
    def log2_size(self):
        return self.m * math.log2(len(self.qubit_net))

    def factors_at(self, index):
        """Mixed-radix decode of a net index into per-qubit members."""
        if not (0 <= index < self.size):
            raise ValueError("index %d outside [0, %d)" % (index, self.size))
        base = len(self.qubit_net)
        out = []
        for _ in range(self.m):
            out.append(self.qubit_net.points[index % base])
            index //= base
        return out

    def point(self, index):
        return SeparableOutcome(self.factors_at(index)).assemble()

    def covering_index(self, factors, method="snap"):
        """Net index for the member nearest (per factor) to the given
        single-qubit factors; the telescoping bound keeps the assembled
        operator distance at or below mu."""
        if len(factors) != self.m:
            raise ValueError("expected %d factors, got %d" % (self.m, len(factors)))
        base = len(self.qubit_net)
        idx = 0
        for f in reversed(factors):
            mat = f.matrix if isinstance(f, PovmElement) else np.asarray(f, dtype=complex)
            idx = idx * base + self.qubit_net.nearest_index(mat, method=method)
        return idx

    def materialize(self, limit=MAX_GRID_POINTS):
        """All net members as PovmElements; desk-scale only (m <= 3)."""
        if self.m > 3:
            raise ValueError("full iteration supported only for m <= 3, got m=%d" % self.m)
        if self.size > limit:
            raise ValueError("materializing %d elements exceeds the cap %d" % (self.size, limit))
        return [self.point(i) for i in range(self.size)]

    def __repr__(self):
        return "SeparableNetSpec(m=%d, mu=%g, size=%d)" % (self.m, self.mu, self.size)


def separable_net(m, mu):
    """Lazy mu-net for m-qubit separable outcomes (per-qubit delta = mu/(4m)).

    Parameters
    ----------
    m : int >= 1
    mu : float in (0, 1]

    Returns
    -------
    SeparableNetSpec; its index-space size never exceeds (9m/mu)^{4m}.
    """
    if m < 1:
        raise ValueError("m=%d must be >= 1" % m)
    if not (0.0 < mu <= 1.0):
        raise ValueError("mu=%r outside (0, 1]" % (mu,))
    return SeparableNetSpec(m, mu, build_qubit_net(mu / (4.0 * m)))


def svd_clamp(x):
    """Round a 4x4 (or any) matrix into {|X| <= 1} by clamping singular
    values; the operator-norm projection, and the identity on contractions."""
    x = np.asarray(x, dtype=complex)
    u, s, vh = np.linalg.svd(x)
    if s.size and s[0] <= 1.0:
        return x
    return (u * np.clip(s, None, 1.0)) @ vh


class KrausNet:
    """Grid-plus-clamp net over 4x4 contractions, lazily indexed.

    The 32-real-parameter grid has axis_count^32 points, which is beyond
    materialization for every axis_count >= 2; log2_size is the exact index
    space size and `snap` is the constructive membership map.  `points` is
    either the full tiny net (axis_count = 1) or a flagged random subsample
    for statistics.
    """

    def __init__(self, delta, axis, points, subsampled):
        self.delta = delta
        self.axis = axis
        self.points = points
        self.subsampled = subsampled

    @property
    def log2_size(self):
        return 32.0 * math.log2(self.axis.size)

    def snap(self, x):
        """Snap each of the 32 real parameters to the grid, then clamp; the
        result is a net member within 8*delta of any contraction x."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (4, 4):
            raise ValueError("expected a 4x4 matrix, got shape %r" % (x.shape,))
        re = np.empty((4, 4))
        im = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                re[i, j] = self.axis[_snap(self.axis, x[i, j].real)]
                im[i, j] = self.axis[_snap(self.axis, x[i, j].imag)]
        return svd_clamp(re + 1j * im)

    def __repr__(self):
        return "KrausNet(delta=%g, axis=%d, log2_size=%g%s)" % (
            self.delta, self.axis.size, self.log2_size,
            ", subsampled" if self.subsampled else "")


def build_kraus_net(delta, subsample=None, rng=None):
    """Net over 4x4 operators of norm <= 1 at grid resolution delta.

    The raw grid has (floor(2*sqrt(2)/delta) + 1)^32 points; anything beyond
    10^7 is rejected unless `subsample` asks for that many randomly drawn
    members instead (the returned net is then flagged `subsampled`, and the
    lazy snap map still covers the whole index space).

    Parameters
    ----------
    delta : float > 0
    subsample : optional int, number of random members to draw
    rng : numpy.random.Generator, required with subsample

    Returns
    -------
    KrausNet
    """
    if delta <= 0:
        raise ValueError("delta=%r must be positive" % (delta,))
    axis = _axis_values(KRAUS_BOX, delta * math.sqrt(2.0))
    n = axis.size
    total_log2 = 32.0 * math.log2(n)
    if n ** 32 <= MAX_GRID_POINTS:
        combos = itertools.product(range(n), repeat=32)
        points = []
        for c in combos:
            vals = axis[np.array(c)]
            points.append(svd_clamp((vals[0::2] + 1j * vals[1::2]).reshape(4, 4)))
        return KrausNet(delta, axis, points, subsampled=False)
    if subsample is None:
        raise ValueError("grid of 2^%.1f points exceeds the 10^7 cap; pass "
                         "subsample= for a flagged statistical sample" % total_log2)
    if rng is None:
        raise ValueError("subsampling requires an rng")
    points = []
    for _ in range(int(subsample)):
        vals = axis[rng.integers(0, n, size=32)]
        points.append(svd_clamp((vals[0::2] + 1j * vals[1::2]).reshape(4, 4)))
    return KrausNet(delta, axis, points, subsampled=True)


def _perfect_matchings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _perfect_matchings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


class TwoLocalNetSpec:
    """Lazy mu-net over depth-d 2-local outcomes on m qubits.

    Per-layer index space: a perfect matching of the qubits times one Kraus
    net member per pair; d layers multiply.  delta = mu/(8dm).
    """

    def __init__(self, m, d, mu, kraus_net, pairings):
        self.m = m
        self.d = d
        self.mu = mu
        self.kraus_net = kraus_net
        self.pairings = pairings

    @property
    def log2_size(self):
        per_layer = math.log2(len(self.pairings)) + (self.m / 2) * self.kraus_net.log2_size
        return self.d * per_layer

    def covering_map(self, outcome):
        """Snap every 4x4 factor of a TwoLocalOutcome into the Kraus net,
        keeping the pairings; the result assembles to within mu (operator
        norm) of the input's assembly."""
        if outcome.m != self.m or outcome.d != self.d:
            raise ValueError("outcome shape (m=%d, d=%d) does not match net (m=%d, d=%d)"
                             % (outcome.m, outcome.d, self.m, self.d))
        layers = []
        for layer in outcome.layers:
            snapped = [self.kraus_net.snap(f) for f in layer.factors]
            layers.append(KrausLayer(layer.pairing, snapped))
        return TwoLocalOutcome(layers)

    def sample_point(self, rng):
        """A uniformly indexed net member, materialized as a TwoLocalOutcome."""
        axis = self.kraus_net.axis
        n = axis.size
        layers = []
        for _ in range(self.d):
            pairing = self.pairings[int(rng.integers(0, len(self.pairings)))]
            factors = []
            for _ in range(self.m // 2):
                vals = axis[rng.integers(0, n, size=32)]
                factors.append(svd_clamp((vals[0::2] + 1j * vals[1::2]).reshape(4, 4)))
            layers.append(KrausLayer(pairing, factors))
        return TwoLocalOutcome(layers)

    def __repr__(self):
        return "TwoLocalNetSpec(m=%d, d=%d, mu=%g, log2_size=%g)" % (
            self.m, self.d, self.mu, self.log2_size)


def two_local_net(m, d, mu):
    """Lazy mu-net for depth-d 2-local outcomes (Kraus delta = mu/(8dm)).

    Parameters
    ----------
    m : even int >= 2 (odd m is excluded, not padded)
    d : int >= 1
    mu : float in (0, 1]

    Returns
    -------
    TwoLocalNetSpec; its index-space log2-size never exceeds
    16 m d log2(24 d m^{17/16} / mu).
    """
    if m < 2 or m % 2 != 0:
        raise ValueError("m=%d must be even and >= 2" % m)
    if d < 1:
        raise ValueError("d=%d must be >= 1" % d)
    if not (0.0 < mu <= 1.0):
        raise ValueError("mu=%r outside (0, 1]" % (mu,))
    delta = mu / (8.0 * d * m)
    axis = _axis_values(KRAUS_BOX, delta * math.sqrt(2.0))
    kraus = KrausNet(delta, axis, points=None, subsampled=False)
    pairings = [tuple(p) for p in _perfect_matchings(list(range(m)))]
    return TwoLocalNetSpec(m, d, mu, kraus, pairings)


def cardinality_bounds(m, mu, d=None, envelope=None):
    """log2 of the closed-form net cardinality bounds, plus envelope checks.

    Parameters
    ----------
    m : qubit count
    mu : net radius, must satisfy mu <= 1 (the separable bound's proviso)
    d : optional depth; adds the 2-local bound
    envelope : optional dict with keys gamma, k, theta (and phi for the
        2-local case); adds the seed-length envelopes gamma*k^{2 theta}
        and gamma*k^{2 theta + phi} and whether they dominate the bounds

    Returns
    -------
    dict with separable_log2, optionally two_local_log2, and for each
    envelope the pair (envelope_*_log2, envelope_*_holds)
    """
    if not (0.0 < mu <= 1.0):
        raise ValueError("mu=%r outside (0, 1]" % (mu,))
    if m < 1:
        raise ValueError("m=%d must be >= 1" % m)
    out = {"separable_log2": 4.0 * m * math.log2(9.0 * m / mu)}
    if d is not None:
        if d < 1:
            raise ValueError("d=%d must be >= 1" % d)
        out["two_local_log2"] = 16.0 * m * d * math.log2(24.0 * d * m ** (17.0 / 16.0) / mu)
    if envelope is not None:
        gamma = envelope["gamma"]
        k = envelope["k"]
        theta = envelope["theta"]
        env_sep = gamma * k ** (2.0 * theta)
        out["envelope_separable_log2"] = env_sep
        out["envelope_separable_holds"] = out["separable_log2"] <= env_sep
        if d is not None and "phi" in envelope:
            env_two = gamma * k ** (2.0 * theta + envelope["phi"])
            out["envelope_two_local_log2"] = env_two
            out["envelope_two_local_holds"] = out["two_local_log2"] <= env_two
    return out


def sample_qubit_element(rng):
    """A random element of U: Haar-ish eigenbasis, eigenvalues uniform [0,1]."""
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, _ = np.linalg.qr(g)
    return PovmElement((q * rng.random(2)) @ q.conj().T)


def sample_contraction(rng):
    """A random 4x4 operator of norm <= 1 (singular values uniform [0,1])."""
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u, _, vh = np.linalg.svd(g)
    return (u * rng.random(4)) @ vh


def sample_two_local_outcome(m, d, rng):
    """A random TwoLocalOutcome: random pairings and random contractions."""
    pairings = [tuple(p) for p in _perfect_matchings(list(range(m)))]
    layers = []
    for _ in range(d):
        pairing = pairings[int(rng.integers(0, len(pairings)))]
        layers.append(KrausLayer(pairing, [sample_contraction(rng) for _ in range(m // 2)]))
    return TwoLocalOutcome(layers)


NET_CSV_COLUMNS = ["m", "d", "mu", "delta", "log2_bound", "log2_enumerated",
                   "covering_radius_p99", "samples", "seed"]


def write_net_csv(path, rows):
    """Write covering/cardinality experiment rows with the pinned columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=NET_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
