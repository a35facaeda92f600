r"""Concentration bounds for hash-derived sums, and Monte Carlo harnesses.

Closed forms
------------
For t-wise independent random signs (-1)^{H(x)} and real weights a_x with
v = sum a_x^2, the linear sum Y = sum_x a_x (-1)^{H(x)} satisfies, for even
t >= 2,

    Pr(|Y| >= lam) <= 2 e^{1/(6t)} sqrt(pi t) (v t / (e lam^2))^{t/2}.

For a symmetric real matrix A and a 2t-wise independent family, the
quadratic chaos S = sum_{x,y} A_{xy} ((-1)^{H(x)} (-1)^{H(y)} - delta_{xy})
satisfies

    Pr(|S| >= lam) <= 4 e^{1/(6t)} sqrt(pi t) (4 |A|_F^2 t / (e lam^2))^{t/2}
                      + 4 e^{1/(12t)} sqrt(2 pi t) (8 |A| t / (e lam))^t,

where both norms are of the entrywise absolute matrix.  For fully
independent signs the sharper one-sided bound

    Pr(S >= lam) <= exp(-(1/8) min{lam/|A|, lam^2/|A|_F^2})

applies.  All three are evaluated in extended precision (mpmath, 50
significant digits) before conversion to float, because the power terms
under/overflow doubles once t reaches the hundreds.

Monte Carlo
-----------
The empirical harnesses draw hash functions by sampling seed-bit matrices
and pushing them through the GF(2)-linear basis tables of the family
(`hashfam.basis_tables`), so millions of full hash evaluations reduce to a
few chunked BLAS products.  Frequencies come with one-sided 99%
Clopper-Pearson upper confidence limits: Monte Carlo cannot prove an
inequality, so domination is asserted against the confidence limit.
"""

import csv
import math

import mpmath
import numpy as np
from scipy.stats import beta as _beta_dist

from . import hashfam

MIN_TRIALS = 10 ** 4
CHUNK = 8192
BOUND_DPS = 50


class LinearInstance:
    """Real weights a_1..a_N for the linear sum Y; caches v = sum a_x^2."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d real array")
        if not np.isfinite(w).all():
            raise ValueError("weights contain non-finite values")
        w = w.copy()
        w.setflags(write=False)
        self.weights = w
        self.v = float((w ** 2).sum())

    @property
    def n(self):
        return self.weights.size

    def __repr__(self):
        return "LinearInstance(n=%d, v=%g)" % (self.n, self.v)


class QuadraticInstance:
    """Symmetric real matrix A for the chaos S; caches norms of entrywise |A|."""

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError("A must be a nonempty square matrix")
        if not np.isfinite(a).all():
            raise ValueError("A contains non-finite values")
        if not np.array_equal(a, a.T):
            raise ValueError("A must be exactly symmetric")
        a = a.copy()
        a.setflags(write=False)
        self.a = a
        abs_a = np.abs(a)
        self.abs_frobenius = float(np.linalg.norm(abs_a))
        self.abs_operator = float(np.linalg.norm(abs_a, 2)) if a.shape[0] > 1 else self.abs_frobenius

    @property
    def n(self):
        return self.a.shape[0]

    def __repr__(self):
        return "QuadraticInstance(n=%d, frob=%g, op=%g)" % (self.n, self.abs_frobenius, self.abs_operator)


def _check_t(t):
    if int(t) != t or t < 2 or t % 2 != 0:
        raise ValueError("independence parameter t=%r must be an even integer >= 2" % (t,))
    return int(t)


def _exp_float(log_value):
    # mpmath exponential of an mpf log, saturating to inf instead of raising
    val = mpmath.e ** log_value
    try:
        return float(val)
    except OverflowError:
        return math.inf


def _kite_log(t, v, lam):
    # natural log of the linear-sum bound; caller holds the workdps context
    lt = mpmath.mpf(t)
    return (mpmath.log(2) + 1 / (6 * lt) + mpmath.log(mpmath.pi * lt) / 2
            + (lt / 2) * (mpmath.log(v) + mpmath.log(lt) - 1 - 2 * mpmath.log(lam)))


def _crayfish_logs(t, frob, op, lam):
    # natural logs of the two chaos-bound terms; second is None when op = 0
    lt = mpmath.mpf(t)
    log1 = (mpmath.log(4) + 1 / (6 * lt) + mpmath.log(mpmath.pi * lt) / 2
            + (lt / 2) * (mpmath.log(4) + 2 * mpmath.log(frob) + mpmath.log(lt)
                          - 1 - 2 * mpmath.log(lam)))
    if op == 0:
        return log1, None
    log2 = (mpmath.log(4) + 1 / (12 * lt) + mpmath.log(2 * mpmath.pi * lt) / 2
            + lt * (mpmath.log(8) + mpmath.log(op) + mpmath.log(lt)
                    - 1 - mpmath.log(lam)))
    return log1, log2


def _check_kite_args(t, v, lam):
    t = _check_t(t)
    if lam < 0:
        raise ValueError("lam=%r must be nonnegative" % (lam,))
    if v < 0:
        raise ValueError("v=%r must be nonnegative" % (v,))
    return t


def _check_crayfish_args(t, frob, op, lam):
    t = _check_t(t)
    if lam < 0:
        raise ValueError("lam=%r must be nonnegative" % (lam,))
    if frob < 0 or op < 0:
        raise ValueError("norms must be nonnegative")
    if op > frob:
        raise ValueError("operator norm %r exceeds Frobenius norm %r (impossible "
                         "for an entrywise-absolute matrix)" % (op, frob))
    return t


def kite_bound(t, v, lam):
    """Two-sided tail bound for the linear sum under t-wise independence.

    Evaluates 2 e^{1/(6t)} sqrt(pi t) (v t / (e lam^2))^{t/2} exactly (50
    significant digits internally).

    Parameters
    ----------
    t : even integer >= 2, the independence order of the sign family
    v : sum of squared weights, >= 0
    lam : threshold, >= 0 (lam = 0 yields the vacuous bound inf)

    Returns
    -------
    float (may exceed 1, in which case the bound is vacuous)
    """
    t = _check_kite_args(t, v, lam)
    if lam == 0:
        return math.inf
    if v == 0:
        return 0.0
    with mpmath.workdps(BOUND_DPS):
        return _exp_float(_kite_log(t, v, lam))


def kite_bound_log2(t, v, lam):
    """log2 of `kite_bound`, exact in log space (-inf for v = 0).

    Magnitudes like 2^(+-10^4) arise in the theorem arithmetic; this variant
    never under- or overflows.
    """
    t = _check_kite_args(t, v, lam)
    if lam == 0:
        return math.inf
    if v == 0:
        return -math.inf
    with mpmath.workdps(BOUND_DPS):
        return float(_kite_log(t, v, lam) / mpmath.log(2))


def crayfish_bound(t, frob, op, lam):
    """Two-sided tail bound for the quadratic chaos.

    The caller must supply signs that are 2t-wise independent; the function
    evaluates the two-term closed form with |A|_F = frob and |A| = op (norms
    of the entrywise absolute matrix).

    Parameters
    ----------
    t : even integer >= 2
    frob, op : norms of the entrywise-absolute matrix; op <= frob always
        holds for such matrices and violations are rejected
    lam : threshold, >= 0 (lam = 0 yields the vacuous bound inf)

    Returns
    -------
    float
    """
    t = _check_crayfish_args(t, frob, op, lam)
    if lam == 0:
        return math.inf
    if frob == 0:
        return 0.0
    with mpmath.workdps(BOUND_DPS):
        log1, log2 = _crayfish_logs(t, frob, op, lam)
        total = mpmath.e ** log1
        if log2 is not None:
            total += mpmath.e ** log2
        try:
            return float(total)
        except OverflowError:
            return math.inf


def crayfish_bound_log2(t, frob, op, lam):
    """log2 of `crayfish_bound`, exact in log space (-inf for frob = 0)."""
    t = _check_crayfish_args(t, frob, op, lam)
    if lam == 0:
        return math.inf
    if frob == 0:
        return -math.inf
    with mpmath.workdps(BOUND_DPS):
        log1, log2 = _crayfish_logs(t, frob, op, lam)
        if log2 is None:
            total_log = log1
        else:
            hi, lo = (log1, log2) if log1 >= log2 else (log2, log1)
            total_log = hi + mpmath.log(1 + mpmath.e ** (lo - hi))
        return float(total_log / mpmath.log(2))


def hanson_wright_bound(lam, frob, op):
    """One-sided tail bound exp(-(1/8) min{lam/op, lam^2/frob^2}).

    Valid for fully independent signs; note this bounds Pr(S >= lam), not
    the two-sided tail.

    Parameters
    ----------
    lam : threshold, > 0
    frob, op : norms of the entrywise-absolute matrix, > 0

    Returns
    -------
    float in (0, 1]
    """
    if lam <= 0:
        raise ValueError("lam=%r must be positive" % (lam,))
    if frob <= 0 or op <= 0:
        raise ValueError("norms must be positive")
    return math.exp(-min(lam / op, lam ** 2 / frob ** 2) / 8.0)


def clopper_pearson_upper(k, n, confidence=0.99):
    """One-sided upper confidence limit for a binomial proportion."""
    if not (0 <= k <= n) or n < 1:
        raise ValueError("need 0 <= k <= n, n >= 1; got k=%r n=%r" % (k, n))
    if k >= n:
        return 1.0
    return float(_beta_dist.ppf(confidence, k + 1, n - k))


def default_lambda_grid(scale, points=16):
    """16 log-spaced thresholds spanning [0.1*scale, 10*scale]."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return np.geomspace(0.1 * scale, 10.0 * scale, points)


def _sign_chunks(ell, r, npoints, trials, rng, split=None):
    """Yield chunks of (-1)^{H(x)} sign matrices, shape (chunk, npoints).

    With split=None one hash drives all points; with split=k the first k
    columns come from one freshly sampled hash and the rest from a second,
    independent one (both r-wise, domains indexed from 0 within each block).
    """
    if split is None:
        blocks = [npoints]
    else:
        if not (0 < split < npoints):
            raise ValueError("split=%r must cut the index range (0, %d)" % (split, npoints))
        blocks = [split, npoints - split]
    for width in blocks:
        if width > (1 << ell):
            raise ValueError("instance needs %d domain points but 2^%d available" % (width, ell))
    nbits = r * ell
    basis = [hashfam.basis_tables(ell, r, range(w)).astype(np.float64) for w in blocks]
    done = 0
    while done < trials:
        c = min(CHUNK, trials - done)
        parts = []
        for b in basis:
            bits = rng.integers(0, 2, size=(c, nbits), dtype=np.uint8).astype(np.float64)
            parts.append(1.0 - 2.0 * ((bits @ b) % 2.0))
        yield np.hstack(parts) if len(parts) > 1 else parts[0]
        done += c


def _rademacher_chunks(npoints, trials, rng):
    done = 0
    while done < trials:
        c = min(CHUNK, trials - done)
        yield 1.0 - 2.0 * rng.integers(0, 2, size=(c, npoints)).astype(np.float64)
        done += c


def _tally(values_iter, lambda_grid, trials):
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("lambda grid must be a nonempty 1-d array")
    if (grid < 0).any():
        raise ValueError("lambda grid must be nonnegative")
    counts = np.zeros(grid.size, dtype=np.int64)
    signed_counts = np.zeros(grid.size, dtype=np.int64)
    total = 0.0
    total_sq = 0.0
    for vals in values_iter:
        counts += (np.abs(vals)[:, None] >= grid[None, :]).sum(axis=0)
        signed_counts += (vals[:, None] >= grid[None, :]).sum(axis=0)
        total += vals.sum()
        total_sq += (vals ** 2).sum()
    mean = total / trials
    var = max(total_sq / trials - mean ** 2, 0.0)
    return {
        "lambdas": grid,
        "freqs": counts / trials,
        "upper_cl_99": np.array([clopper_pearson_upper(int(k), trials) for k in counts]),
        "signed_freqs": signed_counts / trials,
        "signed_upper_cl_99": np.array([clopper_pearson_upper(int(k), trials) for k in signed_counts]),
        "trials": trials,
        "sample_mean": mean,
        "sample_std": math.sqrt(var),
    }


def empirical_tail_linear(inst, ell, r, lambda_grid, trials, rng):
    """Monte Carlo tail of |Y|, Y = sum_x a_x (-1)^{H(x)}, H r-wise.

    Parameters
    ----------
    inst : LinearInstance with at most 2^ell weights
    ell, r : hash family parameters (domain {0,1}^ell, independence r)
    lambda_grid : thresholds; frequency of |Y| >= lam is reported per entry
    trials : number of sampled hash functions, >= 10^4
    rng : numpy.random.Generator

    Returns
    -------
    dict with lambdas, freqs, upper_cl_99 (one-sided 99% Clopper-Pearson),
    signed variants for the one-sided tail of Y itself, trials,
    sample_mean, sample_std.
    """
    if not isinstance(inst, LinearInstance):
        inst = LinearInstance(inst)
    if trials < MIN_TRIALS:
        raise ValueError("trials=%d below the Monte Carlo floor %d" % (trials, MIN_TRIALS))
    if inst.n > (1 << ell):
        raise ValueError("instance has %d weights but domain holds 2^%d points" % (inst.n, ell))
    w = inst.weights

    def gen():
        for signs in _sign_chunks(ell, r, inst.n, trials, rng):
            yield signs @ w

    return _tally(gen(), lambda_grid, trials)


def empirical_tail_quadratic(inst, ell, r, lambda_grid, trials, rng, mode="hash", split=None):
    """Monte Carlo tail of |S|, S = sum_{x,y} A_{xy}(xi_x xi_y - delta_{xy}).

    Parameters
    ----------
    inst : QuadraticInstance, at most 2^ell rows (per block when split)
    ell, r : hash family parameters (ignored in "rademacher" mode)
    lambda_grid, trials, rng : as in empirical_tail_linear
    mode : "hash" draws xi = (-1)^{H(x)} from one r-wise hash;
        "rademacher" draws fully independent signs (for the exp-form bound)
    split : optional index k; in "hash" mode, signs for columns [0, k) and
        [k, n) come from two independently sampled hashes (the bilinear
        block structure used by the security reduction)

    Returns
    -------
    dict as in empirical_tail_linear; signed_* entries support one-sided
    assertions (the exp-form bound is one-sided).
    """
    if not isinstance(inst, QuadraticInstance):
        inst = QuadraticInstance(inst)
    if trials < MIN_TRIALS:
        raise ValueError("trials=%d below the Monte Carlo floor %d" % (trials, MIN_TRIALS))
    a = inst.a
    tr = float(np.trace(a))
    if mode == "hash":
        chunks = _sign_chunks(ell, r, inst.n, trials, rng, split=split)
    elif mode == "rademacher":
        if split is not None:
            raise ValueError("split only applies to hash mode")
        chunks = _rademacher_chunks(inst.n, trials, rng)
    else:
        raise ValueError("unknown mode %r" % (mode,))

    def gen():
        for signs in chunks:
            yield ((signs @ a) * signs).sum(axis=1) - tr

    return _tally(gen(), lambda_grid, trials)


def tail_csv_rows(result, bounds, bound_name, t, seed):
    """Pair a Monte Carlo result with closed-form bounds as CSV-ready rows."""
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != result["lambdas"].shape:
        raise ValueError("bounds shape %r does not match grid %r"
                         % (bounds.shape, result["lambdas"].shape))
    rows = []
    for i, lam in enumerate(result["lambdas"]):
        rows.append({
            "lambda": "%.17g" % lam,
            "empirical_freq": "%.17g" % result["freqs"][i],
            "upper_cl_99": "%.17g" % result["upper_cl_99"][i],
            "closed_form_bound": "%.17g" % bounds[i],
            "bound_name": bound_name,
            "t": str(t),
            "trials": str(result["trials"]),
            "seed": str(seed),
        })
    return rows


TAIL_CSV_COLUMNS = ["lambda", "empirical_freq", "upper_cl_99", "closed_form_bound",
                    "bound_name", "t", "trials", "seed"]


def write_tail_csv(path, rows):
    """Write rows from `tail_csv_rows` to a CSV file with the pinned columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TAIL_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
