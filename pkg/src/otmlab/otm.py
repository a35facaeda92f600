r"""Ideal-bit one-time memories built from leaky string OTMs, and the
security accounting that relates the two.

A leaky string OTM stores a pair of ell-bit strings (s, t) and leaks a
measurement outcome Z to the adversary; the models here are simulations
that expose exact posteriors P(s, t | Z=M).  The ideal-bit wrapper programs
two single bits (a0, a1) by rejection-sampling s in F^{-1}(a0) and t in
G^{-1}(a1) for a pair of r-wise independent hashes, so the adversary's
knowledge of the bit pair (F(S), G(T)) is governed by hash-averaged
exponential sums.

Security is measured per adversary outcome M through a choice bit C and a
smoothing event E produced by the min-entropy splitting machinery: with
the convention that C = c marks the pair whose *first* member (s when
c = 0, t when c = 1) is the hidden, high-entropy string,

    Q_c(M) = E(1_E (-1)^{A_c} | C=c, Z=M),   A_0 = F(S), A_1 = G(T),
    R_c(M) = E(1_E (-1)^{A_0 + A_1} | C=c, Z=M),

and the distance of (A_C, given the revealed bit) from uniform obeys the
exact 2x2 Fourier identity l1 = max(|Q|, |R|) <= |Q| + |R|.  Over the hash
family, Q_c is a linear form and R_c a bilinear form in r-wise independent
signs, so the moment tail bounds from `tails` control both; aggregating
over outcomes and adding the smoothing and negligible-outcome losses gives
the closed-form bound

    4*2^{-delta0 k} + 2*2^{-eps0 k} + 2*2^{-(alpha/8) k}
        + 4 (r+1) * 2^{-(alpha/6) k}.

Outcomes below the non-negligibility threshold are assigned C = 0 by
convention and flagged; outcomes failing the alpha*k entropy hypothesis
are flagged and carry no security numbers.
"""

import csv
import json
import math

import mpmath
import numpy as np

from .entropy import entropy_split, joint_cond_dist
from .hashfam import HashFunction, sample_hash
from .quantum import PovmElement, is_delta_non_negligible, norms, tensor
from .tails import (
    clopper_pearson_upper,
    crayfish_bound,
    kite_bound,
)

MAX_REJECTIONS = 10 ** 6
PREIMAGE_SCAN_LIMIT = 1 << 20
IDENTITY_TOL = 1e-9
BOUND_DPS = 50


class DegenerateHashError(ValueError):
    """Raised when a requested hash value has an empty preimage."""


class ReductionParams:
    """Scalar parameters of the ideal-bit reduction, validated together.

    Derived quantities are fixed by the primitive inputs: eta0 = alpha/8,
    delta = 2^{-delta0 k}, eps = 2^{-eps0 k}, eta = 2^{-eta0 k}, tau =
    delta, r = 4 ceil((gamma+1) k^{2 theta}) (exponent 2 theta + phi in
    depth mode), mu = 2^{-(alpha/6) k} delta^4 / 4^m and lam =
    2^{-(alpha/6) k} * 2 r.  log2 companions are kept for regimes where
    the plain floats underflow.

    Parameters
    ----------
    k : security parameter (positive int)
    ell : string length, ell >= k
    theta : device-size exponent, >= 1; k <= m <= k^theta
    delta0, eps0 : positive decay rates for delta and eps
    alpha : entropy rate (may be math.inf for limiting algebra)
    gamma : positive envelope constant
    m : device qubit count, defaults to k
    phi, d : depth-mode exponent and depth (required iff depth_mode)
    depth_mode : selects the deeper-circuit variant of r and the envelope
    """

    def __init__(self, k, ell, theta, delta0, alpha, eps0, gamma,
                 m=None, phi=None, d=None, depth_mode=False):
        if int(k) != k or k < 1:
            raise ValueError("k=%r must be a positive integer" % (k,))
        if int(ell) != ell or ell < k:
            raise ValueError("ell=%r must be an integer >= k=%d" % (ell, k))
        if theta < 1.0:
            raise ValueError("theta=%r must be >= 1" % (theta,))
        if m is None:
            m = k
        if int(m) != m or not (k <= m <= k ** theta + 1e-9):
            raise ValueError("m=%r must be an integer with k <= m <= k^theta" % (m,))
        if not (alpha > 0):
            raise ValueError("alpha=%r must be positive" % (alpha,))
        for name, val in (("delta0", delta0), ("eps0", eps0), ("gamma", gamma)):
            if not (val > 0):
                raise ValueError("%s=%r must be positive" % (name, val))
        if depth_mode:
            if phi is None or not (phi > 0):
                raise ValueError("depth mode requires phi > 0, got %r" % (phi,))
            if d is None or int(d) != d or d < 1:
                raise ValueError("depth mode requires a positive integer depth d, got %r" % (d,))
        self.k = int(k)
        self.ell = int(ell)
        self.m = int(m)
        self.theta = float(theta)
        self.delta0 = float(delta0)
        self.eps0 = float(eps0)
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.phi = None if phi is None else float(phi)
        self.d = None if d is None else int(d)
        self.depth_mode = bool(depth_mode)
        self.eta0 = self.alpha / 8.0
        exponent = 2.0 * self.theta + (self.phi if depth_mode else 0.0)
        self.r = 4 * math.ceil((self.gamma + 1.0) * self.k ** exponent)
        self.delta = 2.0 ** (-self.delta0 * self.k)
        self.eps = 2.0 ** (-self.eps0 * self.k)
        self.eta = 2.0 ** (-self.eta0 * self.k)
        self.tau = self.delta
        self.mu_log2 = -(self.alpha / 6.0) * self.k - 4.0 * self.delta0 * self.k - 2.0 * self.m
        self.mu = 2.0 ** self.mu_log2
        self.lam_log2 = -(self.alpha / 6.0) * self.k + 1.0 + math.log2(self.r)
        self.lam = 2.0 ** self.lam_log2

    def as_dict(self):
        return {"k": self.k, "ell": self.ell, "m": self.m, "theta": self.theta,
                "delta0": self.delta0, "eps0": self.eps0, "alpha": self.alpha,
                "eta0": self.eta0, "gamma": self.gamma, "phi": self.phi,
                "d": self.d, "depth_mode": self.depth_mode, "r": self.r,
                "delta": self.delta, "eps": self.eps, "eta": self.eta,
                "tau": self.tau, "mu": self.mu, "mu_log2": self.mu_log2,
                "lam": self.lam, "lam_log2": self.lam_log2}

    def __repr__(self):
        return ("ReductionParams(k=%d, ell=%d, m=%d, theta=%g, alpha=%g, r=%d%s)"
                % (self.k, self.ell, self.m, self.theta, self.alpha, self.r,
                   ", depth" if self.depth_mode else ""))


def _log2_add(a, b):
    """log2(2^a + 2^b) without leaving log space."""
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log2(1.0 + 2.0 ** (lo - hi))


def theorem_bound(params, depth_mode=None):
    """The closed-form security bound and its four terms.

    Evaluates 4*2^{-delta0 k} + 2*2^{-eps0 k} + 2*2^{-(alpha/8) k} +
    4 (r+1) 2^{-(alpha/6) k} exactly (values and log2s), along with the
    lambda threshold, the net-cardinality log2 the union bound pays for,
    and whether the gamma k^{2 theta (+ phi)} envelope dominates it.

    Parameters
    ----------
    params : ReductionParams
    depth_mode : optional bool; must agree with params.depth_mode if given

    Returns
    -------
    dict with terms, terms_log2, total, total_log2, r, lam, net_log2,
    envelope_log2, envelope_holds, depth_mode
    """
    if depth_mode is not None and bool(depth_mode) != params.depth_mode:
        raise ValueError("depth_mode=%r disagrees with params (depth_mode=%r); "
                         "rebuild the parameters" % (depth_mode, params.depth_mode))
    k = params.k
    terms_log2 = {
        "delta_term": 2.0 - params.delta0 * k,
        "eps_term": 1.0 - params.eps0 * k,
        "eta_term": 1.0 - (params.alpha / 8.0) * k,
        "tail_term": 2.0 + math.log2(params.r + 1) - (params.alpha / 6.0) * k,
    }
    terms = {name: 2.0 ** lg for name, lg in terms_log2.items()}
    total = math.fsum(terms.values())
    total_log2 = -math.inf
    for lg in terms_log2.values():
        total_log2 = _log2_add(total_log2, lg)
    if params.depth_mode:
        net_log2 = 16.0 * params.m * params.d * (
            math.log2(24.0 * params.d * params.m ** (17.0 / 16.0)) - params.mu_log2)
        envelope_log2 = params.gamma * k ** (2.0 * params.theta + params.phi)
    else:
        net_log2 = 4.0 * params.m * (math.log2(9.0 * params.m) - params.mu_log2)
        envelope_log2 = params.gamma * k ** (2.0 * params.theta)
    return {
        "terms": terms,
        "terms_log2": terms_log2,
        "total": total,
        "total_log2": total_log2,
        "r": params.r,
        "lam": params.lam,
        "lam_log2": params.lam_log2,
        "net_log2": net_log2,
        "envelope_log2": envelope_log2,
        "envelope_holds": net_log2 <= envelope_log2,
        "depth_mode": params.depth_mode,
    }


def q_tail_bound(r, collision, lam):
    """Hash-averaged tail of the linear form: Pr(|Q_c(M)| >= lam) when the
    smoothed conditional masses square-sum to at most `collision`.

    This is the r-th-moment bound 2 e^{1/(6r)} sqrt(pi r)
    (collision * r / (e lam^2))^{r/2}.
    """
    return kite_bound(r, collision, lam)


def r_tail_bound(r, collision, lam):
    """Hash-averaged tail of the bilinear form: Pr(|R_c(M)| >= lam) <=
    8 e^{1/(3r)} sqrt(pi r) (8 * collision * r^2 / (e^2 lam^2))^{r/4}."""
    if int(r) != r or r < 4 or r % 4 != 0:
        raise ValueError("r=%r must be a positive multiple of 4" % (r,))
    if collision < 0:
        raise ValueError("collision=%r must be nonnegative" % (collision,))
    if lam <= 0:
        raise ValueError("lam=%r must be positive" % (lam,))
    if collision == 0:
        return 0.0
    with mpmath.workdps(BOUND_DPS):
        r_ = mpmath.mpf(r)
        log = (mpmath.log(8) + 1 / (3 * r_) + mpmath.log(mpmath.pi * r_) / 2
               + (r_ / 4) * (mpmath.log(8 * mpmath.mpf(collision)) + 2 * mpmath.log(r_)
                             - 2 - 2 * mpmath.log(mpmath.mpf(lam))))
        value = mpmath.e ** log
        return float(value) if value < mpmath.mpf(10) ** 300 else math.inf


class LeakyOtmModel:
    """Interface for a leaky string OTM storing ell-bit strings (s, t).

    Implementations expose a finite advertised outcome set with exact
    posteriors and a self-certified min-entropy per outcome.
    """

    ell = None

    def program(self, s, t):
        raise NotImplementedError

    def honest_read(self, which):
        """The stored string: which=0 reads s, which=1 reads t."""
        raise NotImplementedError

    def outcome_set(self, delta):
        """Tokens of every advertised delta-non-negligible outcome."""
        raise NotImplementedError

    def conditional_joint(self, outcome):
        """Exact P(s, t | Z=outcome) as a (2^ell, 2^ell) array."""
        raise NotImplementedError

    def outcome_probability(self, outcome):
        raise NotImplementedError

    def certified_entropy(self, outcome):
        """A proven lower bound on H_inf(S, T | Z=outcome)."""
        raise NotImplementedError

    def _check_strings(self, s, t):
        n = 1 << self.ell
        for name, v in (("s", s), ("t", t)):
            if int(v) != v or not (0 <= v < n):
                raise ValueError("%s=%r outside {0,...,%d}" % (name, v, n - 1))


class ClassicalLeakSim(LeakyOtmModel):
    """String OTM that leaks a fixed subset of the interleaved bits.

    The 2*ell physical bit positions alternate [s_0, t_0, s_1, t_1, ...];
    the adversary learns the values at `positions` (by default the first
    floor(beta * 2 ell) of them) and nothing else, so each outcome is one
    of the 2^{|J|} leak values, every outcome has probability 2^{-|J|},
    the posterior is uniform over consistent completions, and
    H_inf(S, T | Z) = 2 ell - |J| exactly (no smoothing needed).
    """

    def __init__(self, ell, beta, positions=None):
        if int(ell) != ell or not (1 <= ell <= 12):
            raise ValueError("ell=%r outside the desk-scale range 1..12" % (ell,))
        if not (0.0 <= beta <= 1.0):
            raise ValueError("beta=%r outside [0, 1]" % (beta,))
        self.ell = int(ell)
        self.beta = float(beta)
        count = int(math.floor(beta * 2 * ell))
        if positions is None:
            positions = tuple(range(count))
        else:
            positions = tuple(sorted(int(p) for p in positions))
            if len(set(positions)) != len(positions):
                raise ValueError("leak positions repeat")
            if positions and not (0 <= positions[0] and positions[-1] < 2 * ell):
                raise ValueError("leak positions outside 0..%d" % (2 * ell - 1))
            if len(positions) != count:
                raise ValueError("got %d positions for |J| = floor(beta*2*ell) = %d"
                                 % (len(positions), count))
        self.positions = positions
        self._s_bits = [p // 2 for p in positions if p % 2 == 0]
        self._t_bits = [p // 2 for p in positions if p % 2 == 1]
        self._stored = None

    @property
    def leak_count(self):
        return len(self.positions)

    def program(self, s, t):
        self._check_strings(s, t)
        self._stored = (int(s), int(t))

    def honest_read(self, which):
        if self._stored is None:
            raise ValueError("device is not programmed")
        if which not in (0, 1):
            raise ValueError("which=%r must be 0 (read s) or 1 (read t)" % (which,))
        return self._stored[which]

    def leak_value(self, s, t):
        """The outcome token this (s, t) pair would produce."""
        self._check_strings(s, t)
        v = 0
        for i, p in enumerate(self.positions):
            bit = (s >> (p // 2)) & 1 if p % 2 == 0 else (t >> (p // 2)) & 1
            v |= bit << i
        return v

    def outcome_set(self, delta):
        if not (0.0 < delta <= 1.0):
            raise ValueError("delta=%r outside (0, 1]" % (delta,))
        # every leak value has probability exactly 1/#outcomes
        return list(range(1 << self.leak_count))

    def _consistency_masks(self, outcome):
        n = 1 << self.ell
        xs = np.arange(n)
        mask_s = np.ones(n, dtype=bool)
        mask_t = np.ones(n, dtype=bool)
        for i, p in enumerate(self.positions):
            bit = (outcome >> i) & 1
            which = mask_s if p % 2 == 0 else mask_t
            which &= ((xs >> (p // 2)) & 1) == bit
        return mask_s, mask_t

    def conditional_joint(self, outcome):
        if not (0 <= outcome < (1 << self.leak_count)):
            raise ValueError("outcome %r outside the advertised set" % (outcome,))
        mask_s, mask_t = self._consistency_masks(outcome)
        table = np.outer(mask_s, mask_t).astype(float)
        return table / table.sum()

    def outcome_probability(self, outcome):
        if not (0 <= outcome < (1 << self.leak_count)):
            raise ValueError("outcome %r outside the advertised set" % (outcome,))
        return 2.0 ** (-self.leak_count)

    def certified_entropy(self, outcome):
        return 2.0 * self.ell - self.leak_count

    def __repr__(self):
        return "ClassicalLeakSim(ell=%d, beta=%g, leaked=%d)" % (
            self.ell, self.beta, self.leak_count)


_KET = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
_HAD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


class WiesnerToyOtm(LeakyOtmModel):
    """Conjugate-coding string OTM on m qubits (ell = m).

    Qubit i carries bit s_i in the computational basis and bit t_i in the
    Hadamard basis as the even mixture rho_i = (|s_i><s_i| + H|t_i><t_i|H)/2,
    so the average state is maximally mixed.  The adversary measures the
    supplied POVM (default: all computational-basis projectors); posteriors
    come from the Born rule with the uniform 4^{-ell} prior, and the
    per-outcome min-entropy is computed, not assumed.
    """

    def __init__(self, m, povm=None):
        if int(m) != m or not (1 <= m <= 3):
            raise ValueError("m=%r outside the desk-scale range 1..3" % (m,))
        self.m = int(m)
        self.ell = int(m)
        dim = 1 << self.m
        if povm is None:
            povm = [PovmElement(np.diag(np.eye(dim)[x])) for x in range(dim)]
        else:
            povm = [p if isinstance(p, PovmElement) else PovmElement(p) for p in povm]
            total = sum(p.matrix for p in povm)
            if np.abs(total - np.eye(dim)).max() > IDENTITY_TOL:
                raise ValueError("POVM elements do not sum to the identity")
        self.povm = povm
        self._states = {}
        n = 1 << self.ell
        for s in range(n):
            for t in range(n):
                factors = []
                for i in range(self.m):
                    si, ti = (s >> i) & 1, (t >> i) & 1
                    comp = np.outer(_KET[si], _KET[si])
                    had = _HAD @ np.outer(_KET[ti], _KET[ti]) @ _HAD
                    factors.append(0.5 * (comp + had))
                rho = factors[0]
                for f in factors[1:]:
                    rho = tensor(rho, f)
                self._states[(s, t)] = rho
        self._stored = None

    def average_state(self):
        dim = 1 << self.m
        return np.eye(dim) / dim

    def program(self, s, t):
        self._check_strings(s, t)
        self._stored = (int(s), int(t))

    def honest_read(self, which):
        if self._stored is None:
            raise ValueError("device is not programmed")
        if which not in (0, 1):
            raise ValueError("which=%r must be 0 (read s) or 1 (read t)" % (which,))
        return self._stored[which]

    def born_joint(self, element):
        """Posterior P(s, t | outcome `element`) and the outcome probability.

        Accepts any PovmElement (or matrix) on the m qubits, advertised or
        not; rejects elements of zero total mass.
        """
        mat = element.matrix if isinstance(element, PovmElement) else np.asarray(element)
        n = 1 << self.ell
        table = np.empty((n, n))
        for (s, t), rho in self._states.items():
            table[s, t] = max(float(np.trace(mat @ rho).real), 0.0)
        prior = 4.0 ** (-self.ell)
        prob = table.sum() * prior
        if prob <= 0.0:
            raise ValueError("outcome has zero probability on the average state")
        return table / table.sum(), prob

    def outcome_set(self, delta):
        if not (0.0 < delta <= 1.0):
            raise ValueError("delta=%r outside (0, 1]" % (delta,))
        avg = self.average_state()
        return [i for i, p in enumerate(self.povm)
                if is_delta_non_negligible(p, avg, delta)]

    def conditional_joint(self, outcome):
        return self.born_joint(self.povm[outcome])[0]

    def outcome_probability(self, outcome):
        return self.born_joint(self.povm[outcome])[1]

    def certified_entropy(self, outcome):
        return -math.log2(self.conditional_joint(outcome).max())

    def __repr__(self):
        return "WiesnerToyOtm(m=%d, outcomes=%d)" % (self.m, len(self.povm))


class IdealBitOtm:
    """A two-bit ideal OTM built over a leaky string OTM.

    F and G are hash functions over the inner model's string length; the
    bits are stored as a0 = F(s), a1 = G(t) for rejection-sampled strings.
    """

    def __init__(self, F, G, inner):
        if not isinstance(F, HashFunction) or not isinstance(G, HashFunction):
            raise ValueError("F and G must be HashFunctions")
        if F.field.ell != inner.ell or G.field.ell != inner.ell:
            raise ValueError("hash domain 2^%d/2^%d does not match model ell=%d"
                             % (F.field.ell, G.field.ell, inner.ell))
        self.F = F
        self.G = G
        self.inner = inner
        self.programmed = None
        self.s = None
        self.t = None
        self.rejections = None

    def read_bit(self, which):
        """Honest read: recover a0 (which=0) or a1 (which=1) exactly."""
        x = self.inner.honest_read(which)
        return self.F(x) if which == 0 else self.G(x)

    def __repr__(self):
        return "IdealBitOtm(ell=%d, programmed=%r)" % (self.inner.ell, self.programmed)


def _has_preimage(h, bit):
    n = 1 << h.field.ell
    if n > PREIMAGE_SCAN_LIMIT:
        return True  # too large to scan; the rejection cap handles it
    return any(h(x) == bit for x in range(n))


def program_ideal(otm, a0, a1, rng):
    """Program (a0, a1) into the ideal-bit OTM by rejection sampling.

    Draws s uniformly until F(s) = a0, then t until G(t) = a1, programs
    the inner model, and records the total number of rejected draws.

    Parameters
    ----------
    otm : IdealBitOtm
    a0, a1 : bits
    rng : numpy.random.Generator supplying the draw stream

    Returns
    -------
    the same IdealBitOtm, programmed

    Raises
    ------
    DegenerateHashError if a requested preimage is empty (detected by a
    full scan at desk scale, or by exceeding 10^6 rejections).
    """
    if a0 not in (0, 1) or a1 not in (0, 1):
        raise ValueError("programmed values must be bits, got (%r, %r)" % (a0, a1))
    n = 1 << otm.inner.ell
    strings = []
    rejections = 0
    for h, bit, name in ((otm.F, a0, "F"), (otm.G, a1, "G")):
        if not _has_preimage(h, bit):
            raise DegenerateHashError("degenerate-hash: %s never takes the value %d" % (name, bit))
        while True:
            x = int(rng.integers(0, n))
            if h(x) == bit:
                strings.append(x)
                break
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise DegenerateHashError("degenerate-hash: %s rejected %d draws for value %d"
                                          % (name, rejections, bit))
    otm.s, otm.t = strings
    otm.inner.program(otm.s, otm.t)
    otm.programmed = (int(a0), int(a1))
    otm.rejections = rejections
    return otm


def hash_signs(h, npoints):
    """(-1)^{h(x)} for x = 0..npoints-1, as a float array."""
    if isinstance(h, HashFunction):
        return np.array([1.0 - 2.0 * h(x) for x in range(npoints)])
    arr = np.asarray(h, dtype=float)
    if arr.shape != (npoints,):
        raise ValueError("expected %d sign entries, got shape %r" % (npoints, arr.shape))
    if not np.all(np.abs(arr) == 1.0):
        raise ValueError("sign table entries must be +-1")
    return arr


def compute_Q_R(P, F, G, C, E):
    """The exact security functionals for one outcome.

    Parameters
    ----------
    P : (n, n) array, P(s, t | Z=M)
    F, G : HashFunctions (or +-1 sign tables of length n)
    C : (n, n) array, Pr(C=1 | s, t); C = c hides s (c=0) or t (c=1)
    E : event weights in [0, 1]: shape (2, n, n) for per-c weights, or
        (n, n) to share one table across both c

    Returns
    -------
    dict with pr_c (Pr(C=c | Z=M)), Q and R (each a length-2 list indexed
    by c); a c of zero probability yields exactly 0.0 for both.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be a square joint table, got shape %r" % (P.shape,))
    n = P.shape[0]
    C = np.asarray(C, dtype=float)
    if C.shape != (n, n):
        raise ValueError("C table shape %r does not match P" % (C.shape,))
    if (C < 0).any() or (C > 1).any():
        raise ValueError("C entries must lie in [0, 1]")
    E = np.asarray(E, dtype=float)
    if E.shape == (n, n):
        E = np.stack([E, E])
    if E.shape != (2, n, n):
        raise ValueError("E must have shape (n, n) or (2, n, n), got %r" % (E.shape,))
    if (E < 0).any() or (E > 1).any():
        raise ValueError("event weights must lie in [0, 1]")
    sF = hash_signs(F, n)
    sG = hash_signs(G, n)
    pc = [float((P * (1.0 - C)).sum()), float((P * C).sum())]
    q_out = [0.0, 0.0]
    r_out = [0.0, 0.0]
    for c in (0, 1):
        weight = P * (C if c == 1 else (1.0 - C)) * E[c]
        if pc[c] <= 0.0:
            continue
        sign_hidden = sF[:, None] if c == 0 else sG[None, :]
        q_out[c] = float((weight * sign_hidden).sum()) / pc[c]
        r_out[c] = float((weight * sF[:, None] * sG[None, :]).sum()) / pc[c]
    return {"pr_c": pc, "Q": q_out, "R": r_out}


def hummingbird_distance(P):
    """Exact distance-from-uniform data of a smoothed 2x2 bit-pair table.

    P[a, b] >= 0 with total at most 1, rows indexed by the hidden bit.
    Returns the Fourier coefficients Q = sum (-1)^a P[a,b] and R =
    sum (-1)^{a+b} P[a,b] and the exact l1 distance between P and
    (uniform hidden bit) x (marginal of the other), which equals
    (|Q+R| + |Q-R|)/2 = max(|Q|, |R|) and is never above |Q| + |R|.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2):
        raise ValueError("expected a 2x2 table, got shape %r" % (P.shape,))
    if (P < -1e-12).any() or P.sum() > 1.0 + 1e-9:
        raise ValueError("entries must be nonnegative with total at most 1")
    q = float(P[0, 0] + P[0, 1] - P[1, 0] - P[1, 1])
    r = float(P[0, 0] - P[0, 1] - P[1, 0] + P[1, 1])
    l1 = float(np.abs(P[0] - P[1]).sum())
    assert abs(l1 - max(abs(q), abs(r))) < 1e-12
    assert l1 <= abs(q) + abs(r) + 1e-12
    return {"l1": l1, "Q": q, "R": r}


def _split_outcome(P, alpha_k, eta):
    """Run the min-entropy split on one outcome's posterior.

    Returns the C table in the hidden-string convention (Pr(C=1 | s, t),
    C = c hides s for c=0 / t for c=1), per-c event weight tables, the
    certificate, and the kept event probability.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    cond = joint_cond_dist(P[None, :, :], [1.0])
    split = entropy_split(cond, alpha_k, 0.0, eta)
    q_split = split["C"][:, :, 0]           # Pr(C_split=1), C_split=0 iff s heavy
    q_hidden = 1.0 - q_split                # Pr(C=1) with C=c hiding sigma_c
    ev = split["certificate"]["event"]      # rows: (z, C_split=0), (z, C_split=1)
    w0 = ev[1, :n]                          # hidden s weights (C_split=1 <-> c=0)
    w1 = ev[0, n:]                          # hidden t weights
    E = np.stack([np.repeat(w0[:, None], n, axis=1),
                  np.repeat(w1[None, :], n, axis=0)])
    return {
        "C": q_hidden,
        "E": E,
        "certificate": split["certificate"],
        "event_probability": split["certificate"]["event_probability"],
        "collision_log2": -split["certificate"]["value"],
    }


class SecurityReport:
    """Per-outcome and aggregated security numbers for one evaluated OTM."""

    def __init__(self, delta, hypothesis_level, rows, aggregated_l1, direct_l1,
                 bound, certified_mass, unadvertised_mass, violations, params):
        self.delta = delta
        self.hypothesis_level = hypothesis_level
        self.rows = rows
        self.aggregated_l1 = aggregated_l1
        self.direct_l1 = direct_l1
        self.bound = bound
        self.certified_mass = certified_mass
        self.unadvertised_mass = unadvertised_mass
        self.violations = violations
        self.params = params

    def to_json(self):
        doc = {
            "delta": self.delta,
            "hypothesis_level": self.hypothesis_level,
            "aggregated_l1": self.aggregated_l1,
            "direct_l1": self.direct_l1,
            "bound": self.bound,
            "certified_mass": self.certified_mass,
            "unadvertised_mass": self.unadvertised_mass,
            "negligible_convention": "C=0",
            "hypothesis_violations": self.violations,
            "params": self.params,
            "outcomes": self.rows,
        }
        return json.dumps(doc, indent=2, default=float)

    def csv_rows(self):
        out = []
        for row in self.rows:
            out.append({
                "outcome": row["outcome"],
                "probability": row["probability"],
                "entropy": row["entropy"],
                "pr_c0": row["pr_c"][0],
                "pr_c1": row["pr_c"][1],
                "Q0": row["Q"][0], "Q1": row["Q"][1],
                "R0": row["R"][0], "R1": row["R"][1],
                "l1_c0": row["l1"][0], "l1_c1": row["l1"][1],
                "l1_weighted": row["l1_weighted"],
                "smoothing_deficit": row["smoothing_deficit"],
                "flags": ";".join(row["flags"]),
            })
        return out


SECURITY_CSV_COLUMNS = ["outcome", "probability", "entropy", "pr_c0", "pr_c1",
                        "Q0", "Q1", "R0", "R1", "l1_c0", "l1_c1", "l1_weighted",
                        "smoothing_deficit", "flags"]


def write_security_csv(path, report):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SECURITY_CSV_COLUMNS)
        writer.writeheader()
        for row in report.csv_rows():
            writer.writerow(row)


def evaluate_security(otm, delta, params):
    """Evaluate the ideal-bit security of a programmed or blank OTM.

    For every advertised 2*delta-non-negligible outcome M that meets the
    alpha*k entropy hypothesis: split off (C, E), compute Q_c(M), R_c(M),
    and the per-c 2x2 distance; aggregate the l1 numbers two independent
    ways (per-outcome Fourier identities, and a direct scan of the full
    (A_C, A_{1-C}, C, Z) table).  Outcomes failing the hypothesis are
    flagged and excluded from the aggregation, which then conditions on
    the certified set.

    Parameters
    ----------
    otm : IdealBitOtm
    delta : the non-negligibility parameter (outcomes advertised at 2*delta)
    params : ReductionParams (supplies alpha, k, eta and the bound terms)

    Returns
    -------
    SecurityReport
    """
    model = otm.inner
    if not (0.0 < 2.0 * delta <= 1.0):
        raise ValueError("delta=%r leaves 2*delta outside (0, 1]" % (delta,))
    level = params.alpha * params.k
    outcomes = model.outcome_set(2.0 * delta)
    n = 1 << model.ell
    sF = hash_signs(otm.F, n)
    sG = hash_signs(otm.G, n)
    bitsF = ((1.0 - sF) / 2.0).astype(int)
    bitsG = ((1.0 - sG) / 2.0).astype(int)

    rows = []
    violations = []
    certified_mass = 0.0
    advertised_mass = 0.0
    weighted_l1 = []      # per-outcome aggregation path
    direct_abs = []       # independent direct-scan path
    for token in outcomes:
        prob = model.outcome_probability(token)
        advertised_mass += prob
        entropy = model.certified_entropy(token)
        if entropy < level - 1e-9:
            violations.append({"outcome": repr(token), "entropy": entropy})
            rows.append({"outcome": repr(token), "probability": prob,
                         "entropy": entropy, "pr_c": [None, None],
                         "Q": [None, None], "R": [None, None],
                         "l1": [None, None], "l1_weighted": None,
                         "smoothing_deficit": None,
                         "flags": ["hypothesis-violation"]})
            continue
        certified_mass += prob
        P = model.conditional_joint(token)
        art = _split_outcome(P, level, params.eta)
        qr = compute_Q_R(P, sF, sG, art["C"], art["E"])
        flags = []
        l1 = [0.0, 0.0]
        for c in (0, 1):
            if qr["pr_c"][c] <= 0.0:
                flags.append("bad-c%d" % c)
                continue
            # path one: the Fourier identity on the sign-weighted sums
            l1[c] = 0.5 * (abs(qr["Q"][c] + qr["R"][c]) + abs(qr["Q"][c] - qr["R"][c]))
            # path two: partition the joint into the 2x2 bit table and scan it
            table = np.zeros((2, 2))
            weight = P * (art["C"] if c == 1 else (1.0 - art["C"])) * art["E"][c]
            hidden_bits = bitsF[:, None] if c == 0 else bitsG[None, :]
            other_bits = bitsG[None, :] if c == 0 else bitsF[:, None]
            for a in (0, 1):
                for b in (0, 1):
                    table[a, b] = weight[(hidden_bits == a) & (other_bits == b)].sum()
            table /= qr["pr_c"][c]
            hb = hummingbird_distance(table)
            if abs(hb["Q"] - qr["Q"][c]) > 1e-9 or abs(hb["R"] - qr["R"][c]) > 1e-9:
                raise AssertionError("Fourier coefficients disagree with direct sums")
            direct_abs.append(prob * np.abs(table[0] - table[1]).sum() * qr["pr_c"][c])
        l1_weighted = sum(qr["pr_c"][c] * l1[c] for c in (0, 1))
        weighted_l1.append((prob, l1_weighted))
        rows.append({"outcome": repr(token), "probability": prob,
                     "entropy": entropy, "pr_c": qr["pr_c"],
                     "Q": qr["Q"], "R": qr["R"], "l1": l1,
                     "l1_weighted": l1_weighted,
                     "smoothing_deficit": 1.0 - art["event_probability"],
                     "flags": flags})
    if certified_mass <= 0.0:
        raise ValueError("no advertised outcome satisfies the entropy hypothesis")
    aggregated = math.fsum(p * v for p, v in weighted_l1) / certified_mass
    direct = math.fsum(direct_abs) / certified_mass
    return SecurityReport(
        delta=delta,
        hypothesis_level=level,
        rows=rows,
        aggregated_l1=aggregated,
        direct_l1=direct,
        bound=theorem_bound(params),
        certified_mass=certified_mass,
        unadvertised_mass=max(0.0, 1.0 - advertised_mass),
        violations=violations,
        params=params.as_dict(),
    )


def hash_bias_tail(model, delta, r, trials, rng, alpha_k, eta, lambda_grid=None):
    """Monte Carlo tail of max over outcomes of |Q_c|, |R_c| versus bounds.

    Fixes the model's per-outcome splits (C, E), then samples `trials`
    independent hash pairs (F, G) of independence r and records the
    maximum over certified (outcome, c) instances of |Q_c(M)| and
    |R_c(M)|.  Reports, per lambda: the empirical exceedance fraction and
    its 99% upper confidence limit, the sharp union bound summing the
    per-instance moment bounds at the true square-sums and matrix norms,
    and the uniform-collision union bound that replaces every instance by
    its certified 2^{-value} collision level.

    Parameters
    ----------
    model : LeakyOtmModel
    delta : outcome advertisement level
    r : hash family independence (multiple of 4, at most 2^ell)
    trials : number of (F, G) samples, >= 10^3 for reportable statistics
    rng : numpy.random.Generator
    alpha_k : entropy hypothesis level alpha*k
    eta : split smoothing budget
    lambda_grid : optional thresholds (default geometric 1/16 .. 2)

    Returns
    -------
    dict with lambdas, exceed counts/fractions/UCLs for Q, R and their
    max, union_bound_sharp, union_bound_theorem, instances, trials
    """
    if int(r) != r or r < 4 or r % 4 != 0:
        raise ValueError("r=%r must be a multiple of 4 (the bilinear bound splits it)" % (r,))
    if trials < 10 ** 3:
        raise ValueError("trials=%d below the reportable minimum 10^3" % (trials,))
    n = 1 << model.ell
    if lambda_grid is None:
        lambda_grid = np.geomspace(1.0 / 16.0, 2.0, 6)
    lambdas = np.asarray(lambda_grid, dtype=float)
    if (lambdas <= 0).any():
        raise ValueError("lambda grid must be positive")

    q_instances = []   # (weights vector, which hash) for linear forms
    r_instances = []   # V matrices for bilinear forms
    collision_log2s = []
    for token in model.outcome_set(min(1.0, 2.0 * delta)):
        if model.certified_entropy(token) < alpha_k - 1e-9:
            continue
        P = model.conditional_joint(token)
        art = _split_outcome(P, alpha_k, eta)
        collision_log2s.append(art["collision_log2"])
        for c in (0, 1):
            q_c = art["C"] if c == 1 else (1.0 - art["C"])
            pc = float((P * q_c).sum())
            if pc <= 0.0:
                continue
            weight = P * q_c * art["E"][c] / pc
            u = weight.sum(axis=1) if c == 0 else weight.sum(axis=0)
            q_instances.append((u, c))
            r_instances.append(weight)
    if not q_instances:
        raise ValueError("no certified outcome instances to sample")

    v_linear = [float((u ** 2).sum()) for u, _ in q_instances]
    frob_half = [math.sqrt(float((V ** 2).sum()) / 2.0) for V in r_instances]
    op_half = [float(np.linalg.norm(V, 2)) / 2.0 for V in r_instances]
    V_stack = np.stack(r_instances)

    max_q = np.empty(trials)
    max_r = np.empty(trials)
    for i in range(trials):
        sF = hash_signs(sample_hash(model.ell, r, rng), n)
        sG = hash_signs(sample_hash(model.ell, r, rng), n)
        best = 0.0
        for (u, c) in q_instances:
            val = abs(float(u @ (sF if c == 0 else sG)))
            if val > best:
                best = val
        max_q[i] = best
        max_r[i] = np.abs(np.einsum("s,kst,t->k", sF, V_stack, sG)).max()
    stat = np.maximum(max_q, max_r)

    out = {"lambdas": lambdas, "trials": trials, "r": r,
           "instances": len(r_instances),
           "collision_log2": max(collision_log2s),
           "exceed_q": [], "exceed_r": [], "exceed": [],
           "ucl_q": [], "ucl_r": [], "ucl": [],
           "union_bound_sharp": [], "union_bound_theorem": []}
    coll = 2.0 ** max(collision_log2s)
    for lam in lambdas:
        kq = int((max_q >= lam).sum())
        kr = int((max_r >= lam).sum())
        km = int((stat >= lam).sum())
        out["exceed_q"].append(kq / trials)
        out["exceed_r"].append(kr / trials)
        out["exceed"].append(km / trials)
        out["ucl_q"].append(clopper_pearson_upper(kq, trials))
        out["ucl_r"].append(clopper_pearson_upper(kr, trials))
        out["ucl"].append(clopper_pearson_upper(km, trials))
        sharp = math.fsum(kite_bound(r, v, lam) for v in v_linear)
        sharp += math.fsum(crayfish_bound(r // 2, f, o, lam)
                           for f, o in zip(frob_half, op_half))
        out["union_bound_sharp"].append(min(1.0, sharp))
        theorem = len(q_instances) * q_tail_bound(r, coll, lam) \
            + len(r_instances) * r_tail_bound(r, coll, lam)
        out["union_bound_theorem"].append(min(1.0, theorem))
    return out


def continuity_check(model, F, G, M, M_tilde, mu, tau, delta, alpha_k, eta):
    """Verify the perturbation lemmas on a concrete outcome pair.

    Hypotheses checked (and reported, never silently assumed): ||M|| = 1,
    ||M - M_tilde|| <= mu, M is 2*delta-non-negligible, 0 < delta <= 1/2,
    Tr(M) >= 1, and mu <= (2/3) delta 2^{-m}.  If all hold, the report
    carries: the non-negligibility of M_tilde at level delta; the split
    (C, E) computed on M_tilde's posterior and transferred to M (same C;
    E zeroed on every c with Pr(C=c | Z=M) < tau); Q_c/R_c for both
    outcomes; and the conclusions Pr(E | Z=M) >= Pr(E~ | Z=M~) - tau and,
    per c, either Q_c(M) = 0 exactly (bad c) or |Q_c(M) - Q_c(M~)| <=
    2 mu (2^m / (tau delta))^2 (and the same for R).

    Parameters
    ----------
    model : a quantum model exposing born_joint and average_state
    F, G : HashFunctions (or sign tables)
    M, M_tilde : PovmElements (or matrices) on the model's qubits
    mu, tau, delta : perturbation radius, bad-c threshold, negligibility
    alpha_k, eta : split level and smoothing budget

    Returns
    -------
    dict with hypothesis fields, hypothesis_ok, and (when ok) lemma5 and
    lemma6 conclusion fields
    """
    m = model.m
    mat = M.matrix if isinstance(M, PovmElement) else np.asarray(M, dtype=complex)
    mat_t = M_tilde.matrix if isinstance(M_tilde, PovmElement) else np.asarray(M_tilde, dtype=complex)
    avg = model.average_state()
    norm_m = norms(mat)["operator"]
    dist = norms(mat - mat_t)["operator"]
    hyp = {
        "norm": norm_m,
        "norm_one": abs(norm_m - 1.0) <= 1e-9,
        "distance": dist,
        "distance_ok": dist <= mu + 1e-12,
        "delta_range_ok": 0.0 < delta <= 0.5,
        "trace_ok": float(np.trace(mat).real) >= 1.0 - 1e-12,
        "M_2delta_non_negligible": is_delta_non_negligible(mat, avg, min(1.0, 2.0 * delta)),
        "mu_small_enough": mu <= (2.0 / 3.0) * delta * 2.0 ** (-m) + 1e-15,
    }
    report = {"hypotheses": hyp,
              "hypothesis_ok": all(v for k, v in hyp.items()
                                   if k not in ("norm", "distance"))}
    if not report["hypothesis_ok"]:
        return report

    report["m_tilde_delta_non_negligible"] = is_delta_non_negligible(mat_t, avg, delta)

    P_t, prob_t = model.born_joint(mat_t)
    art = _split_outcome(P_t, alpha_k, eta)
    qr_t = compute_Q_R(P_t, F, G, art["C"], art["E"])

    P_m, prob_m = model.born_joint(mat)
    pc_m = [float((P_m * (1.0 - art["C"])).sum()), float((P_m * art["C"]).sum())]
    bad = [pc_m[c] < tau for c in (0, 1)]
    E_m = art["E"].copy()
    for c in (0, 1):
        if bad[c]:
            E_m[c] = 0.0
    qr_m = compute_Q_R(P_m, F, G, art["C"], E_m)

    pr_e_t = float(sum((P_t * (art["C"] if c == 1 else 1.0 - art["C"]) * art["E"][c]).sum()
                       for c in (0, 1)))
    pr_e_m = float(sum((P_m * (art["C"] if c == 1 else 1.0 - art["C"]) * E_m[c]).sum()
                       for c in (0, 1)))
    qr_bound = 2.0 * mu * (2.0 ** m / (tau * delta)) ** 2
    per_c = []
    for c in (0, 1):
        entry = {"bad": bad[c], "pr_c_M": pc_m[c], "pr_c_M_tilde": qr_t["pr_c"][c]}
        if bad[c]:
            entry["Q_M"] = qr_m["Q"][c]
            entry["R_M"] = qr_m["R"][c]
            entry["ok"] = qr_m["Q"][c] == 0.0 and qr_m["R"][c] == 0.0
        else:
            entry["Q_delta"] = abs(qr_m["Q"][c] - qr_t["Q"][c])
            entry["R_delta"] = abs(qr_m["R"][c] - qr_t["R"][c])
            entry["bound"] = qr_bound
            entry["ok"] = entry["Q_delta"] <= qr_bound and entry["R_delta"] <= qr_bound
        per_c.append(entry)
    report.update({
        "Q_M": qr_m["Q"], "R_M": qr_m["R"],
        "Q_M_tilde": qr_t["Q"], "R_M_tilde": qr_t["R"],
        "pr_E_M": pr_e_m, "pr_E_M_tilde": pr_e_t,
        "event_lower_bound_ok": pr_e_m >= pr_e_t - tau - 1e-12,
        "bad_c_count": sum(bad),
        "qr_bound": qr_bound,
        "per_c": per_c,
        "outcome_probabilities": {"M": prob_m, "M_tilde": prob_t},
    })
    return report
