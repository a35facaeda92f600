r"""Dense complex-matrix quantum core.

States, POVM elements, tensor structure, matrix norms, the Born rule,
delta-non-negligibility of measurement outcomes, and the separable /
2-local-depth-d outcome representations used by the net and security
modules.  Everything is dense and desk-scale: operators live in dimension
at most 2^12, and 2-local assembly is capped at m <= 6 qubits.

All matrix-valued inputs may be passed either as raw numpy arrays or as the
wrapper types defined here; wrappers validate their defining constraints at
construction and are immutable afterwards.
"""

import json
import warnings

import numpy as np

MAX_TENSOR_DIM = 1 << 12
HERMITIAN_TOL = 1e-12
POVM_SPECTRUM_TOL = 1e-10
COMPLETENESS_TOL = 1e-9
ASSEMBLY_SPECTRUM_TOL = 1e-9
BORN_CLAMP_WARN = 1e-9
BORN_CLAMP_ERROR = 1e-6


class NumericalConsistencyError(ValueError):
    """A computed quantity violates a bound that holds exactly in theory."""


def _as_matrix(x):
    if isinstance(x, (DensityMatrix, PovmElement)):
        return x.matrix
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix, got shape %r" % (m.shape,))
    return m


def _hermitize(m):
    return (m + m.conj().T) / 2.0


class DensityMatrix:
    """A state: Hermitian, positive semidefinite, unit trace.

    Hermiticity is enforced to 1e-12 in entrywise l-inf, eigenvalues must be
    >= -1e-10, and the trace must be within 1e-12 of one.
    """

    def __init__(self, matrix):
        m = _as_matrix(matrix)
        if np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian to %g" % HERMITIAN_TOL)
        m = _hermitize(m)
        eig = np.linalg.eigvalsh(m)
        if eig.min() < -POVM_SPECTRUM_TOL:
            raise ValueError("density matrix has eigenvalue %g < -%g" % (eig.min(), POVM_SPECTRUM_TOL))
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > HERMITIAN_TOL:
            raise ValueError("density matrix trace %r is not 1 to %g" % (tr, HERMITIAN_TOL))
        self.matrix = m
        self.matrix.setflags(write=False)
        self.dim = m.shape[0]

    def __repr__(self):
        return "DensityMatrix(dim=%d)" % self.dim


class PovmElement:
    """A measurement operator M with 0 <= M <= I (spectrum tolerance 1e-10)."""

    def __init__(self, matrix):
        m = _as_matrix(matrix)
        if np.abs(m - m.conj().T).max() > POVM_SPECTRUM_TOL:
            raise ValueError("POVM element is not Hermitian to %g" % POVM_SPECTRUM_TOL)
        m = _hermitize(m)
        eig = np.linalg.eigvalsh(m)
        if eig.min() < -POVM_SPECTRUM_TOL or eig.max() > 1.0 + POVM_SPECTRUM_TOL:
            raise ValueError("POVM element spectrum [%g, %g] outside [0, 1] to %g"
                             % (eig.min(), eig.max(), POVM_SPECTRUM_TOL))
        self.matrix = m
        self.matrix.setflags(write=False)
        self.dim = m.shape[0]

    def __repr__(self):
        return "PovmElement(dim=%d)" % self.dim


class SeparableOutcome:
    """A product measurement outcome: one single-qubit factor per qubit."""

    def __init__(self, factors):
        self.factors = [f if isinstance(f, PovmElement) else PovmElement(f) for f in factors]
        if not self.factors:
            raise ValueError("need at least one factor")
        for f in self.factors:
            if f.dim != 2:
                raise ValueError("separable factors must be 2x2, got dim %d" % f.dim)
        self.m = len(self.factors)

    def assemble(self):
        """Materialize the tensor product of the factors as a PovmElement."""
        out = self.factors[0].matrix
        for f in self.factors[1:]:
            out = tensor(out, f.matrix)
        return PovmElement(out)

    def __repr__(self):
        return "SeparableOutcome(m=%d)" % self.m


class KrausLayer:
    """One layer of a 2-local operation: a perfect matching of the m qubits
    and one 4x4 operator of operator norm <= 1 per matched pair."""

    def __init__(self, pairing, factors):
        pairing = [tuple(int(q) for q in p) for p in pairing]
        if any(len(p) != 2 for p in pairing):
            raise ValueError("pairing must consist of qubit pairs")
        touched = [q for p in pairing for q in p]
        m = 2 * len(pairing)
        if sorted(touched) != list(range(m)):
            raise ValueError("pairing %r is not a perfect matching of %d qubits" % (pairing, m))
        factors = [np.asarray(f, dtype=complex) for f in factors]
        if len(factors) != len(pairing):
            raise ValueError("got %d factors for %d pairs" % (len(factors), len(pairing)))
        for f in factors:
            if f.shape != (4, 4):
                raise ValueError("2-local factors must be 4x4, got shape %r" % (f.shape,))
            s = np.linalg.norm(f, 2)
            if s > 1.0 + POVM_SPECTRUM_TOL:
                raise ValueError("factor operator norm %g exceeds 1 + %g" % (s, POVM_SPECTRUM_TOL))
        self.pairing = pairing
        self.factors = factors
        self.m = m

    def operator(self):
        """The layer's 2^m x 2^m Kraus operator, qubits in natural order."""
        op = self.factors[0]
        for f in self.factors[1:]:
            op = tensor(op, f)
        perm = [q for p in self.pairing for q in p]
        if perm == list(range(self.m)):
            return op
        # op's row multi-index i_j addresses qubit perm[j]; relabel to natural
        # order by permuting both row and column axes of the 2x...x2 tensor.
        axes = [perm.index(q) for q in range(self.m)]
        t = op.reshape((2,) * (2 * self.m))
        t = t.transpose(axes + [self.m + a for a in axes])
        return np.ascontiguousarray(t.reshape(1 << self.m, 1 << self.m))

    def __repr__(self):
        return "KrausLayer(m=%d, pairing=%r)" % (self.m, self.pairing)


class TwoLocalOutcome:
    """A depth-d 2-local measurement outcome M = (K_d...K_1)^dag (K_d...K_1).

    Each layer may use its own perfect matching of the qubits; the qubit
    count m must be even and identical across layers.
    """

    def __init__(self, layers):
        self.layers = [l if isinstance(l, KrausLayer) else KrausLayer(*l) for l in layers]
        if not self.layers:
            raise ValueError("need at least one layer")
        self.m = self.layers[0].m
        if any(l.m != self.m for l in self.layers):
            raise ValueError("layers act on inconsistent qubit counts")
        self.d = len(self.layers)

    def __repr__(self):
        return "TwoLocalOutcome(m=%d, d=%d)" % (self.m, self.d)


def tensor(a, b):
    """Kronecker product with a desk-scale dimension guard.

    Parameters
    ----------
    a, b : square matrices

    Returns
    -------
    ndarray of shape (dim_a*dim_b, dim_a*dim_b); rejected if that exceeds 2^12.
    """
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[0] * b.shape[0] > MAX_TENSOR_DIM:
        raise ValueError("tensor dimension %d exceeds cap %d" % (a.shape[0] * b.shape[0], MAX_TENSOR_DIM))
    return np.kron(a, b)


def norms(x):
    """All four norms used by the net constructions and tail bounds.

    Returns
    -------
    dict with keys "operator" (largest singular value), "frobenius",
    "trace" (singular-value sum), and "entrywise_linf" (largest |entry|,
    the matrix viewed as a flat complex vector).
    """
    x = _as_matrix(x)
    if not np.isfinite(x).all():
        raise ValueError("matrix has non-finite entries")
    sv = np.linalg.svd(x, compute_uv=False)
    return {
        "operator": float(sv[0]) if sv.size else 0.0,
        "frobenius": float(np.linalg.norm(x)),
        "trace": float(sv.sum()),
        "entrywise_linf": float(np.abs(x).max()),
    }


def born_probability(m, rho):
    """Outcome probability Tr(M rho), clamped into [0, 1].

    The real part of the trace is taken; a clamp of more than 1e-9 is
    reported through `warnings`, and a clamp of more than 1e-6 raises
    NumericalConsistencyError (a legitimate POVM element and state cannot
    stray that far).

    Parameters
    ----------
    m : PovmElement or matrix
    rho : DensityMatrix or matrix

    Returns
    -------
    float in [0, 1]
    """
    mm = _as_matrix(m)
    rr = _as_matrix(rho)
    if mm.shape != rr.shape:
        raise ValueError("dimension mismatch: M is %r, rho is %r" % (mm.shape, rr.shape))
    p = float(np.trace(mm @ rr).real)
    clamp = max(0.0, -p, p - 1.0)
    if clamp > BORN_CLAMP_ERROR:
        raise NumericalConsistencyError("Born probability %r outside [0,1] by %g" % (p, clamp))
    if clamp > BORN_CLAMP_WARN:
        warnings.warn("Born probability clamped by %g" % clamp)
    return min(1.0, max(0.0, p))


def is_delta_non_negligible(m, rho, delta):
    """Whether outcome M is delta-non-negligible on state rho.

    The defining inequality is Tr(M rho) >= delta * Tr(M) / dim.  Both
    operands are symmetrized (M -> (M + M^dag)/2, likewise rho) before the
    traces are formed, and the comparison itself is exact -- no extra slack
    is added, so the boundary case Tr(M rho) = delta*Tr(M)/dim counts as
    non-negligible.

    Parameters
    ----------
    m : PovmElement or matrix
    rho : DensityMatrix or matrix
    delta : float in (0, 1]

    Returns
    -------
    bool
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta=%r outside (0, 1]" % (delta,))
    mm = _hermitize(_as_matrix(m))
    rr = _hermitize(_as_matrix(rho))
    if mm.shape != rr.shape:
        raise ValueError("dimension mismatch: M is %r, rho is %r" % (mm.shape, rr.shape))
    d = mm.shape[0]
    lhs = float(np.trace(mm @ rr).real)
    rhs = delta * float(np.trace(mm).real) / d
    return lhs >= rhs


def negligible_mass(outcomes, rho, delta):
    """Total Born probability carried by delta-negligible outcomes.

    Parameters
    ----------
    outcomes : iterable of PovmElement or matrix
        Must form a complete POVM: the elements sum to the identity to 1e-9
        in entrywise l-inf, else the call is rejected.
    rho : DensityMatrix or matrix
    delta : float in (0, 1]

    Returns
    -------
    float -- always < delta for a genuine POVM and state (strict bound;
    the test suite asserts strictness).
    """
    mats = [_as_matrix(m) for m in outcomes]
    if not mats:
        raise ValueError("empty POVM")
    d = mats[0].shape[0]
    total = np.zeros((d, d), dtype=complex)
    for m in mats:
        if m.shape != (d, d):
            raise ValueError("POVM elements have inconsistent dimensions")
        total += m
    if np.abs(total - np.eye(d)).max() > COMPLETENESS_TOL:
        raise ValueError("POVM incomplete: sum deviates from identity by %g"
                         % np.abs(total - np.eye(d)).max())
    mass = 0.0
    for m in mats:
        if not is_delta_non_negligible(m, rho, delta):
            mass += born_probability(m, rho)
    return mass


def assemble_two_local(t):
    """Materialize a TwoLocalOutcome as a PovmElement.

    Layers are applied in list order, K = K_d ... K_2 K_1, and the outcome
    operator is M = K^dag K.  Since every 4x4 factor has operator norm <= 1,
    M must satisfy 0 <= M <= I; a spectrum violation beyond 1e-9 raises
    NumericalConsistencyError.

    Parameters
    ----------
    t : TwoLocalOutcome with m <= 6 qubits and depth d <= 8

    Returns
    -------
    PovmElement of dimension 2^m
    """
    if not isinstance(t, TwoLocalOutcome):
        t = TwoLocalOutcome(t)
    if t.m > 6:
        raise ValueError("2-local assembly capped at m <= 6 qubits, got m=%d" % t.m)
    if t.d > 8:
        raise ValueError("2-local assembly capped at depth d <= 8, got d=%d" % t.d)
    k = np.eye(1 << t.m, dtype=complex)
    for layer in t.layers:
        k = layer.operator() @ k
    m = k.conj().T @ k
    m = _hermitize(m)
    w, v = np.linalg.eigh(m)
    if w.min() < -ASSEMBLY_SPECTRUM_TOL or w.max() > 1.0 + ASSEMBLY_SPECTRUM_TOL:
        raise NumericalConsistencyError("assembled spectrum [%g, %g] violates 0 <= M <= I"
                                        % (w.min(), w.max()))
    # within tolerance: snap rounding noise back onto [0, 1] so the result
    # is a valid PovmElement under its own (tighter) spectrum check
    m = (v * np.clip(w, 0.0, 1.0)) @ v.conj().T
    return PovmElement(m)


def matrix_to_json(x):
    """Serialize a square complex matrix to a JSON string.

    Entries are row-major (re, im) pairs rendered as 17-significant-digit
    decimal strings, which round-trips IEEE-754 doubles exactly.
    """
    m = _as_matrix(x)
    return json.dumps({
        "dim": m.shape[0],
        "entries": [["%.17g" % v.real, "%.17g" % v.imag] for v in m.ravel()],
    })


def matrix_from_json(s):
    """Inverse of `matrix_to_json`."""
    obj = json.loads(s)
    d = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != d * d:
        raise ValueError("matrix JSON has %d entries for dim %d" % (len(entries), d))
    flat = np.array([complex(float(re), float(im)) for re, im in entries])
    return flat.reshape(d, d)
