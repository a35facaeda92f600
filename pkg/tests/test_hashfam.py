import numpy as np
import pytest
from hypothesis import given, seed, settings, strategies as st

from otmlab.hashfam import (
    IRREDUCIBLE_POLY,
    BinaryField,
    HashFunction,
    basis_tables,
    eval_hash,
    hash_from_seed_bits,
    sample_hash,
    verify_independence,
)


# ---------------------------------------------------------------------------
# Oracle: Rabin's irreducibility criterion, written against plain int-encoded
# GF(2)[x] arithmetic.  f of degree n is irreducible iff x^(2^n) == x mod f
# and gcd(x^(2^(n/p)) - x, f) == 1 for every prime p | n.  The module itself
# only ever does trial division, so this is an independent check of the
# pinned table.
# ---------------------------------------------------------------------------

def _omul(a, b):
    r = 0
    shift = 0
    while b:
        if b & 1:
            r ^= a << shift
        b >>= 1
        shift += 1
    return r


def _omod(a, f):
    df = f.bit_length() - 1
    da = a.bit_length() - 1
    while da >= df and a:
        a ^= f << (da - df)
        da = a.bit_length() - 1
    return a


def _ogcd(a, b):
    while b:
        a, b = b, _omod(a, b)
    return a


def _x_pow_pow2_mod(k, f):
    # x^(2^k) mod f by repeated squaring
    r = _omod(2, f)
    for _ in range(k):
        r = _omod(_omul(r, r), f)
    return r


def _prime_factors(n):
    out = set()
    d = 2
    while d * d <= n:
        while n % d == 0:
            out.add(d)
            n //= d
        d += 1
    if n > 1:
        out.add(n)
    return out


def _rabin_irreducible(f):
    n = f.bit_length() - 1
    if _x_pow_pow2_mod(n, f) != _omod(2, f):
        return False
    for p in _prime_factors(n):
        g = _x_pow_pow2_mod(n // p, f) ^ _omod(2, f)
        if _ogcd(f, g) != 1:
            return False
    return True


def test_pinned_moduli_table_is_irreducible():
    assert sorted(IRREDUCIBLE_POLY) == list(range(1, 65))
    for ell, f in IRREDUCIBLE_POLY.items():
        assert f.bit_length() - 1 == ell
        assert _rabin_irreducible(f), "table entry for ell=%d is reducible" % ell


def test_rabin_oracle_rejects_known_reducibles():
    # x^2, x^2 + x = x(x+1), x^4 + 1 = (x+1)^4
    for f in (0b100, 0b110, 0b10001):
        assert not _rabin_irreducible(f)


# ---------------------------------------------------------------------------
# Field and evaluation, against schoolbook bit-list arithmetic in GF(2^4).
# ---------------------------------------------------------------------------

def _bits(v, width):
    return [(v >> i) & 1 for i in range(width)]


def _school_mul_gf16(a, b):
    # convolution then long division by x^4 + x + 1 (0x13), all on bit lists
    prod = [0] * 7
    for i, ai in enumerate(_bits(a, 4)):
        for j, bj in enumerate(_bits(b, 4)):
            prod[i + j] ^= ai & bj
    for d in range(6, 3, -1):
        if prod[d]:
            prod[d] ^= 1
            prod[d - 3] ^= 1
            prod[d - 4] ^= 1
    return sum(prod[i] << i for i in range(4))


def test_field_mul_matches_schoolbook_gf16():
    F = BinaryField(4)
    for a in range(16):
        for b in range(16):
            assert F.mul(a, b) == _school_mul_gf16(a, b)


def test_field_axioms_small():
    for ell in (1, 2, 3, 5):
        F = BinaryField(ell)
        n = F.order
        for a in range(n):
            assert F.mul(a, 1) == a
            for b in range(n):
                assert F.mul(a, b) == F.mul(b, a)
        # every nonzero element is invertible: row {a*b : b} is a permutation
        for a in range(1, n):
            assert sorted(F.mul(a, b) for b in range(n)) == list(range(n))


def test_eval_hash_matches_schoolbook_horner():
    F = BinaryField(4)
    h = HashFunction(F, [0x3, 0xA, 0x7])  # 3 + Ax + 7x^2
    for x in range(16):
        acc = 0
        for c in reversed(h.coefficients):
            acc = _school_mul_gf16(acc, x) ^ c
        assert h.eval_field(x) == acc
        assert eval_hash(h, x) == acc & 1


def test_eval_rejects_out_of_domain():
    h = HashFunction(BinaryField(3), [1, 2])
    with pytest.raises(ValueError):
        h(8)
    with pytest.raises(ValueError):
        h(-1)


# ---------------------------------------------------------------------------
# Sampling and the exact-independence audit.
# ---------------------------------------------------------------------------

def test_sample_hash_bounds():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_hash(0, 1, rng)
    with pytest.raises(ValueError):
        sample_hash(65, 1, rng)
    with pytest.raises(ValueError):
        sample_hash(3, 0, rng)
    with pytest.raises(ValueError):
        sample_hash(1, 3, rng)  # r > 2^ell
    h = sample_hash(1, 2, rng)
    assert h.r == 2 and h.ell == 1


def test_sample_hash_deterministic_given_seed():
    h1 = sample_hash(13, 5, np.random.default_rng(424242))
    h2 = sample_hash(13, 5, np.random.default_rng(424242))
    assert h1 == h2
    h3 = sample_hash(13, 5, np.random.default_rng(424243))
    assert h1 != h3


def test_exact_family_has_zero_bias_small_cases():
    for ell, r in [(1, 2), (2, 2), (2, 3), (3, 2), (3, 4)]:
        res = verify_independence(ell, r)
        assert res["max_bias"] == 0.0, (ell, r, res)


def test_direct_and_rank_methods_agree():
    for ell, r in [(2, 3), (3, 4), (2, 4)]:
        d = verify_independence(ell, r, method="direct")
        g = verify_independence(ell, r, method="rank")
        assert d["max_bias"] == g["max_bias"] == 0.0
        assert d["tuples_checked"] == g["tuples_checked"]
    # and on a broken family both methods report the identical nonzero bias
    d = verify_independence(2, 4, ncoeffs=2, method="direct")
    g = verify_independence(2, 4, ncoeffs=2, method="rank")
    assert d["max_bias"] == g["max_bias"] > 0.0


def test_truncated_family_fails_independence():
    # constant polynomials: outputs at any two points are identical
    res = verify_independence(2, 2, ncoeffs=1)
    assert res["max_bias"] == pytest.approx(0.25)
    assert res["worst_tuple"] is not None
    # Degree-1 polynomials give *bit* outputs that are still 3-wise
    # independent (an odd-size XOR of outputs always carries the constant
    # term's low bit), so the first honest failure is a 4-tuple whose field
    # elements sum to zero: 0+1+2+3 = 0 in GF(4) kills the linear part and
    # leaves rank 3, i.e. bias 2^-3 - 2^-4.
    res = verify_independence(2, 3, ncoeffs=2)
    assert res["max_bias"] == 0.0
    res = verify_independence(2, 4, ncoeffs=2)
    assert res["max_bias"] == pytest.approx(2.0 ** -3 - 2.0 ** -4)


def test_verify_independence_guards():
    with pytest.raises(ValueError):
        verify_independence(6, 2)
    with pytest.raises(ValueError):
        verify_independence(3, 5)
    with pytest.raises(ValueError):
        verify_independence(1, 3)  # r > domain
    with pytest.raises(ValueError):
        verify_independence(2, 2, method="bogus")


def test_single_point_output_is_unbiased():
    # enumerate all seeds at ell=3, r=2: each point hits 0 and 1 equally often
    ell, r = 3, 2
    F = BinaryField(ell)
    counts = np.zeros(1 << ell, dtype=int)
    for c0 in range(8):
        for c1 in range(8):
            h = HashFunction(F, [c0, c1])
            for x in range(8):
                counts[x] += h(x)
    assert (counts == (64 // 2)).all()


# ---------------------------------------------------------------------------
# Batched evaluation through the seed-bit basis matrix.
# ---------------------------------------------------------------------------

def test_basis_tables_match_direct_evaluation():
    rng = np.random.default_rng(7)
    ell, r = 6, 4
    points = [0, 1, 5, 17, 40, 63]
    B = basis_tables(ell, r, points)
    assert B.shape == (r * ell, len(points))
    for _ in range(25):
        bits = rng.integers(0, 2, size=r * ell, dtype=np.uint8)
        fast = (bits @ B) % 2
        h = hash_from_seed_bits(ell, bits)
        slow = np.array([h(x) for x in points], dtype=np.uint8)
        assert (fast == slow).all()


def test_basis_tables_rejects_bad_point():
    with pytest.raises(ValueError):
        basis_tables(3, 2, [0, 9])


def test_hash_from_seed_bits_length_check():
    with pytest.raises(ValueError):
        hash_from_seed_bits(3, [1, 0])


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------

def test_serialization_known_bytes():
    h = HashFunction(BinaryField(9), [0x1FF, 0x002])
    blob = h.to_bytes()
    assert blob == bytes([9]) + (2).to_bytes(2, "big") + b"\x01\xff" + b"\x00\x02"
    assert HashFunction.from_bytes(blob) == h


@seed(1)
@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=64), st.integers(min_value=1, max_value=6), st.integers(min_value=0))
def test_serialization_round_trip(ell, r, entropy):
    h = sample_hash(ell, min(r, 1 << min(ell, 3)), np.random.default_rng(entropy))
    assert HashFunction.from_bytes(h.to_bytes()) == h


def test_from_bytes_rejects_garbage():
    with pytest.raises(ValueError):
        HashFunction.from_bytes(b"\x04")
    good = sample_hash(4, 3, np.random.default_rng(1)).to_bytes()
    with pytest.raises(ValueError):
        HashFunction.from_bytes(good + b"\x00")
    with pytest.raises(ValueError):
        HashFunction.from_bytes(good[:-1])


def test_coefficient_range_enforced():
    F = BinaryField(3)
    with pytest.raises(ValueError):
        HashFunction(F, [8])
    with pytest.raises(ValueError):
        HashFunction(F, [])
