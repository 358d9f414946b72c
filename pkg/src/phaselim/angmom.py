"""Angular-momentum kernel: Clebsch-Gordan coefficients and the spin-flip
transfer coefficients that define the block action of local dephasing on
permutation-symmetric qubit states.

Quantum numbers are carried as doubled integers (``2j``, ``2m``) so that
half-integer arithmetic is exact.  The public entry points accept
:class:`HalfInt` or plain numbers representable as integer/half-integer.

Two evaluation routes coexist:

* exact per-coefficient evaluation (`clebsch_gordan`, `transfer_coefficient`,
  `coupling_matrix_entry`) via the closed Racah sum with big-integer
  rationals, stable for any quantum numbers that fit in memory;
* bulk tables (`DephasingTables`, `coupling_blocks`) that build all transfer
  coefficients for one particle number at once by diagonalizing the small
  tridiagonal total-spin matrices, which is what sweeps over N use.

Both routes are cross-checked against each other and against brute-force
tensor-product oracles in the test suite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, lgamma, sqrt

import numpy as np
from scipy.linalg.lapack import dstev

__all__ = [
    "HalfInt",
    "CgKey",
    "clebsch_gordan",
    "transfer_coefficient",
    "dephasing_weight",
    "coupling_matrix_entry",
    "multiplicity_dimension",
    "allowed_twice_j",
    "DephasingTables",
    "dephasing_tables",
    "coupling_blocks",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class HalfInt:
    """Exact integer or half-integer, stored as twice its value."""

    twice_value: int

    @classmethod
    def from_value(cls, value) -> "HalfInt":
        """Coerce a number to HalfInt; value must be an exact multiple of 1/2."""
        if isinstance(value, HalfInt):
            return value
        twice = 2 * value
        if twice != round(twice):
            raise ValueError(f"{value!r} is not an integer or half-integer")
        return cls(int(round(twice)))

    def __add__(self, other) -> "HalfInt":
        return HalfInt(self.twice_value + HalfInt.from_value(other).twice_value)

    def __sub__(self, other) -> "HalfInt":
        return HalfInt(self.twice_value - HalfInt.from_value(other).twice_value)

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice_value)

    def __abs__(self) -> "HalfInt":
        return HalfInt(abs(self.twice_value))

    def __float__(self) -> float:
        return self.twice_value / 2.0

    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __repr__(self) -> str:
        if self.twice_value % 2 == 0:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"


def _twice(value) -> int:
    """Doubled-integer representation of an integer/half-integer input."""
    return HalfInt.from_value(value).twice_value


@dataclass(frozen=True)
class CgKey:
    """Arguments of the coupling coefficient <j1 m1; j2 m2 | J M>."""

    j1: HalfInt
    m1: HalfInt
    j2: HalfInt
    m2: HalfInt
    J: HalfInt
    M: HalfInt

    @classmethod
    def of(cls, j1, m1, j2, m2, J, M) -> "CgKey":
        f = HalfInt.from_value
        return cls(f(j1), f(m1), f(j2), f(m2), f(J), f(M))


def _selection_ok(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> bool:
    """Angular-momentum selection rules, on doubled integers."""
    if tj1 < 0 or tj2 < 0 or tJ < 0:
        return False
    # projections must match their j in parity and magnitude
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if abs(tm) > tj or (tj - tm) % 2 != 0:
            return False
    if tm1 + tm2 != tM:
        return False
    # triangle rule, with integer perimeter
    if not (abs(tj1 - tj2) <= tJ <= tj1 + tj2):
        return False
    if (tj1 + tj2 + tJ) % 2 != 0:
        return False
    return True


@lru_cache(maxsize=200_000)
def _cg_exact(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> float:
    """Closed-sum coupling coefficient, exact big-integer arithmetic.

    Evaluates the alternating Racah sum with rational terms over a common
    structure, then takes a single square root at the end, so no precision is
    lost to cancellation even for large quantum numbers.
    """
    if not _selection_ok(tj1, tm1, tj2, tm2, tJ, tM):
        logger.debug(
            "selection rules reject <%s %s; %s %s | %s %s>",
            tj1 / 2, tm1 / 2, tj2 / 2, tm2 / 2, tJ / 2, tM / 2,
        )
        return 0.0

    def f(twice: int) -> int:
        # factorial of an exact half-integer sum that is guaranteed integral
        assert twice % 2 == 0 and twice >= 0
        return factorial(twice // 2)

    t_min = max(0, (tj2 - tJ - tm1) // 2, (tj1 + tm2 - tJ) // 2)
    t_max = min((tj1 + tj2 - tJ) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    if t_max < t_min:
        return 0.0
    series = Fraction(0)
    for t in range(t_min, t_max + 1):
        den = (
            factorial(t)
            * f(tj1 + tj2 - tJ - 2 * t)
            * f(tj1 - tm1 - 2 * t)
            * f(tj2 + tm2 - 2 * t)
            * f(tJ - tj2 + tm1 + 2 * t)
            * f(tJ - tj1 - tm2 + 2 * t)
        )
        series += Fraction(-1 if t % 2 else 1, den)
    if series == 0:
        return 0.0
    prefactor = (
        Fraction(tJ + 1)
        * Fraction(f(tj1 + tj2 - tJ) * f(tj1 - tj2 + tJ) * f(-tj1 + tj2 + tJ),
                   f(tj1 + tj2 + tJ + 2))
        * f(tJ + tM) * f(tJ - tM)
        * f(tj1 - tm1) * f(tj1 + tm1)
        * f(tj2 - tm2) * f(tj2 + tm2)
    )
    magnitude = sqrt(float(prefactor * series * series))
    return magnitude if series > 0 else -magnitude


def clebsch_gordan(key: CgKey) -> float:
    """Coupling coefficient <j1 m1; j2 m2 | J M> in the Condon-Shortley
    convention.  Returns 0 when selection rules fail."""
    return _cg_exact(
        key.j1.twice_value, key.m1.twice_value,
        key.j2.twice_value, key.m2.twice_value,
        key.J.twice_value, key.M.twice_value,
    )


def allowed_twice_j(n: int) -> range:
    """Doubled total-spin values 2j for n spin-1/2 particles: n, n-2, ..., n%2."""
    return range(n % 2, n + 1, 2)


def _check_jm(n: int, tj: int, tm: int) -> None:
    if tj < 0 or tj > n or (n - tj) % 2 != 0:
        raise ValueError(f"j={tj/2} not in the total-spin ladder for N={n}")
    if abs(tm) > tj or (tj - tm) % 2 != 0:
        raise ValueError(f"m={tm/2} invalid for j={tj/2}")


def transfer_coefficient(n: int, k: int, j, m) -> float:
    """Overlap coefficient through which flipping k of n spins couples the
    fully symmetric sector to the total-spin-j sector.

    Sums, over the z-projection mt of the flipped group, the product of the
    coefficients that decompose |n/2, m> into |k/2, mt> x |(n-k)/2, m-mt>
    and re-couple that pair to |j, m>, weighted by the flip parity
    (-1)^(k/2-mt).  The first factor's second coupled spin is (n-k)/2, the
    value required for the decomposition to exist.
    """
    tj, tm = _twice(j), _twice(m)
    if not 0 <= k <= n:
        raise ValueError(f"flip count k={k} outside 0..{n}")
    _check_jm(n, tj, tm)
    if tj < abs(n - 2 * k):
        raise ValueError(f"j={tj/2} below the k-flip triangle minimum |n/2-k|")
    total = 0.0
    lo = max(-k, tm - (n - k))
    hi = min(k, tm + (n - k))
    for tmt in range(lo, hi + 1, 2):
        c_split = _cg_exact(k, tmt, n - k, tm - tmt, n, tm)
        c_couple = _cg_exact(k, tmt, n - k, tm - tmt, tj, tm)
        if c_split == 0.0 or c_couple == 0.0:
            continue
        sign = -1.0 if ((k - tmt) // 2) % 2 else 1.0
        total += sign * c_split * c_couple
    return total


def dephasing_weight(n: int, k: int, eta: float) -> float:
    """Probability that exactly k of n particles pick up a phase flip under
    local dephasing of strength eta: binom(n,k) ((1-eta)/2)^k ((1+eta)/2)^(n-k)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"dephasing parameter eta={eta} outside [0, 1]")
    if not 0 <= k <= n:
        raise ValueError(f"flip count k={k} outside 0..{n}")
    return comb(n, k) * ((1.0 - eta) / 2.0) ** k * ((1.0 + eta) / 2.0) ** (n - k)


def coupling_matrix_entry(n: int, j, m, m2, eta: float) -> float:
    """Entry (m, m2) of the spin-j coupling matrix of the dephasing channel:
    the factor by which the channel multiplies the (m, m2) coherence of a
    symmetric input when projected on the total-spin-j block.  Symmetric in
    (m, m2)."""
    tj, tm, tm2 = _twice(j), _twice(m), _twice(m2)
    _check_jm(n, tj, tm)
    _check_jm(n, tj, tm2)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"dephasing parameter eta={eta} outside [0, 1]")
    total = 0.0
    for k in range((n - tj + 1) // 2, (n + tj) // 2 + 1):
        if abs(n - 2 * k) > tj:
            continue
        w = dephasing_weight(n, k, eta)
        total += w * transfer_coefficient(n, k, HalfInt(tj), HalfInt(tm)) \
            * transfer_coefficient(n, k, HalfInt(tj), HalfInt(tm2))
    return total


def multiplicity_dimension(n: int, j) -> int:
    """Number of inequivalent total-spin-j copies in (C^2)^(x n):
    binom(n, n/2-j) - binom(n, n/2-j-1)."""
    tj = _twice(j)
    if tj < 0 or tj > n or (n - tj) % 2 != 0:
        raise ValueError(f"j={tj/2} not in the total-spin ladder for N={n}")
    a = (n - tj) // 2
    first = comb(n, a)
    second = comb(n, a - 1) if a >= 1 else 0
    return first - second


# ---------------------------------------------------------------------------
# bulk tables: all transfer coefficients for one particle number at once
# ---------------------------------------------------------------------------


def _stretched_column(n: int, k: int, tm: int, tmts: np.ndarray) -> np.ndarray:
    """Decomposition of |n/2, m> over |k/2, mt> x |(n-k)/2, m-mt>.

    This maximal-spin column has the closed binomial-product form
    sqrt(C(k, (k-2mt)/2) C(n-k, (n-k-2(m-mt))/2) / C(n, (n-2m)/2)),
    evaluated in log space to stay finite at large n.
    """
    ln_den = lgamma(n + 1) - lgamma((n - tm) / 2 + 1) - lgamma((n + tm) / 2 + 1)
    a = (k - tmts) / 2.0
    b = ((n - k) - (tm - tmts)) / 2.0
    ln1 = lgamma(k + 1) - np.vectorize(lgamma)(a + 1) - np.vectorize(lgamma)(k - a + 1)
    ln2 = (lgamma(n - k + 1) - np.vectorize(lgamma)(b + 1)
           - np.vectorize(lgamma)(n - k - b + 1))
    return np.exp(0.5 * (ln1 + ln2 - ln_den))


class DephasingTables:
    """All transfer coefficients C(k; j, m) for one particle number.

    For fixed (k, m) the coupled vectors |j, m> over the flipped/unflipped
    split are the eigenvectors of a small tridiagonal total-spin matrix whose
    eigenvalues j(j+1) are known, so one LAPACK tridiagonal solve per (k, m)
    yields every j at once.  Only k <= n/2 and m >= 0 are solved; the rest
    follow from exact sign symmetries.  Construction is single-threaded;
    afterwards the object is read-only and safe to share across threads.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one particle")
        self.n = n
        self._n_j = n // 2 + 1
        # _c[k][j_index, m_index]; j_index = (2j - n%2)/2, m_index = (2m + n)/2
        self._c = {}
        for k in range(0, n // 2 + 1):
            self._c[k] = self._build_k(k)

    def _build_k(self, k: int) -> np.ndarray:
        n = self.n
        ja2, jb2 = k, n - k
        ja, jb = ja2 / 2.0, jb2 / 2.0
        mat = np.zeros((self._n_j, n + 1))
        for tm in range(n % 2, n + 1, 2):
            lo = max(-ja2, tm - jb2)
            hi = min(ja2, tm + jb2)
            tmts = np.arange(lo, hi + 1, 2)
            mt = tmts / 2.0
            mb = (tm - tmts) / 2.0
            tj_min = max(abs(tm), abs(ja2 - jb2))
            tjs = np.arange(tj_min, n + 1, 2)
            if len(tmts) == 1:
                vecs = np.ones((1, 1))
                u = np.ones(1)
            else:
                diag = ja * (ja + 1) + jb * (jb + 1) + 2.0 * mt * mb
                off = np.sqrt((ja * (ja + 1) - mt[:-1] * (mt[:-1] + 1))
                              * (jb * (jb + 1) - mb[:-1] * (mb[:-1] - 1)))
                _, vecs, info = dstev(diag, off)
                if info != 0:
                    raise RuntimeError(f"tridiagonal solve failed (n={n}, k={k}, m={tm/2})")
                # Condon-Shortley: component at the top mt is positive
                sign = np.sign(vecs[-1, :])
                sign[sign == 0.0] = 1.0
                vecs = vecs * sign
                u = _stretched_column(n, k, tm, tmts)
            flip = np.where(((k - tmts) // 2) % 2 == 0, 1.0, -1.0)
            coeffs = vecs.T @ (flip * u)
            jidx = (tjs - n % 2) // 2
            mat[jidx, (tm + n) // 2] = coeffs
            if tm != 0:
                # C(j, -m) = (-1)^(n/2 - j) (-1)^k C(j, m)
                s = np.where(((n - tjs) // 2 + k) % 2 == 0, 1.0, -1.0)
                mat[jidx, (n - tm) // 2] = s * coeffs
        return mat

    def transfer(self, k: int, tj: int, tm: int) -> float:
        """C(k; j, m) with doubled arguments; applies the k -> n-k symmetry."""
        n = self.n
        kk = min(k, n - k)
        val = self._c[kk][(tj - n % 2) // 2, (tm + n) // 2]
        if k != kk:
            # C(n-k; j, m) = (-1)^(n/2-j) (-1)^(n/2-m) C(k; j, m)
            if (((n - tj) // 2) + ((n - tm) // 2)) % 2:
                val = -val
        return float(val)

    def transfer_row(self, k: int, tj: int) -> np.ndarray:
        """C(k; j, m) for all m = -j..j, in ascending m order."""
        n = self.n
        kk = min(k, n - k)
        jidx = (tj - n % 2) // 2
        tms = np.arange(-tj, tj + 1, 2)
        row = self._c[kk][jidx, (tms + n) // 2].copy()
        if k != kk:
            sj = 1.0 if ((n - tj) // 2) % 2 == 0 else -1.0
            sm = np.where(((n - tms) // 2) % 2 == 0, 1.0, -1.0)
            row *= sj * sm
        return row

    def coupling_block(self, tj: int, eta: float) -> np.ndarray:
        """Spin-j coupling matrix A_j(eta) over m, m' = -j..j (ascending)."""
        n = self.n
        dim = tj + 1
        block = np.zeros((dim, dim))
        for k in range((n - tj + 1) // 2, (n + tj) // 2 + 1):
            if abs(n - 2 * k) > tj:
                continue
            row = self.transfer_row(k, tj)
            block += dephasing_weight(n, k, eta) * np.outer(row, row)
        return block


@lru_cache(maxsize=4)
def dephasing_tables(n: int) -> DephasingTables:
    """Memoized per-N transfer tables (small cache; sweeps run N in order)."""
    return DephasingTables(n)


@lru_cache(maxsize=4)
def coupling_blocks(n: int, eta: float) -> dict:
    """All spin-j coupling matrices of the local-dephasing channel for n
    particles, keyed by doubled j.  Memoized per (n, eta)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"dephasing parameter eta={eta} outside [0, 1]")
    tables = dephasing_tables(n)
    return {tj: tables.coupling_block(tj, eta) for tj in allowed_twice_j(n)}
