"""Resonance structure of the two dispersion relations.

The first family (B) comes from the gap n^3 - alpha n1^3 - alpha n2^3 with
n = n1 + n2, which factors as -3 alpha n (n1 - c1 n)(n1 - c2 n) with

    c_{1,2} = 1/2 +- sqrt(-3 + 12/alpha) / 6 ,

real for 0 < alpha <= 4.  The second family (D) comes from
alpha n^3 - n1^3 - alpha n2^3, whose nonzero roots

    d_{1,2} = (-3 alpha +- sqrt(3 alpha (4 - alpha))) / (2 (1 - alpha))

are real for alpha in (0,1) or (1,4]; n1 = 0 also kills that gap for every
n, which is the reason for the standing mean-zero condition on u, and is
therefore excluded from the D near-resonant set and reported separately.

For rational alpha = p/q both discriminants reduce to the single integer
D = 3 p (4 q - p), roots are exact quadratic surds, and gaps are computed
in big-integer arithmetic so that "gap equals zero" is decided exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .diophantine import QuadraticSurd, estimate_type_index
from .fields import SobolevParams

SCAN_REGIMES = ("resonant-B", "resonant-D", "nonresonant-B", "nonresonant-D")


class AlphaDomainError(ValueError):
    """Coupling parameter outside the admissible range."""


class AlphaPoleError(AlphaDomainError):
    """alpha = 1 requested where the d-roots have their pole."""


def as_coupling(alpha) -> "CouplingParam":
    return alpha if isinstance(alpha, CouplingParam) else CouplingParam(alpha)


class CouplingParam:
    """The coupling alpha, kept exact when given as a rational.

    Accepts a Fraction, an int, a "p/q" string, or a float; floats are taken
    at face value (no rational reconstruction).
    """

    __slots__ = ("fraction", "value")

    def __init__(self, alpha):
        if isinstance(alpha, CouplingParam):
            self.fraction, self.value = alpha.fraction, alpha.value
            return
        if isinstance(alpha, str):
            alpha = Fraction(alpha)
        if isinstance(alpha, (Fraction, int)):
            self.fraction = Fraction(alpha)
            self.value = float(self.fraction)
        else:
            self.fraction = None
            self.value = float(alpha)
        if not (0 < self.value <= 4):
            raise AlphaDomainError(f"alpha must lie in (0, 4], got {self.value}")

    @property
    def is_rational(self) -> bool:
        return self.fraction is not None

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        if self.is_rational:
            return f"CouplingParam({self.fraction})"
        return f"CouplingParam({self.value})"

    def label(self) -> str:
        if self.is_rational:
            return f"{self.fraction.numerator}/{self.fraction.denominator}"
        return repr(self.value)


def _discriminant(pq: Fraction) -> int:
    p, q = pq.numerator, pq.denominator
    return 3 * p * (4 * q - p)


def c_roots_surd(alpha: CouplingParam) -> tuple[QuadraticSurd, QuadraticSurd]:
    """Exact c-roots for rational alpha = p/q:
    c_{1,2} = (3 p +- sqrt(3 p (4 q - p))) / (6 p)."""
    if not alpha.is_rational:
        raise ValueError("exact roots need rational alpha")
    p = alpha.fraction.numerator
    d = _discriminant(alpha.fraction)
    c1 = QuadraticSurd(3 * p, d, 6 * p)
    c2 = QuadraticSurd(-3 * p, d, -6 * p)  # (3p - sqrt(D)) / (6p)
    return c1, c2


def d_roots_surd(alpha: CouplingParam) -> tuple[QuadraticSurd, QuadraticSurd]:
    """Exact d-roots for rational alpha = p/q != 1:
    d_{1,2} = (-3 p +- sqrt(3 p (4 q - p))) / (2 (q - p))."""
    if not alpha.is_rational:
        raise ValueError("exact roots need rational alpha")
    p, q = alpha.fraction.numerator, alpha.fraction.denominator
    if p == q:
        raise AlphaPoleError("d-roots have a pole at alpha = 1")
    d = _discriminant(alpha.fraction)
    d1 = QuadraticSurd(-3 * p, d, 2 * (q - p))
    d2 = QuadraticSurd(3 * p, d, -2 * (q - p))  # (-3p - sqrt(D)) / (2(q-p))
    return d1, d2


def compute_c_roots(alpha) -> tuple[float, float]:
    """Roots of the B-family resonance equation, c1 >= c2, c1 + c2 = 1."""
    alpha = as_coupling(alpha)
    a = alpha.value
    root = math.sqrt(max(-3.0 + 12.0 / a, 0.0)) / 6.0
    return 0.5 + root, 0.5 - root


def compute_d_roots(alpha) -> tuple[float, float]:
    """Roots of the D-family resonance equation (pole at alpha = 1).

    d1 is evaluated through the conjugate form 6 alpha / (3 alpha + sqrt(..))
    and d2 through its defining quotient; both are cancellation-free across
    the whole of (0, 1) and (1, 4], unlike the textbook (-3a + sqrt(..)) / ..
    expression whose numerator degenerates near the pole.
    """
    alpha = as_coupling(alpha)
    a = alpha.value
    if a == 1.0:
        raise AlphaPoleError("d-roots have a pole at alpha = 1")
    root = math.sqrt(max(3.0 * a * (4.0 - a), 0.0))
    d1 = 6.0 * a / (3.0 * a + root)
    d2 = -(3.0 * a + root) / (2.0 * (1.0 - a))
    return d1, d2


@dataclass(frozen=True)
class ResonanceRoots:
    """The four resonance-ray slopes; d's are None at the alpha = 1 pole.

    Satisfies c1 + c2 = 1, alpha (c1^3 + c2^3) = 1 and, where defined,
    d1 + d2 = d1 d2 = 3 alpha / (alpha - 1).
    """

    c1: float
    c2: float
    d1: float | None
    d2: float | None
    rational: bool

    def to_json_dict(self) -> dict:
        return {
            "c1": self.c1, "c2": self.c2, "d1": self.d1, "d2": self.d2,
            "rational": self.rational,
        }


def resonance_roots(alpha) -> ResonanceRoots:
    alpha = as_coupling(alpha)
    c1, c2 = compute_c_roots(alpha)
    try:
        d1, d2 = compute_d_roots(alpha)
    except AlphaPoleError:
        d1 = d2 = None
    return ResonanceRoots(c1=c1, c2=c2, d1=d1, d2=d2, rational=roots_are_rational(alpha))


def roots_are_rational(alpha) -> bool:
    """True when c1 (equivalently all four roots) is rational; decided
    exactly for rational alpha, via the discriminant being a perfect square."""
    alpha = as_coupling(alpha)
    if not alpha.is_rational:
        return False
    d = _discriminant(alpha.fraction)
    r = math.isqrt(d)
    return r * r == d


def dispersion_gap_B(alpha, n: int, n1: int):
    """|n^3 - alpha n1^3 - alpha n2^3| with n2 = n - n1.

    Exact Fraction for rational alpha (big-integer numerator), float
    otherwise.
    """
    alpha = as_coupling(alpha)
    n2 = n - n1
    if alpha.is_rational:
        p, q = alpha.fraction.numerator, alpha.fraction.denominator
        return Fraction(abs(q * n**3 - p * n1**3 - p * n2**3), q)
    return abs(float(n) ** 3 - alpha.value * (float(n1) ** 3 + float(n2) ** 3))


def dispersion_gap_D(alpha, n: int, n1: int):
    """|alpha n^3 - n1^3 - alpha n2^3| with n2 = n - n1; exact when possible."""
    alpha = as_coupling(alpha)
    n2 = n - n1
    if alpha.is_rational:
        p, q = alpha.fraction.numerator, alpha.fraction.denominator
        return Fraction(abs(p * n**3 - q * n1**3 - p * n2**3), q)
    return abs(alpha.value * (float(n) ** 3 - float(n2) ** 3) - float(n1) ** 3)


@dataclass(frozen=True)
class NearResonantTriple:
    n: int
    n1: int
    n2: int
    gap: object        # Fraction for rational alpha, float otherwise
    family: str        # "B" or "D"

    def gap_float(self) -> float:
        return float(self.gap)

    def to_json_dict(self) -> dict:
        gap = self.gap
        if isinstance(gap, Fraction):
            gap_repr = f"{gap.numerator}/{gap.denominator}"
        else:
            gap_repr = float(gap)
        return {
            "n": self.n,
            "n1": self.n1,
            "n2": self.n2,
            "gap": gap_repr,
            "gap_float": self.gap_float(),
            "family": self.family,
        }


def _family_roots(alpha: CouplingParam, family: str):
    """(floats, surds-or-None) for the requested family."""
    if family == "B":
        floats = compute_c_roots(alpha)
        surds = c_roots_surd(alpha) if alpha.is_rational else None
    elif family == "D":
        floats = compute_d_roots(alpha)
        surds = d_roots_surd(alpha) if alpha.is_rational else None
    else:
        raise ValueError("family must be 'B' or 'D'")
    return floats, surds


def _candidate_n1(root_float: float, root_surd: QuadraticSurd | None, n: int):
    """The two integer candidates floor(c n), floor(c n) + 1, and whether
    each lies strictly within distance 1 of c n (exact when a surd is
    supplied)."""
    if root_surd is not None:
        cn = root_surd.mul_int(n)
        base = cn.floor()
        out = []
        for n1 in (base, base + 1):
            # strict |n1 - c n| < 1, decided exactly: -1 < (c n - n1) < 1
            diff = cn.sub_rational(Fraction(n1))
            within = (
                diff.sub_rational(Fraction(-1)).sign() > 0
                and diff.sub_rational(Fraction(1)).sign() < 0
            )
            out.append((n1, within))
        return out
    cn = root_float * n
    base = math.floor(cn)
    return [(n1, abs(n1 - cn) < 1.0) for n1 in (base, base + 1)]


def enumerate_near_resonant(alpha, n_max: int, family: str) -> list[NearResonantTriple]:
    """All triples (n, n1, n2 = n - n1) with 1 <= |n| <= n_max lying strictly
    within distance 1 of a resonance ray n1 = c n.

    At most four per n (two candidates per root, deduplicated).  Membership
    ties |n1 - c n| = 1 are excluded; they are decided exactly for rational
    alpha.  The trivial n1 = 0 ray of family D is not part of the set.
    """
    alpha = as_coupling(alpha)
    floats, surds = _family_roots(alpha, family)
    gap_fn = dispersion_gap_B if family == "B" else dispersion_gap_D
    triples = []
    for n_abs in range(1, n_max + 1):
        for n in (n_abs, -n_abs):
            chosen = {}
            for i, root in enumerate(floats):
                surd = surds[i] if surds is not None else None
                for n1, within in _candidate_n1(root, surd, n):
                    if within:
                        chosen[n1] = True
            for n1 in sorted(chosen):
                if family == "D" and n1 == 0:
                    continue
                triples.append(
                    NearResonantTriple(
                        n=n, n1=n1, n2=n - n1, gap=gap_fn(alpha, n, n1), family=family
                    )
                )
    return triples


def comparability_threshold(triples: list[NearResonantTriple], lo: float, hi: float) -> int:
    """Smallest n0 such that every triple with |n| >= n0 has
    lo <= |n1|/|n| <= hi; returns n_max + 1 when none qualify."""
    worst = 0
    for t in triples:
        ratio = abs(t.n1) / abs(t.n)
        if not (lo <= ratio <= hi):
            worst = max(worst, abs(t.n))
    return worst + 1


# -- lower-bound verification ------------------------------------------------


@dataclass
class DyadicBlockStat:
    lo: int
    hi: int
    min_gap: float
    argmin_n: int
    argmin_n1: int
    max_weight: float = math.nan
    argmax_n: int = 0
    argmax_n1: int = 0


@dataclass
class LowerBoundReport:
    alpha: str
    family: str
    n_max: int
    eps: float
    rational_roots: bool
    exact_zero_count: int
    blocks: list
    empirical_exponent: float
    exponent_stderr: float
    predicted_exponent: float
    nu_hat: float

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "family": self.family,
            "n_max": self.n_max,
            "eps": self.eps,
            "rational_roots": self.rational_roots,
            "exact_zero_count": self.exact_zero_count,
            "blocks": [
                {
                    "lo": b.lo,
                    "hi": b.hi,
                    "min_gap": b.min_gap,
                    "argmin_n": b.argmin_n,
                    "argmin_n1": b.argmin_n1,
                }
                for b in self.blocks
            ],
            "empirical_exponent": self.empirical_exponent,
            "exponent_stderr": self.exponent_stderr,
            "predicted_exponent": self.predicted_exponent,
            "nu_hat": "infinity" if math.isinf(self.nu_hat) else self.nu_hat,
        }


def _dyadic_blocks(n_max: int, lo: int = 2):
    """Half-open blocks [2^j, 2^{j+1}) partitioning [lo, n_max], with the
    last block stretched by one to keep n_max itself covered."""
    blocks = []
    b = lo
    while b < n_max:
        hi = 2 * b if 2 * b < n_max else n_max + 1
        blocks.append((b, hi))
        b *= 2
    return blocks


def _family_nu_hat(alpha: CouplingParam, family: str, depth: int = 64) -> float:
    """Estimated minimal type index of the family's roots; the D family
    takes the max over its two roots, the quantity its lower bound uses."""
    if alpha.is_rational:
        surds = c_roots_surd(alpha) if family == "B" else d_roots_surd(alpha)
        return max(estimate_type_index(s, depth).nu_hat for s in surds)
    floats, _ = _family_roots(alpha, family)
    return max(estimate_type_index(x, depth).nu_hat for x in floats)


def verify_lower_bound(alpha, n_max: int, eps: float, family: str) -> LowerBoundReport:
    """Fit the dyadic-block minimum gap against |n| over the near-resonant
    set and compare the slope with the predicted exponent 1 - nu - eps.

    Rational roots short-circuit the fit: the resonance rays then hit the
    integers infinitely often, the minimum gap is exactly zero in every deep
    block, and the report flags that instead of fitting.
    """
    alpha = as_coupling(alpha)
    if n_max < 16:
        raise ValueError("n_max must be at least 16 for a meaningful fit")
    triples = enumerate_near_resonant(alpha, n_max, family)
    rational = roots_are_rational(alpha)
    zero_count = sum(1 for t in triples if _gap_exact_zero(t) and t.gap == 0)
    blocks = []
    for lo, hi in _dyadic_blocks(n_max):
        in_block = [t for t in triples if lo <= abs(t.n) < hi]
        if not in_block:
            continue
        best = min(in_block, key=lambda t: (t.gap_float(), abs(t.n)))
        blocks.append(
            DyadicBlockStat(
                lo=lo,
                hi=hi,
                min_gap=best.gap_float(),
                argmin_n=best.n,
                argmin_n1=best.n1,
            )
        )
    nu = _family_nu_hat(alpha, family)
    if rational:
        # infinitely many exact resonances: no exponent to fit
        return LowerBoundReport(
            alpha=alpha.label(),
            family=family,
            n_max=n_max,
            eps=eps,
            rational_roots=True,
            exact_zero_count=zero_count,
            blocks=blocks,
            empirical_exponent=math.nan,
            exponent_stderr=math.nan,
            predicted_exponent=-math.inf,
            nu_hat=nu,
        )
    xs = np.array([math.log(abs(b.argmin_n)) for b in blocks if b.min_gap > 0])
    ys = np.array([math.log(b.min_gap) for b in blocks if b.min_gap > 0])
    slope, stderr = _ls_slope(xs, ys)
    return LowerBoundReport(
        alpha=alpha.label(),
        family=family,
        n_max=n_max,
        eps=eps,
        rational_roots=rational,
        exact_zero_count=zero_count,
        blocks=blocks,
        empirical_exponent=slope,
        exponent_stderr=stderr,
        predicted_exponent=1.0 - (0.0 if math.isinf(nu) else nu) - eps,
        nu_hat=nu,
    )


def _gap_exact_zero(t: NearResonantTriple) -> bool:
    return isinstance(t.gap, Fraction)


def _ls_slope(x: np.ndarray, y: np.ndarray):
    if x.size < 2:
        return math.nan, math.nan
    xb, yb = float(np.mean(x)), float(np.mean(y))
    sxx = float(np.sum((x - xb) ** 2))
    slope = float(np.sum((x - xb) * (y - yb)) / sxx)
    resid = y - (yb + slope * (x - xb))
    dof = max(x.size - 2, 1)
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    return slope, stderr


# -- multiplier scans ---------------------------------------------------------


@dataclass
class ScanReport:
    alpha: str
    regime: str
    s1: float
    s2: float
    n_max: int
    blocks: list
    running_sup: list
    supremum: float
    trend: str
    nonincreasing_from: int | None
    n0_comparable: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "regime": self.regime,
            "s1": self.s1,
            "s2": self.s2,
            "n_max": self.n_max,
            "blocks": [
                {
                    "lo": b.lo,
                    "hi": b.hi,
                    "max_weight": b.max_weight,
                    "argmax_n": b.argmax_n,
                    "argmax_n1": b.argmax_n1,
                }
                for b in self.blocks
            ],
            "running_sup": list(self.running_sup),
            "supremum": self.supremum,
            "trend": self.trend,
            "nonincreasing_from": self.nonincreasing_from,
            "n0_comparable": self.n0_comparable,
        }


def _resonant_weight(n, n1, n2, gap, s2):
    return (1.0 + abs(n)) ** (s2 + 1.0) / (
        (1.0 + abs(n1)) ** s2 * (1.0 + abs(n2)) ** s2 * math.sqrt(1.0 + gap)
    )


def multiplier_scan(alpha, sp: SobolevParams, n_max: int, regime: str) -> ScanReport:
    """Dyadic-block maxima of the bilinear-estimate weights.

    Resonant regimes sweep the (at most four per n) near-resonant triples
    with weight <n>^{s2+1} / (<n1>^{s2} <n2>^{s2} <gap>^{1/2}); nonresonant
    regimes sweep the complement over |n1| <= 2 n_max with the lower
    regularity s1 in the denominator.  <gap> = 1 + gap.  Signs are folded:
    the weight is invariant under (n, n1) -> (-n, -n1), so the scan runs
    over n >= 1.
    """
    alpha = as_coupling(alpha)
    if regime not in SCAN_REGIMES:
        raise ValueError(f"regime must be one of {SCAN_REGIMES}")
    family = regime[-1]
    resonant = regime.startswith("resonant")
    if resonant:
        blocks = _scan_resonant(alpha, sp, n_max, family)
    else:
        blocks = _scan_nonresonant(alpha, sp, n_max, family)
    running = []
    sup = 0.0
    for b in blocks:
        sup = max(sup, b.max_weight)
        running.append(sup)
    trend, from_block = _trend_of([b.max_weight for b in blocks])
    n0 = None
    if resonant:
        triples = enumerate_near_resonant(alpha, min(n_max, 4096), family)
        floats, _ = _family_roots(alpha, family)
        lo = min(abs(c) for c in floats) / 2.0
        hi = 2.0 * max(abs(c) for c in floats)
        if lo > 0:
            n0 = comparability_threshold(triples, lo, hi)
    return ScanReport(
        alpha=alpha.label(),
        regime=regime,
        s1=sp.s1,
        s2=sp.s2,
        n_max=n_max,
        blocks=blocks,
        running_sup=running,
        supremum=sup,
        trend=trend,
        nonincreasing_from=from_block,
        n0_comparable=n0,
    )


def _scan_resonant(alpha, sp, n_max, family):
    triples = enumerate_near_resonant(alpha, n_max, family)
    blocks = []
    for lo, hi in _dyadic_blocks(n_max):
        best = None
        for t in triples:
            if t.n < lo or t.n >= hi:  # fold signs: positive n only
                continue
            w = _resonant_weight(t.n, t.n1, t.n2, t.gap_float(), sp.s2)
            if best is None or w > best[0]:
                best = (w, t.n, t.n1)
        if best is not None:
            blocks.append(
                DyadicBlockStat(
                    lo=lo, hi=hi, min_gap=math.nan, argmin_n=0, argmin_n1=0,
                    max_weight=best[0], argmax_n=best[1], argmax_n1=best[2],
                )
            )
    return blocks


def _scan_nonresonant(alpha, sp, n_max, family):
    a = alpha.value
    if family == "B":
        r1, r2 = compute_c_roots(alpha)
    else:
        r1, r2 = compute_d_roots(alpha)
    span = 2 * n_max
    n1 = np.arange(-span, span + 1, dtype=float)
    blocks = []
    for lo, hi in _dyadic_blocks(n_max):
        best_w, best_n, best_n1 = 0.0, 0, 0
        for n in range(lo, hi):
            near = (np.abs(n1 - r1 * n) < 1.0) | (np.abs(n1 - r2 * n) < 1.0)
            keep = ~near
            if family == "D":
                keep &= n1 != 0.0
            if not np.any(keep):
                continue
            m1 = n1[keep]
            n2 = n - m1
            if family == "B":
                gap = np.abs(n**3 - a * (m1**3 + n2**3))
            else:
                gap = np.abs(a * n**3 - m1**3 - a * n2**3)
            w = (1.0 + n) ** (sp.s2 + 1.0) / (
                (1.0 + np.abs(m1)) ** sp.s1
                * (1.0 + np.abs(n2)) ** sp.s1
                * np.sqrt(1.0 + gap)
            )
            i = int(np.argmax(w))
            if w[i] > best_w:
                best_w, best_n, best_n1 = float(w[i]), n, int(m1[i])
        blocks.append(
            DyadicBlockStat(
                lo=lo, hi=hi, min_gap=math.nan, argmin_n=0, argmin_n1=0,
                max_weight=best_w, argmax_n=best_n, argmax_n1=best_n1,
            )
        )
    return blocks


def _trend_of(maxima: list, rel_tol: float = 1e-12):
    """('nondecreasing' | 'nonincreasing' | 'mixed', first block index from
    which the sequence is nonincreasing)."""
    if len(maxima) < 2:
        return "flat", 0
    nondec = all(b >= a * (1 - rel_tol) for a, b in zip(maxima, maxima[1:]))
    noninc = all(b <= a * (1 + rel_tol) for a, b in zip(maxima, maxima[1:]))
    from_block = len(maxima) - 1
    for start in range(len(maxima) - 1, -1, -1):
        tail = maxima[start:]
        if all(b <= a * (1 + rel_tol) for a, b in zip(tail, tail[1:])):
            from_block = start
        else:
            break
    if nondec and not noninc:
        return "nondecreasing", from_block
    if noninc:
        return "nonincreasing", from_block
    return "mixed", from_block
