"""Exact continued fractions and Diophantine type estimation.

Quadratic surds (P + sqrt(D)) / Q with integer parts are carried exactly:
comparisons, floors and continued-fraction expansions use only integer
arithmetic, so "is this gap zero" and "is this root rational" are decidable
questions rather than tolerance calls.

The minimal type index of an irrational x measures how well it is
approximated by rationals: x has type nu when |x - m/n| >= K / n^{2+nu} for
some K and all m/n.  Through the convergents p_k/q_k of the continued
fraction, |x - p_k/q_k| is comparable to 1/(a_{k+1} q_k^2), so the local
exponent log(a_{k+1}) / log(q_k) estimates nu.  Early terms only constrain
the constant K, not the exponent, so the estimator reports the maximum of
the local exponents over the tail half of the expansion; for bounded
partial quotients (every quadratic surd) this tends to zero, the true
index.  Rationals get the infinity flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

# convergent denominators above this are meaningless for a 53-bit float
FLOAT_DENOM_LIMIT = 1 << 26


class QuadraticSurd:
    """Exact real number (P + sqrt(D)) / Q, integers P, D >= 0, Q != 0."""

    __slots__ = ("P", "D", "Q")

    def __init__(self, p: int, d: int, q: int):
        if q == 0:
            raise ValueError("Q must be nonzero")
        if d < 0:
            raise ValueError("D must be nonnegative")
        p, d, q = int(p), int(d), int(q)
        r = isqrt(d)
        if r * r == d:
            # rational in disguise: fold the radical into P
            p, d = p + r, 0
        if d == 0:
            g = math.gcd(p, q)
            if g > 1:
                p, q = p // g, q // g
            if q < 0:
                p, q = -p, -q
        self.P, self.D, self.Q = p, d, q

    @classmethod
    def from_fraction(cls, f: Fraction) -> "QuadraticSurd":
        return cls(f.numerator, 0, f.denominator)

    @property
    def is_rational(self) -> bool:
        return self.D == 0

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError("not a rational number")
        return Fraction(self.P, self.Q)

    def __float__(self) -> float:
        return (self.P + math.sqrt(self.D)) / self.Q

    def __repr__(self) -> str:
        return f"QuadraticSurd(P={self.P}, D={self.D}, Q={self.Q})"

    def to_json_dict(self) -> dict:
        return {"P": self.P, "D": self.D, "Q": self.Q}

    # exact sign of P' + sqrt(D') with integer P', D'
    @staticmethod
    def _sign_p_plus_sqrt(p: int, d: int) -> int:
        if p >= 0:
            return 1 if (p > 0 or d > 0) else 0
        # p < 0: p + sqrt(d) > 0  iff  d > p^2
        if d > p * p:
            return 1
        if d < p * p:
            return -1
        return 0

    def sign(self) -> int:
        s = self._sign_p_plus_sqrt(self.P, self.D)
        return s if self.Q > 0 else -s

    def sub_rational(self, f: Fraction) -> "QuadraticSurd":
        # (P + sqrt(D))/Q - a/b = (bP - aQ + sqrt(b^2 D)) / (bQ)
        a, b = f.numerator, f.denominator
        return QuadraticSurd(b * self.P - a * self.Q, b * b * self.D, b * self.Q)

    def mul_int(self, n: int) -> "QuadraticSurd":
        if n == 0:
            return QuadraticSurd(0, 0, 1)
        if n > 0:
            return QuadraticSurd(self.P * n, self.D * n * n, self.Q)
        # n < 0 flips the radical sign; negating numerator and denominator
        # restores the (P' + sqrt(D'))/Q' form:
        # (Pn - sqrt(D n^2))/Q = (-Pn + sqrt(D n^2))/(-Q)
        return QuadraticSurd(-self.P * n, self.D * n * n, -self.Q)

    def __lt__(self, other) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other) -> bool:
        return self._cmp(other) >= 0

    def _cmp(self, other) -> int:
        if isinstance(other, QuadraticSurd):
            if other.is_rational:
                return self.sub_rational(other.as_fraction()).sign()
            if self.is_rational:
                return -other.sub_rational(self.as_fraction()).sign()
            raise TypeError("comparison of two irrational surds is not supported")
        return self.sub_rational(Fraction(other)).sign()

    def floor(self) -> int:
        p, d, q = self.P, self.D, self.Q
        r = isqrt(d)
        if r * r == d:
            return (p + r) // q
        if q > 0:
            return (p + r) // q
        return -((p + r) // (-q)) - 1

    def continued_fraction(self, depth: int):
        """Partial quotients with exact arithmetic.

        Returns (quotients, period_start, period_length); the period fields
        are None for rationals (terminating expansion) and also when the
        requested depth is too small to close the cycle.
        """
        if self.is_rational:
            return _rational_cf(Fraction(self.P, self.Q)), None, None
        p, d, q = self.P, self.D, self.Q
        if (d - p * p) % q != 0:
            p, d, q = p * abs(q), d * q * q, q * abs(q)
        quotients = []
        seen: dict[tuple[int, int], int] = {}
        period_start = period_len = None
        for k in range(depth):
            state = (p, q)
            if state in seen and period_start is None:
                period_start = seen[state]
                period_len = k - period_start
            seen.setdefault(state, k)
            a = QuadraticSurd(p, d, q).floor()
            quotients.append(a)
            p = a * q - p
            q = (d - p * p) // q
        return quotients, period_start, period_len


def surd_continued_fraction(x: QuadraticSurd, depth: int):
    """Exact partial quotients of a quadratic surd (terminating when x is
    rational); returns (quotients, period_start, period_length)."""
    return x.continued_fraction(depth)


def _rational_cf(f: Fraction) -> list[int]:
    out = []
    num, den = f.numerator, f.denominator
    while den:
        a = num // den
        out.append(a)
        num, den = den, num - a * den
    return out


def convergents(quotients: list[int]) -> list[Fraction]:
    ps, qs = [], []
    p_prev, p_prev2 = 1, 0
    q_prev, q_prev2 = 0, 1
    for a in quotients:
        p = a * p_prev + p_prev2
        q = a * q_prev + q_prev2
        ps.append(p)
        qs.append(q)
        p_prev2, p_prev = p_prev, p
        q_prev2, q_prev = q_prev, q
    return [Fraction(p, q) for p, q in zip(ps, qs)]


@dataclass
class DiophantineEstimate:
    value: float
    partial_quotients: list
    convergents: list = field(repr=False)
    nu_hat: float = 0.0
    is_rational: bool = False
    period_start: int | None = None
    period_length: int | None = None
    depth_used: int = 0
    precision_limited: bool = False
    local_exponents: list = field(default_factory=list, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "partial_quotients": list(self.partial_quotients),
            "convergents": [f"{c.numerator}/{c.denominator}" for c in self.convergents],
            "nu_hat": "infinity" if math.isinf(self.nu_hat) else self.nu_hat,
            "is_rational": self.is_rational,
            "period_start": self.period_start,
            "period_length": self.period_length,
            "depth_used": self.depth_used,
            "precision_limited": self.precision_limited,
        }


def _nu_from_quotients(quotients: list[int]) -> tuple[float, list[float]]:
    """Tail-half maximum of the local exponents log(a_{k+1}) / log(q_k)."""
    qs = [c.denominator for c in convergents(quotients)]
    locals_ = []
    for k in range(len(quotients) - 1):
        if qs[k] <= 1:
            continue
        locals_.append(math.log(quotients[k + 1]) / math.log(qs[k]))
    if not locals_:
        return 0.0, []
    tail = locals_[len(locals_) // 2 :]
    return max(tail) if tail else 0.0, locals_


def estimate_type_index(x, depth: int = 50) -> DiophantineEstimate:
    """Diophantine profile of x: continued fraction, convergents, nu-hat.

    x may be an exact QuadraticSurd or Fraction/int (preferred), or a float.
    Rationals are flagged and get the infinity value.  Float input is
    expanded only while the convergent denominators stay within the 53-bit
    precision budget; hitting the budget sets ``precision_limited`` rather
    than raising.
    """
    if isinstance(x, QuadraticSurd):
        quotients, pstart, plen = x.continued_fraction(depth)
        if x.is_rational:
            return _rational_estimate(float(x), quotients)
        cvs = convergents(quotients)
        nu, locals_ = _nu_from_quotients(quotients)
        return DiophantineEstimate(
            value=float(x),
            partial_quotients=quotients,
            convergents=cvs,
            nu_hat=nu,
            is_rational=False,
            period_start=pstart,
            period_length=plen,
            depth_used=len(quotients),
            local_exponents=locals_,
        )
    if isinstance(x, (Fraction, int)):
        f = Fraction(x)
        return _rational_estimate(float(f), _rational_cf(f))
    # float path: exact expansion of the binary rational, truncated at the
    # precision budget so the spurious deep tail of the float never leaks in
    f = Fraction(float(x))
    quotients_all = _rational_cf(f)
    quotients = []
    q_prev, q_prev2 = 0, 1  # convergent denominators q_{k-1}, q_{k-2}
    for a in quotients_all:
        q = a * q_prev + q_prev2
        if quotients and q > FLOAT_DENOM_LIMIT:
            break
        quotients.append(a)
        q_prev2, q_prev = q_prev, q
        if len(quotients) >= depth:
            break
    limited = len(quotients) < depth
    cvs = convergents(quotients)
    nu, locals_ = _nu_from_quotients(quotients)
    return DiophantineEstimate(
        value=float(x),
        partial_quotients=quotients,
        convergents=cvs,
        nu_hat=nu,
        is_rational=False,
        depth_used=len(quotients),
        precision_limited=limited,
        local_exponents=locals_,
    )


def _rational_estimate(value: float, quotients: list[int]) -> DiophantineEstimate:
    return DiophantineEstimate(
        value=value,
        partial_quotients=quotients,
        convergents=convergents(quotients),
        nu_hat=math.inf,
        is_rational=True,
        depth_used=len(quotients),
    )
