"""Multi-seed experiment statistics.

Paired t-tests (two-tailed p-values through the regularized incomplete beta
function, evaluated by modified-Lentz continued fraction to ~1e-10, plenty
for 3-significant-figure agreement), mean +/- sample-std summaries, and the
percentage deltas used in the result tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-14
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """P(|T_df| >= |t|)."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t: float, df: float) -> float:
    half_tail = 0.5 * t_two_tailed_p(t, df)
    return 1.0 - half_tail if t >= 0 else half_tail


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    zero_variance: bool = False


def paired_t_test(a, b) -> TTestResult:
    """Two-tailed paired t-test: t = mean(d) / (sd(d)/sqrt(n)), d = a - b,
    sample standard deviation (n-1 denominator)."""
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs n >= 2")
    d = [x - y for x, y in zip(a, b)]
    mean = sum(d) / n
    var = sum((x - mean) ** 2 for x in d) / (n - 1)
    df = n - 1
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, df=df, zero_variance=True)
        return TTestResult(t=math.copysign(math.inf, mean), p=0.0, df=df,
                           zero_variance=True)
    t = mean / math.sqrt(var / n)
    return TTestResult(t=t, p=t_two_tailed_p(t, df), df=df)


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float | None  # None when undefined (n < 2)
    n: int

    def __str__(self) -> str:
        if self.std is None:
            return f"{self.mean:.1f} (n=1, std undefined)"
        return f"{self.mean:.1f} ± {self.std:.1f}"


def summarize(values) -> Summary:
    values = [float(v) for v in values]
    if not values:
        raise ValueError("summarize needs at least one value")
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return Summary(mean=mean, std=None, n=1)
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return Summary(mean=mean, std=math.sqrt(var), n=n)


def percent_delta(cond: float, baseline: float) -> float:
    """(cond - baseline) / baseline, in percent."""
    return (cond - baseline) / baseline * 100.0
