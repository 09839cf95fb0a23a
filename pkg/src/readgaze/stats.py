"""Statistical test battery: Mann-Whitney U, independent two-sample t,
Hotelling's T-squared, Cohen's kappa, with Bonferroni adjustment.

The null-distribution math is implemented here directly (rank handling,
exact enumeration, continued-fraction incomplete beta); NumPy supplies
array plumbing and linear algebra only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateMarginals,
    DomainError,
    EmptySample,
    LengthMismatch,
    SingularCovariance,
    ZeroVariance,
)

#: Exact Mann-Whitney enumeration below this product; normal approx above.
EXACT_MWU_LIMIT = 64
#: Pooled covariance with condition number at or above this is singular.
COVARIANCE_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class TestResult:
    """Outcome of one hypothesis test."""

    __test__ = False  # not a pytest collection target

    statistic: float
    p_value: float
    p_adjusted: float
    n1: int
    n2: int
    method: str

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "p_adjusted": self.p_adjusted,
            "n1": self.n1,
            "n2": self.n2,
            "method": self.method,
        }


def bonferroni(p: float, comparisons: int) -> float:
    """Family-wise adjusted p: min(1, p * m)."""
    return min(1.0, p * comparisons)


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not (x > 0) or math.isinf(x) or math.isnan(x):
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def normal_cdf(z: float) -> float:
    """Standard normal CDF; exactly 0.5 at z = 0."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 500
    eps = 3e-15
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise DomainError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def reg_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0 and b > 0):
        raise DomainError(f"reg_incomplete_beta requires a, b > 0, got a={a} b={b}")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"reg_incomplete_beta requires 0 <= x <= 1, got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (
        ln_gamma(a + b)
        - ln_gamma(a)
        - ln_gamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _beta_cf(a, b, x) / a
    return 1.0 - bt * _beta_cf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with df degrees of freedom (t >= 0)."""
    if t < 0:
        raise DomainError("student_t_sf expects t >= 0")
    x = df / (df + t * t)
    return 0.5 * reg_incomplete_beta(df / 2.0, 0.5, x)


def f_sf(f: float, d1: float, d2: float) -> float:
    """P(F > f) for the F distribution with (d1, d2) degrees of freedom."""
    if f < 0:
        raise DomainError("f_sf expects f >= 0")
    x = d2 / (d2 + d1 * f)
    return reg_incomplete_beta(d2 / 2.0, d1 / 2.0, x)


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    sorted_vals = values[order]
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        avg = 0.5 * (i + j) + 1.0  # average of ranks i+1 .. j+1
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """U for group a: greater-than pairs plus half the tied pairs."""
    gt = (a[:, None] > b[None, :]).sum()
    eq = (a[:, None] == b[None, :]).sum()
    return float(gt) + 0.5 * float(eq)


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Two-sided Mann-Whitney U test with midrank tie handling.

    Small problems (n1*n2 <= 64) get the exact permutation null: every
    way of splitting the pooled values is enumerated and the two-sided p
    is the probability of a U at least as far from the null mean as the
    observed one. Larger problems use the normal approximation with tie
    and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise EmptySample("both samples must be non-empty")

    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0

    if n1 * n2 <= EXACT_MWU_LIMIT:
        # exact: uniform over all C(n1+n2, n1) group assignments
        obs_dev = abs(u1 - mu)
        hits = 0
        total = 0
        idx = range(n1 + n2)
        for combo in itertools.combinations(idx, n1):
            mask = np.zeros(n1 + n2, dtype=bool)
            mask[list(combo)] = True
            u = _u_statistic(pooled[mask], pooled[~mask])
            total += 1
            if abs(u - mu) >= obs_dev - 1e-12:
                hits += 1
        p = hits / total
        method = "mann-whitney-u-exact"
    else:
        n = n1 + n2
        _, tie_counts = np.unique(pooled, return_counts=True)
        tie_term = float((tie_counts**3 - tie_counts).sum()) / (n * (n - 1))
        sigma2 = (n1 * n2 / 12.0) * ((n + 1) - tie_term)
        if sigma2 <= 0:
            # every value identical: no evidence against the null
            p = 1.0
        else:
            dev = u1 - mu
            if dev > 0:
                z = (dev - 0.5) / math.sqrt(sigma2)
            elif dev < 0:
                z = (dev + 0.5) / math.sqrt(sigma2)
            else:
                z = 0.0
            p = min(1.0, 2.0 * (1.0 - normal_cdf(abs(z))))
        method = "mann-whitney-u-normal"

    return TestResult(
        statistic=u1, p_value=p, p_adjusted=p, n1=n1, n2=n2, method=method
    )


# ---------------------------------------------------------------------------
# Independent two-sample t-test
# ---------------------------------------------------------------------------

def t_test_ind(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Pooled-variance two-sample t-test, two-sided."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise EmptySample("t-test needs at least two observations per group")
    df = n1 + n2 - 2
    s1 = float(a.var(ddof=1))
    s2 = float(b.var(ddof=1))
    pooled = ((n1 - 1) * s1 + (n2 - 1) * s2) / df
    if pooled <= 0:
        raise ZeroVariance("pooled variance is zero")
    se = math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    t = (float(a.mean()) - float(b.mean())) / se
    p = min(1.0, 2.0 * student_t_sf(abs(t), df))
    return TestResult(statistic=t, p_value=p, p_adjusted=p, n1=n1, n2=n2, method="t-test-ind")


# ---------------------------------------------------------------------------
# Hotelling's T-squared
# ---------------------------------------------------------------------------

def hotelling_t2(a: np.ndarray, b: np.ndarray) -> TestResult:
    """Two-sample Hotelling T-squared with an F-distributed p-value."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    n1, p_dim = a.shape
    n2, p_dim_b = b.shape
    if p_dim != p_dim_b:
        raise LengthMismatch(f"dimension mismatch: {p_dim} vs {p_dim_b}")
    if n1 < 2 or n2 < 2:
        raise EmptySample("each group needs at least two observations")
    if n1 + n2 <= p_dim + 1:
        raise EmptySample(
            f"need n1+n2 > p+1 (got n1+n2={n1 + n2}, p={p_dim})"
        )
    s1 = np.cov(a, rowvar=False, ddof=1).reshape(p_dim, p_dim)
    s2 = np.cov(b, rowvar=False, ddof=1).reshape(p_dim, p_dim)
    pooled = ((n1 - 1) * s1 + (n2 - 1) * s2) / (n1 + n2 - 2)
    cond = float(np.linalg.cond(pooled))
    if not math.isfinite(cond) or cond >= COVARIANCE_CONDITION_LIMIT:
        raise SingularCovariance(
            f"pooled covariance condition number {cond:.3e} exceeds limit"
        )
    d = a.mean(axis=0) - b.mean(axis=0)
    t2 = float(n1 * n2 / (n1 + n2) * d @ np.linalg.solve(pooled, d))
    d2 = n1 + n2 - p_dim - 1
    f_stat = t2 * d2 / ((n1 + n2 - 2) * p_dim)
    p = f_sf(f_stat, p_dim, d2)
    return TestResult(
        statistic=t2, p_value=p, p_adjusted=p, n1=n1, n2=n2, method="hotelling-t2"
    )


def pairwise_hotelling(
    groups: "Dict[str, np.ndarray]",
) -> "Dict[Tuple[str, str], TestResult]":
    """All-pairs Hotelling tests with Bonferroni over C(k, 2) comparisons."""
    names = list(groups)
    pairs = list(itertools.combinations(names, 2))
    m = len(pairs)
    out: Dict[Tuple[str, str], TestResult] = {}
    for x, y in pairs:
        res = hotelling_t2(groups[x], groups[y])
        out[(x, y)] = replace(res, p_adjusted=bonferroni(res.p_value, m))
    return out


def format_pairwise_matrix(
    results: "Dict[Tuple[str, str], TestResult]", adjusted: bool = True
) -> str:
    """Render pairwise p-values as an upper-triangle delimited table."""
    names: list[str] = []
    for x, y in results:
        if x not in names:
            names.append(x)
        if y not in names:
            names.append(y)
    lines = ["\t" + "\t".join(names[1:])]
    for i, row in enumerate(names[:-1]):
        cells = [row]
        for col in names[1:]:
            j = names.index(col)
            if j <= i:
                cells.append("")
            else:
                res = results.get((row, col)) or results.get((col, row))
                p = res.p_adjusted if adjusted else res.p_value
                cells.append(f"{p:.4g}")
        lines.append("\t".join(cells))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Cohen's kappa
# ---------------------------------------------------------------------------

def cohens_kappa(labels_r1: Sequence, labels_r2: Sequence) -> float:
    """Chance-corrected agreement between two label sequences."""
    if len(labels_r1) != len(labels_r2):
        raise LengthMismatch(
            f"label sequences differ in length: {len(labels_r1)} vs {len(labels_r2)}"
        )
    n = len(labels_r1)
    if n == 0:
        raise EmptySample("label sequences are empty")
    p_o = sum(1 for x, y in zip(labels_r1, labels_r2) if x == y) / n
    cats = set(labels_r1) | set(labels_r2)
    p_e = sum(
        (sum(1 for x in labels_r1 if x == c) / n)
        * (sum(1 for y in labels_r2 if y == c) / n)
        for c in cats
    )
    if p_e >= 1.0:
        if p_o == 1.0:
            return 1.0
        raise DegenerateMarginals("expected agreement is 1 but observed is not")
    return (p_o - p_e) / (1.0 - p_e)
