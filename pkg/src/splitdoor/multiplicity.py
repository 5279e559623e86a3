"""Error from mass testing: null-fraction estimates, FNDR bound, effect interval.

Accepted instances are the periods whose p-value *exceeds* alpha, so the
error rate of interest is the false non-discovery rate: the expected share of
accepted instances whose focal and direct series are in fact dependent.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_LAMBDA = 0.5
DEFAULT_BINS = 20
DEFAULT_Z = 2.58


class IntervalMethod(enum.Enum):
    TOPK_EXACT = "topk_exact"
    MEAN_APPROX = "mean_approx"


def _pvals(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size < 1:
        raise ValueError("need at least one p-value")
    return p


def _pi_from_lambda(p: np.ndarray, lam: float) -> float:
    w = np.count_nonzero(p > lam)
    return float(min(1.0, max(0.0, w / (p.size * (1.0 - lam)))))


def storey_pi_indep(p_values, lam: float = DEFAULT_LAMBDA) -> float:
    """Storey's estimate of the fraction of true nulls, clamped to [0, 1]."""
    if not 0 <= lam < 1:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    return _pi_from_lambda(_pvals(p_values), lam)


def pvalue_histogram(p_values, B: int = DEFAULT_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Counts in B equal-width bins over [0, 1] (last bin closed)."""
    counts, edges = np.histogram(_pvals(p_values), bins=B, range=(0.0, 1.0))
    return counts, edges


def nettleton_pi_indep(p_values, B: int = DEFAULT_BINS) -> tuple[float, float]:
    """Histogram-adaptive null fraction; returns ``(pi_hat, lambda)``.

    The cut is the left-most bin whose count does not exceed the mean count
    of the bins to its right; if none qualifies the last bin is used.
    """
    if int(B) != B or B < 2:
        raise ValueError(f"B must be an integer >= 2, got {B}")
    B = int(B)
    p = _pvals(p_values)
    counts, _ = pvalue_histogram(p, B)
    I = B
    for i in range(B - 1):
        if counts[i] <= counts[i + 1:].mean():
            I = i + 1
            break
    lam = (I - 1) / B
    return _pi_from_lambda(p, lam), lam


def fndr_bound(alpha: float, pi_dep: float, m: int, W: int) -> float:
    """Upper bound on the expected share of dependent pairs among accepted ones."""
    if W < 1:
        raise ValueError("no discovered instances")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 <= pi_dep <= 1:
        raise ValueError(f"pi_dep must lie in [0, 1], got {pi_dep}")
    return (1.0 - alpha) * pi_dep * m / W


def phi_prime(phi: float, W: int, N: int) -> float:
    """Expected invalid share among the N focal estimates (taken at its maximum)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return phi * W / N


@dataclass(frozen=True)
class MultiplicityReport:
    pi_indep_storey: float
    pi_indep_nettleton: float
    lambda_storey: float
    lambda_nettleton: float
    pi_dep: float
    estimator: str
    phi: float | None
    phi_prime: float | None


def assess(
    p_values,
    alpha: float,
    W: int,
    N: int,
    estimator: str = "nettleton",
    B: int = DEFAULT_BINS,
    lam: float = DEFAULT_LAMBDA,
) -> MultiplicityReport:
    """Both null-fraction estimates plus the FNDR bound at ``alpha``.

    ``phi`` and ``phi_prime`` are None when nothing was accepted.
    """
    p = _pvals(p_values)
    storey = storey_pi_indep(p, lam)
    nett, lam_n = nettleton_pi_indep(p, B)
    if estimator == "nettleton":
        chosen = nett
    elif estimator == "storey":
        chosen = storey
    else:
        raise ValueError(f"unknown pi estimator {estimator!r}")
    pi_dep = 1.0 - chosen
    phi = fndr_bound(alpha, pi_dep, p.size, W) if W > 0 else None
    phi_p = phi_prime(phi, W, N) if phi is not None and N > 0 else None
    return MultiplicityReport(storey, nett, float(lam), lam_n, pi_dep, estimator, phi, phi_p)


@dataclass(frozen=True)
class EffectInterval:
    lower: float
    upper: float
    rho_hat: float
    rho_maxsum: float
    z: float
    method: IntervalMethod


def top_k_count(phi_prime: float, N: int) -> int:
    # round away float noise such as 0.3 * 10 = 3.0000000000000004 before ceil
    return min(N, max(0, math.ceil(round(phi_prime * N, 9))))


def effect_interval(
    focal_rhos,
    phi_prime: float,
    z: float = DEFAULT_Z,
    method: IntervalMethod = IntervalMethod.TOPK_EXACT,
) -> EffectInterval:
    """Interval for the mean effect allowing for invalid instances.

    The upper end is the usual ``z`` standard-error bound. The lower end also
    subtracts ``rho_maxsum / N``, where ``rho_maxsum`` is the largest sum any
    ``ceil(phi_prime * N)`` of the per-focal estimates can reach (or its
    approximation ``phi_prime * N * rho_hat``): invalid instances can only
    have pushed the estimate up.
    """
    r = np.asarray(focal_rhos, dtype=float).ravel()
    N = r.size
    if N == 0:
        raise ValueError("no focal estimates")
    if not 0 <= phi_prime <= 1:
        raise ValueError(f"phi_prime must lie in [0, 1], got {phi_prime}")
    method = IntervalMethod(method)
    rho = math.fsum(r) / N
    sigma = float(np.std(r, ddof=1)) if N > 1 else 0.0
    if method is IntervalMethod.TOPK_EXACT:
        k = top_k_count(phi_prime, N)
        maxsum = math.fsum(np.sort(r)[::-1][:k]) if k else 0.0
    else:
        maxsum = phi_prime * N * rho
    half = z * sigma / math.sqrt(N)
    return EffectInterval(rho - maxsum / N - half, rho + half, rho, maxsum, float(z), method)


def write_histogram_csv(p_values, path, B: int = DEFAULT_BINS) -> None:
    counts, edges = pvalue_histogram(p_values, B)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("bin_lo", "bin_hi", "count"))
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
