"""Distance correlation and the window-resampling randomization test.

The null hypothesis for a period is that its focal series is independent of
the target's direct-visit series. The null distribution is simulated by
swapping in whole focal windows drawn from a pool of observed windows, so
within-window autocorrelation survives resampling.

Every statistic, observed or resampled, goes through :func:`_dcor_rows`, so an
observed window that reappears in the pool gives a bit-identical statistic and
ties are compared exactly.
"""
from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import PairPeriod, is_constant

DEFAULT_RESAMPLES = 1000


@functools.lru_cache(maxsize=None)
def _triangle(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n)
    weight = np.where(iu == ju, 1.0, 2.0)
    return iu, ju, weight


def _centered_batch(windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Double-centered |v_i - v_j| matrices, upper triangle only.

    Returns ``(weighted, plain)``: the triangle with off-diagonal entries
    doubled, and the plain triangle. ``(weighted * plain).sum()`` over a pair of
    symmetric matrices equals the sum over all n^2 products; doubling is
    exact in floating point, so the statistic stays exactly symmetric.
    """
    d = np.abs(windows[:, :, None] - windows[:, None, :])
    row = d.mean(axis=2)
    c = d - row[:, :, None] - row[:, None, :] + d.mean(axis=(1, 2))[:, None, None]
    iu, ju, weight = _triangle(windows.shape[1])
    plain = np.ascontiguousarray(c[:, iu, ju])
    return plain * weight, plain


def _centered(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """V-statistic centered distance matrix of one vector (see _centered_batch)."""
    w, p = _centered_batch(v[None, :])
    return w[0], p[0]


def _dcor_rows(a_rows: np.ndarray, a_var: np.ndarray, b: np.ndarray, b_var: float) -> np.ndarray:
    # sums (not means) of products: the 1/n^2 factors cancel in the ratio
    cov = (a_rows * b).sum(axis=-1)
    denom = np.sqrt(a_var * b_var)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(denom > 0, cov / denom, 0.0)
    return np.sqrt(np.clip(r2, 0.0, 1.0))


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("distance correlation needs at least 2 observations")
    return x, y


def distance_correlation(x, y) -> float:
    """Sample distance correlation of two equal-length vectors.

    Uses the biased (V-statistic) double-centering estimator. Returns 0 when
    either vector is constant.

    >>> distance_correlation([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    1.0
    """
    x, y = _check_pair(x, y)
    a_w, a_p = _centered(x)
    b_w, b_p = _centered(y)
    a_var = np.array([(a_w * a_p).sum()])
    return float(_dcor_rows(a_w[None, :], a_var, b_p, float((b_w * b_p).sum()))[0])


def resampling_pvalue(observed: float, null_stats) -> float:
    """Add-one p-value: ``(1 + #{null >= observed}) / (1 + R)``."""
    null_stats = np.asarray(null_stats, dtype=float)
    if null_stats.size < 1:
        raise ValueError("need at least one null statistic")
    return float((1 + np.count_nonzero(null_stats >= observed)) / (1 + null_stats.size))


def derive_seed(base_seed: int, focal_id: str, target_id: str, period_index: int) -> int:
    """Stable 64-bit seed for one period, independent of scheduling."""
    msg = f"{int(base_seed)}\x1f{focal_id}\x1f{target_id}\x1f{int(period_index)}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class IndependenceResult:
    focal_id: str
    target_id: str
    period_index: int
    statistic: float
    p_value: float
    n_resamples: int
    seed: int
    degenerate: bool = False

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.focal_id, self.target_id, self.period_index)


class NullPool:
    """Pool of focal windows used to simulate the null.

    Centered distance matrices are computed once per window. ``keys``
    (``(focal_id, period_index)``) let a period's own window be left out of
    its null draws.
    """

    def __init__(self, windows, keys: Sequence | None = None):
        windows = np.asarray(windows, dtype=float)
        if windows.ndim != 2 or len(windows) == 0:
            raise ValueError("null pool is empty")
        self.windows = windows
        self.tau = windows.shape[1]
        self.keys = list(keys) if keys is not None else None
        if self.keys is not None and len(self.keys) != len(windows):
            raise ValueError("keys and windows differ in length")
        self._index = {k: i for i, k in enumerate(self.keys)} if self.keys else {}
        self.centered, plain = _centered_batch(windows)
        self.var = (self.centered * plain).sum(axis=1)

    def __len__(self) -> int:
        return len(self.windows)

    @classmethod
    def from_periods(cls, periods: Sequence[PairPeriod]) -> "NullPool":
        """One window per (focal, period), in sorted key order."""
        seen: dict[tuple[str, int], np.ndarray] = {}
        for pp in periods:
            seen.setdefault(pp.focal_key, pp.x_window)
        keys = sorted(seen)
        if not keys:
            raise ValueError("null pool is empty")
        return cls(np.stack([seen[k] for k in keys]), keys)

    def own_index(self, pp: PairPeriod) -> int | None:
        if self.keys is not None:
            return self._index.get(pp.focal_key)
        hits = np.flatnonzero(np.all(self.windows == pp.x_window, axis=1))
        return int(hits[0]) if hits.size else None


def randomization_pvalue(
    pp: PairPeriod,
    pool,
    R: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> IndependenceResult:
    """Randomization p-value for independence of X and Y_D in one period.

    Each of the ``R`` null draws replaces the observed focal window with a
    window drawn uniformly (with replacement) from ``pool``, skipping the
    period's own window when the pool holds anything else. ``seed`` is used
    as given; callers wanting per-period seeds use :func:`derive_seed`.
    """
    if not isinstance(pool, NullPool):
        windows = [np.asarray(w, dtype=float) for w in pool]
        if not windows:
            raise ValueError("null pool is empty")
        if any(w.shape != (pp.tau,) for w in windows):
            raise ValueError(f"pool windows must all have length tau={pp.tau}")
        pool = NullPool(np.stack(windows))
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if pool.tau != pp.tau:
        raise ValueError(f"pool windows have length {pool.tau}, period has tau={pp.tau}")

    degenerate = is_constant(pp.x_window) or is_constant(pp.y_d_window)
    own = pool.own_index(pp)
    b_w, b = _centered(pp.y_d_window)
    b_var = float((b_w * b).sum())
    if own is not None:
        a_obs = pool.centered[own][None, :]
        a_obs_var = pool.var[own : own + 1]
    else:
        a_w, a_p = _centered(pp.x_window)
        a_obs = a_w[None, :]
        a_obs_var = np.array([(a_w * a_p).sum()])
    s0 = float(_dcor_rows(a_obs, a_obs_var, b, b_var)[0])

    rng = np.random.default_rng(seed)
    if own is not None and len(pool) > 1:
        idx = rng.integers(0, len(pool) - 1, size=R)
        idx += idx >= own
    else:
        idx = rng.integers(0, len(pool), size=R)
    null = _dcor_rows(pool.centered[idx], pool.var[idx], b, b_var)
    return IndependenceResult(
        focal_id=pp.focal_id,
        target_id=pp.target_id,
        period_index=pp.period_index,
        statistic=s0,
        p_value=resampling_pvalue(s0, null),
        n_resamples=int(R),
        seed=int(seed),
        degenerate=degenerate,
    )
