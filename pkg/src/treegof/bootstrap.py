"""Batched multiplier bootstrap for max-type constraint statistics.

The estimate columns are dependent within a short range, so variances
are estimated from non-overlapping batch sums of deviations.  The test
statistic is the largest studentized column mean (absolute for equality
columns, signed for one-sided inequality columns); its null quantile
comes from Gaussian multipliers applied to the same batch sums.  A
quadratic-form statistic on the plug-in estimates is included for small
m as a classical comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .estimators import EstimateSequence, build_estimate_matrix, plugin_tetrads
from .tree import ConstraintSystem

__all__ = [
    "BootstrapConfig",
    "TestResult",
    "HotellingResult",
    "batched_diag",
    "test_statistic",
    "multiplier_draws",
    "bootstrap_coordinates",
    "quantile_from_draws",
    "run_test",
    "hotelling_statistic",
]

# columns whose batched variance falls below this are reported as
# degenerate and excluded from the max
DIAG_FLOOR = 1e-300

# multiplier chunk budget, in doubles, to bound peak memory
_CHUNK_BUDGET = 4_000_000


@dataclass(frozen=True)
class BootstrapConfig:
    """Knobs of one bootstrap test run.

    ``seed`` feeds a seed sequence from which the multiplier stream and
    the optional column-subsampling stream are split off, so one integer
    reproduces the full run.  ``subsample`` keeps that many columns,
    drawn without replacement after mode selection.
    """

    batch_size: int = 3
    num_multipliers: int = 1000
    alpha: float = 0.05
    seed: Union[int, np.random.SeedSequence, None] = None
    mode: str = "equalities"
    center: bool = True
    subsample: Optional[int] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.num_multipliers < 1:
            raise ValueError("num_multipliers must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.mode not in ("equalities", "all"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.subsample is not None and self.subsample < 1:
            raise ValueError("subsample must be at least 1 when given")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    quantile: float
    p_value: float
    reject: bool
    k_effective: int
    diag_floor_hits: int


@dataclass(frozen=True)
class HotellingResult:
    statistic: float
    dof: int
    rank: int


def _batch_sums(values: np.ndarray, batch_size: int):
    """Non-overlapping batch sums of deviations from the overall mean.

    Rows beyond the largest multiple of the batch size are not batched
    (the column means still use every row).
    """
    rows = values.shape[0]
    omega = rows // batch_size
    if omega < 2:
        raise ValueError(
            f"{rows} rows with batch size {batch_size} leave {omega} batches; "
            "need at least 2"
        )
    dev = values - values.mean(axis=0)
    dev = dev[: omega * batch_size]
    sums = dev.reshape(omega, batch_size, values.shape[1]).sum(axis=1)
    return sums, omega


def batched_diag(seq: EstimateSequence, batch_size: int) -> np.ndarray:
    """Per-column variance proxies from batch sums: the diagonal of the
    batched covariance estimator."""
    sums, omega = _batch_sums(seq.values, batch_size)
    return (sums**2).sum(axis=0) / (batch_size * omega)


def _parts(seq: EstimateSequence, batch_size: int):
    sums, omega = _batch_sums(seq.values, batch_size)
    diag = (sums**2).sum(axis=0) / (batch_size * omega)
    keep = diag > DIAG_FLOOR
    if not keep.any():
        raise ValueError("every column is numerically constant; nothing to test")
    return sums, omega, diag, keep


def test_statistic(seq: EstimateSequence, batch_size: int) -> float:
    """Largest studentized column mean, scaled by the square root of the
    row count.

    Equality columns contribute absolute values; one-sided columns
    contribute signed values, so only positive deviations count against
    the null.
    """
    _, _, diag, keep = _parts(seq, batch_size)
    ybar = seq.values.mean(axis=0)
    z = math.sqrt(seq.n_rows) * ybar[keep] / np.sqrt(diag[keep])
    contrib = np.where(seq.one_sided[keep], z, np.abs(z))
    return float(contrib.max())


def _coordinate_chunks(sums, omega, scale, num_draws, seed, multipliers):
    """Yield (start, coordinate-chunk) pairs; one generator serves both
    the sup-norm reduction and the raw-coordinate diagnostic.

    A single generator instance produces the stream in row-major order,
    so the chunk size never changes the values drawn.
    """
    rng = np.random.default_rng(seed)
    if multipliers is not None:
        multipliers = np.asarray(multipliers, dtype=float)
        if multipliers.shape != (num_draws, omega):
            raise ValueError(
                f"multipliers must have shape {(num_draws, omega)}, "
                f"got {multipliers.shape}"
            )
    chunk = max(1, _CHUNK_BUDGET // max(omega, 1))
    start = 0
    while start < num_draws:
        take = min(chunk, num_draws - start)
        if multipliers is None:
            e = rng.standard_normal((take, omega))
        else:
            e = multipliers[start : start + take]
        yield start, (e @ sums) / scale
        start += take


def multiplier_draws(
    seq: EstimateSequence,
    batch_size: int,
    num_draws: int,
    seed,
    multipliers=None,
) -> np.ndarray:
    """Bootstrap sup-norm draws, in draw order.

    Each draw applies one standard-normal multiplier per batch to the
    batch sums, studentizes per column, and reduces like the test
    statistic (absolute for equality columns, signed for one-sided
    ones).  ``multipliers`` overrides the random draw for testing.
    """
    sums, omega, diag, keep = _parts(seq, batch_size)
    scale = math.sqrt(batch_size * omega) * np.sqrt(diag[keep])
    kept_sums = sums[:, keep]
    one_sided = seq.one_sided[keep]
    out = np.empty(num_draws)
    for start, coord in _coordinate_chunks(
        kept_sums, omega, scale, num_draws, seed, multipliers
    ):
        contrib = np.where(one_sided, coord, np.abs(coord))
        out[start : start + coord.shape[0]] = contrib.max(axis=1)
    return out


def bootstrap_coordinates(
    seq: EstimateSequence,
    batch_size: int,
    num_draws: int,
    seed,
    multipliers=None,
) -> np.ndarray:
    """Raw studentized bootstrap coordinates, one row per draw and one
    column per kept (non-degenerate) column.

    Diagnostic companion to ``multiplier_draws``: the same seed gives
    coordinates whose signed/absolute row maxima are exactly the draws.
    Conditionally on the data, every coordinate has variance 1.
    """
    sums, omega, diag, keep = _parts(seq, batch_size)
    scale = math.sqrt(batch_size * omega) * np.sqrt(diag[keep])
    kept_sums = sums[:, keep]
    out = np.empty((num_draws, int(keep.sum())))
    for start, coord in _coordinate_chunks(
        kept_sums, omega, scale, num_draws, seed, multipliers
    ):
        out[start : start + coord.shape[0]] = coord
    return out


def quantile_from_draws(draws: np.ndarray, alpha: float) -> float:
    """Upper empirical quantile: the ceil((1-alpha) * E)-th order
    statistic, clamped into range."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    draws = np.sort(np.asarray(draws, dtype=float))
    e = draws.shape[0]
    idx = min(max(int(math.ceil((1.0 - alpha) * e)), 1), e)
    return float(draws[idx - 1])


def run_test(
    data, constraints: ConstraintSystem, config: BootstrapConfig
) -> TestResult:
    """Full bootstrap test of the constraint system on one dataset."""
    if isinstance(config.seed, np.random.SeedSequence):
        ss = config.seed
    else:
        ss = np.random.SeedSequence(config.seed)
    mult_ss, sub_ss = ss.spawn(2)
    subsample = None
    if config.subsample is not None:
        subsample = (config.subsample, sub_ss)
    seq = build_estimate_matrix(
        data,
        constraints,
        mode=config.mode,
        subsample=subsample,
        center=config.center,
    )
    if seq.n_columns == 0:
        raise ValueError("constraint system yields no test columns")
    sums, omega, diag, keep = _parts(seq, config.batch_size)
    ybar = seq.values.mean(axis=0)
    z = math.sqrt(seq.n_rows) * ybar[keep] / np.sqrt(diag[keep])
    stat = float(np.where(seq.one_sided[keep], z, np.abs(z)).max())

    scale = math.sqrt(config.batch_size * omega) * np.sqrt(diag[keep])
    kept_sums = sums[:, keep]
    one_sided = seq.one_sided[keep]
    draws = np.empty(config.num_multipliers)
    for start, coord in _coordinate_chunks(
        kept_sums, omega, scale, config.num_multipliers, mult_ss, None
    ):
        contrib = np.where(one_sided, coord, np.abs(coord))
        draws[start : start + coord.shape[0]] = contrib.max(axis=1)

    quantile = quantile_from_draws(draws, config.alpha)
    p_value = (float(np.count_nonzero(draws >= stat)) + 1.0) / (
        config.num_multipliers + 1.0
    )
    return TestResult(
        statistic=stat,
        quantile=quantile,
        p_value=p_value,
        reject=bool(stat > quantile),
        k_effective=int(keep.sum()),
        diag_floor_hits=int((~keep).sum()),
    )


def _sym_pairs(m: int):
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    index = {p: k for k, p in enumerate(pairs)}
    return pairs, index


def hotelling_statistic(
    data, constraints: ConstraintSystem, rank_rtol: Optional[float] = None
) -> HotellingResult:
    """Quadratic-form statistic on the plug-in equality estimates.

    The covariance of the plug-in vector is estimated by the delta
    method: gradients of each polynomial with respect to the symmetric
    second-moment entries, propagated through the Gaussian fourth-moment
    formula cov(s_ab, s_cd) = (s_ac s_bd + s_ad s_bc) / n.  The matrix
    is inverted by eigendecomposition with eigenvalues below
    ``rank_rtol`` times the largest treated as zero.

    The default cutoff is max(1e-10, 10/n): at singular points of the
    model the plug-in covariance is rank-deficient in population, and
    sampling noise lifts the null eigenvalues to order 1/n, so a cutoff
    of that order is needed to recover the population rank.

    Returns the statistic, the column count as nominal degrees of
    freedom, and the numerical rank actually used.
    """
    m = constraints.m
    if m > 8:
        raise ValueError("quadratic-form statistic is limited to m <= 8")
    x = np.asarray(data.data if hasattr(data, "data") else data, dtype=float)
    n = x.shape[0]
    k_cols = constraints.n_equality_terms
    if k_cols == 0:
        raise ValueError("constraint system has no equality columns")
    if n <= k_cols:
        raise ValueError(f"need n > {k_cols} rows for {k_cols} columns, got {n}")
    tau = plugin_tetrads(x, constraints)
    s = x.T @ x / n

    pairs, index = _sym_pairs(m)
    grad = np.zeros((k_cols, len(pairs)))

    def bump(row, i, j, value):
        grad[row, index[(min(i, j), max(i, j))]] += value

    for row, ((a, b), (c, d)) in enumerate(constraints.equality_column_pairs()):
        bump(row, a, b, s[c, d])
        bump(row, c, d, s[a, b])
        bump(row, a, d, -s[c, b])
        bump(row, c, b, -s[a, d])

    moment_cov = np.empty((len(pairs), len(pairs)))
    for u, (a, b) in enumerate(pairs):
        for v, (c, d) in enumerate(pairs):
            moment_cov[u, v] = (s[a, c] * s[b, d] + s[a, d] * s[b, c]) / n
    v_hat = grad @ moment_cov @ grad.T

    eigvals, eigvecs = np.linalg.eigh(v_hat)
    top = eigvals[-1]
    if top <= 0:
        return HotellingResult(0.0, k_cols, 0)
    rtol = max(1e-10, 10.0 / n) if rank_rtol is None else rank_rtol
    keep = eigvals > rtol * top
    basis = eigvecs[:, keep]
    projected = basis.T @ tau
    stat = float(projected @ (projected / eigvals[keep]))
    return HotellingResult(stat, k_cols, int(keep.sum()))
