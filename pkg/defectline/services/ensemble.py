"""
Ensemble Engine
Lifetime sweep over the Ginibre scale sigma: 2x2 matrices evolve under
M0 + t diag(s, -s), the mean quaternionic-transient lifetime is taken per sigma
and fitted by an ordinary least-squares line.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np
from scipy import stats

from defectline.config import Settings, get_settings
from defectline.errors import EmptyFitError, InvalidArgumentError
from defectline.schemas.ensemble import FitSummary, SweepConfig, SweepResult, SweepRow
from defectline.services.linalg_core import sample_ginibre
from defectline.services.tracker import LifetimeRecord, measure_lifetime

logger = logging.getLogger(__name__)

_SEED_MASK = (1 << 64) - 1
# denominator of the time-energy relation t_max ~ 1.6 sigma
UNCERTAINTY_SLOPE = 1.6


def trial_seed(base_seed: int, sigma_index: int, trial_index: int, paired: bool = False) -> int:
    """
    64-bit seed of one trial, mixed by SeedSequence from (base, sigma index,
    trial index). Paired sweeps drop the sigma index so every sigma sees the
    same unit normals.
    """
    entropy = [base_seed & _SEED_MASK, trial_index] if paired else [base_seed & _SEED_MASK, sigma_index, trial_index]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _sigma_block(args) -> list[list[LifetimeRecord]]:
    config, sigma_index, settings = args
    sigma = config.sigmas[sigma_index]
    t_range = config.t_range_for(sigma)
    out = []
    for j in range(config.trials_per_sigma):
        m0 = sample_ginibre(2, sigma, trial_seed(config.base_seed, sigma_index, j, config.paired))
        out.append(
            measure_lifetime(
                m0,
                config.s,
                t_range,
                config.dt * sigma,
                sigma=sigma,
                verify=config.verify_every > 0 and j % config.verify_every == 0,
                settings=settings,
            )
        )
    return out


def _row(sigma: float, trials: list[list[LifetimeRecord]]) -> SweepRow:
    records = [r for rs in trials for r in rs]
    kept = np.array([r.t_max for r in records if not r.clipped])
    clipped = sum(r.clipped for r in records)
    checks = {"n_verified": sum(r.verified is True for r in records), "n_failed_checks": sum(r.verified is False for r in records)}
    if clipped:
        logger.info("sigma=%g: %d clipped transient(s) left out of the mean", sigma, clipped)
    if checks["n_failed_checks"]:
        logger.warning("sigma=%g: %d transient(s) without an off-plane root pair", sigma, checks["n_failed_checks"])
    if kept.size == 0:
        return SweepRow(sigma=sigma, n_clipped=clipped, n_trials=len(trials), **checks)
    stderr = float(kept.std(ddof=1) / math.sqrt(kept.size)) if kept.size > 1 else 0.0
    return SweepRow(
        sigma=sigma,
        mean_t_max=float(kept.mean()),
        n_transients=int(kept.size),
        stderr=stderr,
        n_clipped=clipped,
        n_trials=len(trials),
        **checks,
    )


def fit_rows(rows: list[SweepRow]) -> Optional[FitSummary]:
    """Unweighted OLS of mean_t_max on sigma; None with fewer than two points."""
    pts = [(r.sigma, r.mean_t_max) for r in rows if r.mean_t_max is not None]
    if not pts:
        raise EmptyFitError("no transient recorded at any sigma")
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    xs, ys = map(np.array, zip(*pts))
    fit = stats.linregress(xs, ys)
    return FitSummary(
        intercept=float(fit.intercept),
        slope=float(fit.slope),
        r2=float(fit.rvalue**2),
        n_points=len(pts),
    )


def run_sweep(config: SweepConfig, settings: Optional[Settings] = None) -> SweepResult:
    settings = settings or get_settings()
    workers = max(config.workers, settings.SWEEP_WORKERS)
    jobs = [(config, i, settings) for i in range(len(config.sigmas))]
    logger.info(
        "sweep: %d sigma value(s) x %d trials, s=%s, workers=%d",
        len(config.sigmas),
        config.trials_per_sigma,
        config.s,
        workers,
    )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map keeps submission order
            blocks = list(pool.map(_sigma_block, jobs))
    else:
        blocks = [_sigma_block(job) for job in jobs]

    rows = [_row(sigma, block) for sigma, block in zip(config.sigmas, blocks)]
    fit = fit_rows(rows)
    result = SweepResult(per_sigma=rows, fit=fit, config=config)
    if fit is not None:
        fit.uncertainty = uncertainty_check(result)
        logger.info("fit: t_max = %.6g + %.6g sigma (r2=%.4f)", fit.intercept, fit.slope, fit.r2)
    return result


def uncertainty_check(result: SweepResult) -> float:
    """Mean over sigma of t_max(sigma) / (1.6 sigma)."""
    ratios = [r.mean_t_max / (UNCERTAINTY_SLOPE * r.sigma) for r in result.per_sigma if r.mean_t_max is not None]
    if not ratios:
        raise EmptyFitError("no transient recorded at any sigma")
    return float(np.mean(ratios))


def scaling_ratio(
    sigma: float,
    trials: int,
    s: complex = 1.0,
    dt: float = 0.01,
    base_seed: int = 0,
    settings: Optional[Settings] = None,
) -> float:
    """
    Mean lifetime at 2 sigma over mean lifetime at sigma on paired trials.
    Rescaling M0 and t together maps transients onto each other, so this is 2.
    """
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    s = complex(s)
    settings = settings or get_settings()
    # same grid in units of sigma at both scales
    half = (8 * sigma + 8) / sigma
    config = SweepConfig(
        sigmas=[sigma, 2 * sigma],
        trials_per_sigma=trials,
        s_re=s.real,
        s_im=s.imag,
        t_half_per_sigma=half,
        dt=dt,
        base_seed=base_seed,
        paired=True,
    )
    blocks = [_sigma_block((config, i, settings)) for i in range(2)]
    rows = [_row(sg, block) for sg, block in zip(config.sigmas, blocks)]
    if any(r.mean_t_max is None for r in rows):
        raise EmptyFitError(f"no transient at sigma={sigma} or {2 * sigma} in {trials} paired trials")
    return rows[1].mean_t_max / rows[0].mean_t_max
