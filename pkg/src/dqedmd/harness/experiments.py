"""Word-length sweeps and regularized-recovery comparisons.

Every ``(word_length, trial)`` pair is an isolated task: it draws its dither
from ``DitherStream((master_seed, word_length, trial, trajectory))`` and only
reads the shared, immutable :class:`SweepContext`. Results are sorted by
``(word_length, trial)`` so worker scheduling never changes the output.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..dictionary import Dictionary, identity_dictionary, make_tps_dictionary
from ..dynamics import TrajectorySet, build_snapshot_pairs, get_system, simulate_trajectories
from ..edmd import KoopmanEstimate, fit_dq_edmd, fit_edmd, relative_matrix_error
from ..quantizer import DitherStream, QuantizerSpec, auto_range_specs, quantize_trajectory
from ..regularized import dmd_regularizer, loglog_slope, recover_regularized
from .config import ConfigError, ExperimentConfig
from .io import ResultRecord

__all__ = [
    "SweepContext",
    "prepare",
    "quantizer_specs",
    "quantize_set",
    "rollout_error",
    "run_sweep",
    "run_recovery",
    "result_metadata",
    "summarize",
    "format_report",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepContext:
    """Data shared read-only by every trial of one sweep."""

    cfg: ExperimentConfig
    train: TrajectorySet
    train_ids: np.ndarray
    evaluation: TrajectorySet
    dictionary: Dictionary
    reference: KoopmanEstimate


def split_indices(n_trajectories: int, holdout_fraction: float):
    """Hold out the last ``ceil(M * fraction)`` trajectories (at least one is kept)."""
    n_test = min(math.ceil(n_trajectories * holdout_fraction), n_trajectories - 1)
    ids = np.arange(n_trajectories)
    return ids[: n_trajectories - n_test], ids[n_trajectories - n_test:]


def prepare(cfg: ExperimentConfig) -> SweepContext:
    """Simulate once, split, build the dictionary and fit the unquantized reference."""
    model = get_system(cfg.system)
    trajs = simulate_trajectories(model, cfg.sim)
    train_ids, test_ids = split_indices(trajs.n_trajectories, cfg.eval.holdout_fraction)
    train = trajs.subset(train_ids)
    evaluation = train if cfg.eval.on_training or test_ids.size == 0 else trajs.subset(test_ids)
    if cfg.dictionary.n_centers == 0:
        dictionary = identity_dictionary(model.n)
    else:
        dictionary = make_tps_dictionary(model.n, cfg.dictionary.n_centers,
                                         cfg.dictionary_box, cfg.dictionary.seed)
    X, X_next = build_snapshot_pairs(train)
    reference = fit_edmd(X, X_next, dictionary)
    return SweepContext(cfg, train, train_ids, evaluation, dictionary, reference)


def quantizer_specs(ctx: SweepContext, word_length: int) -> list[QuantizerSpec]:
    q = ctx.cfg.quantizer
    if q.range_policy == "explicit":
        return [QuantizerSpec(lo, hi, word_length) for lo, hi in q.ranges]
    flat = ctx.train.states.reshape(-1, ctx.train.n)
    return auto_range_specs(flat, word_length, q.margin)


def quantize_set(trajs: TrajectorySet, specs, master_seed: int, word_length: int,
                 trial: int, trajectory_ids=None):
    """Dither-quantize every trajectory with its own stream.

    Returns ``(decoded_states, saturation_count)``.
    """
    if trajectory_ids is None:
        trajectory_ids = range(trajs.n_trajectories)
    decoded = np.empty_like(trajs.states)
    n_sat = 0
    for k, m in enumerate(trajectory_ids):
        stream = DitherStream((master_seed, word_length, trial, int(m)))
        rec = quantize_trajectory(specs, trajs.states[k], stream)
        decoded[k] = rec.decoded
        n_sat += rec.saturation_count
    return decoded, n_sat


def rollout_error(est: KoopmanEstimate, trajs: TrajectorySet) -> float:
    """Average over trajectories of the mean relative error of a full rollout from ``x_0``."""
    states = trajs.states
    Z = est.dictionary.lift_snapshots(states[:, 0].T)
    norms = np.linalg.norm(states[:, 1:], axis=2)
    err_sum = np.zeros(trajs.n_trajectories)
    counts = np.zeros(trajs.n_trajectories)
    for t in range(1, states.shape[1]):
        Z = est.K @ Z
        pred = est.C @ Z
        truth = states[:, t].T
        nt = norms[:, t - 1]
        ok = nt >= 1e-8
        err = np.linalg.norm(pred - truth, axis=0)
        err_sum[ok] += err[ok] / nt[ok]
        counts[ok] += 1
    valid = counts > 0
    if not valid.any():
        raise ValueError("no evaluable states (all below the norm floor)")
    return float(np.mean(err_sum[valid] / counts[valid]))


def _trial(ctx: SweepContext, word_length: int, trial: int, specs,
           recovery: bool) -> ResultRecord:
    start = time.perf_counter()
    cfg = ctx.cfg
    eps = max(s.resolution for s in specs)
    rel_k = pred = gram_cond = math.nan
    rec_err: Optional[float] = math.nan if recovery else None
    n_sat = 0
    try:
        decoded, n_sat = quantize_set(ctx.train, specs, cfg.master_seed,
                                      word_length, trial, ctx.train_ids)
        Xq, Xq_next = build_snapshot_pairs(decoded)
        est = fit_dq_edmd(Xq, Xq_next, ctx.dictionary)
        rel_k = relative_matrix_error(ctx.reference.K, est.K)
        gram_cond = est.fit.gram_condition
        pred = rollout_error(est, ctx.evaluation)
        if recovery:
            params = dmd_regularizer([s.resolution for s in specs], ctx.dictionary.N)
            K_star = recover_regularized(Xq, Xq_next, params)
            rec_err = relative_matrix_error(ctx.reference.K, K_star)
    except (ValueError, np.linalg.LinAlgError) as exc:
        log.warning("b=%d trial=%d failed: %s", word_length, trial, exc)
    return ResultRecord(
        system=cfg.system,
        word_length=int(word_length),
        epsilon=float(eps),
        trial_index=int(trial),
        rel_K_error=float(rel_k),
        mean_rel_pred_error=float(pred),
        recovery_rel_K_error=None if rec_err is None else float(rec_err),
        saturation_count=int(n_sat),
        gram_condition=float(gram_cond),
        runtime_seconds=time.perf_counter() - start,
    )


def _run(ctx: SweepContext, recovery: bool) -> list[ResultRecord]:
    cfg = ctx.cfg
    specs = {b: quantizer_specs(ctx, b) for b in cfg.quantizer.word_lengths}
    tasks = [(b, k) for b in cfg.quantizer.word_lengths for k in range(cfg.trials)]

    def work(task):
        b, k = task
        return _trial(ctx, b, k, specs[b], recovery)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(work, tasks))
    else:
        records = [work(t) for t in tasks]
    return sorted(records, key=lambda r: (r.word_length, r.trial_index))


def run_sweep(cfg: ExperimentConfig, ctx: Optional[SweepContext] = None) -> list[ResultRecord]:
    """DQ-EDMD against the unquantized reference for every ``(b, trial)``."""
    return _run(ctx or prepare(cfg), recovery=False)


def run_recovery(cfg: ExperimentConfig, ctx: Optional[SweepContext] = None) -> list[ResultRecord]:
    """Plain DQ-DMD versus Gamma-corrected recovery for every ``(b, trial)``.

    Only identity observables are supported: the closed-form regularizer
    ``Gamma = eps^2/12 I, beta = 0`` is known for DMD alone.
    """
    if cfg.dictionary.n_centers != 0:
        raise ConfigError(
            "recovery needs identity observables (dictionary.n_centers: 0): the "
            "closed-form regularizer Gamma = eps^2/12 I, beta = 0 is only known "
            "for DMD; nonlinear dictionaries need externally estimated beta, Gamma")
    return _run(ctx or prepare(cfg), recovery=True)


def result_metadata(cfg: ExperimentConfig) -> dict:
    meta = {"config_sha256": cfg.digest(), "system": cfg.system,
            "master_seed": cfg.master_seed,
            "range_policy": cfg.quantizer.range_policy}
    if cfg.quantizer.range_policy == "auto":
        meta["range_margin"] = repr(cfg.quantizer.margin)
    return meta


# -- reporting ------------------------------------------------------------------

def _quartiles(values):
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)])
    if v.size == 0:
        return (math.nan, math.nan, math.nan)
    return tuple(float(q) for q in np.percentile(v, [25, 50, 75]))


def summarize(records) -> list[dict]:
    """Per ``(system, word_length)`` quartiles of each error metric."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.system, r.word_length), []).append(r)
    rows = []
    for (system, b), recs in sorted(groups.items()):
        row = {"system": system, "word_length": b, "epsilon": recs[0].epsilon,
               "trials": len(recs),
               "rel_K_error": _quartiles(r.rel_K_error for r in recs),
               "mean_rel_pred_error": _quartiles(r.mean_rel_pred_error for r in recs),
               "saturation_count": sum(r.saturation_count for r in recs)}
        if any(r.recovery_rel_K_error is not None for r in recs):
            row["recovery_rel_K_error"] = _quartiles(
                r.recovery_rel_K_error for r in recs)
        rows.append(row)
    return rows


def _fmt_quartiles(q) -> str:
    return "/".join(f"{v:.3e}" for v in q)


def format_report(records) -> str:
    rows = summarize(records)
    if not rows:
        return "no records\n"
    has_rec = any("recovery_rel_K_error" in r for r in rows)
    head = f"{'system':<10} {'b':>3} {'eps':>10} {'n':>4}  {'rel_K_error q1/med/q3':<32} {'pred_error q1/med/q3':<32}"
    if has_rec:
        head += f" {'recovery q1/med/q3':<32}"
    lines = [head]
    for r in rows:
        line = (f"{r['system']:<10} {r['word_length']:>3} {r['epsilon']:>10.3e} "
                f"{r['trials']:>4}  {_fmt_quartiles(r['rel_K_error']):<32} "
                f"{_fmt_quartiles(r['mean_rel_pred_error']):<32}")
        if has_rec:
            line += f" {_fmt_quartiles(r.get('recovery_rel_K_error', (math.nan,) * 3)):<32}"
        lines.append(line)
    for system in sorted({r["system"] for r in rows}):
        pts = [(r["epsilon"], r["rel_K_error"][1]) for r in rows
               if r["system"] == system and r["rel_K_error"][1] > 0]
        if len(pts) >= 3:
            lines.append(f"{system}: log-log slope of median rel_K_error vs eps = "
                         f"{loglog_slope(pts):.3f}")
    return "\n".join(lines) + "\n"
