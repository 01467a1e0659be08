"""Monte Carlo benchmark driver for the crane scenarios.

Runs the four filters (EKF, IterEKF, IEKF, IIEKF) on independently seeded
simulations, aggregates per-timestep statistics and writes them as CSV
plus JSON summaries. Per-simulation RNG streams are derived from
``(seed, sim_index)``, so results are reproducible and independent of the
worker count; the CSV bytes are identical across reruns.

Outputs per scenario:

- ``scenario{ID}_{filter}.csv`` with columns
  ``k, mean_err, std_err, anees, r1, r2, mean_iters`` (one row per step).
- ``scenario{ID}_raw.csv`` with one row per (scenario, sim, k, filter):
  error norm, ANEES term, iteration count, convergence and divergence
  flags. A diverged run poisons only its own rows.
- ``scenario{ID}_summary.json`` with scenario-level aggregates (mean
  Gauss-Newton iterations per filter, final errors, ANEES coverage).
- ``scenario{ID}_manifest.json`` recording the exact config, seed, code
  version, output paths and wall-clock times.
"""

from __future__ import annotations

import dataclasses
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .belief import factor
from .crane import (
    ErrorStateCraneFilter,
    ExtendedPose,
    ImuSample,
    InvariantCraneFilter,
    ScenarioConfig,
    cable_length,
    config_to_dict,
    scenario_config,
    simulate_truth,
    synthesize_imu,
)
from .errors import (
    AngleNearPiError,
    NonFiniteError,
    NotPSDError,
    SingularInnovationError,
)
from .filters import GNConfig
from .groups import SE23
from .metrics import chi2_interval, ekf_error, invariant_error

FILTER_IDS = ("ekf", "iterekf", "iekf", "iiekf")

# Errors that mark a run as diverged rather than aborting the benchmark.
_DIVERGENCE_ERRORS = (
    NonFiniteError,
    SingularInnovationError,
    NotPSDError,
    AngleNearPiError,
    np.linalg.LinAlgError,
    FloatingPointError,
    OverflowError,
)


@dataclass
class TruthData:
    """Precomputed ground truth shared by all Monte Carlo runs."""

    Rs: np.ndarray
    vs: np.ndarray
    ps: np.ndarray
    omegas: np.ndarray
    accels: np.ndarray
    ls: np.ndarray
    dt: float

    @property
    def n_steps(self) -> int:
        return self.omegas.shape[0]

    def pose(self, k: int) -> ExtendedPose:
        return ExtendedPose(R=self.Rs[k], v=self.vs[k], p=self.ps[k])


@dataclass
class RunManifest:
    scenario_id: int
    seed: int
    version: str
    config: dict
    outputs: dict
    wall_clock: dict = field(default_factory=dict)


def build_truth(cfg: ScenarioConfig) -> TruthData:
    """Simulate the pendulum once and derive the exact (noise-free) IMU."""
    truth = simulate_truth(cfg)
    poses = [pose for _, pose in truth]
    samples = synthesize_imu(poses, cfg.dt, np.zeros((6, 6)), g=cfg.gravity)
    return TruthData(
        Rs=np.array([p.R for p in poses]),
        vs=np.array([p.v for p in poses]),
        ps=np.array([p.p for p in poses]),
        omegas=np.array([s.omega for s in samples]),
        accels=np.array([s.accel for s in samples]),
        ls=np.array([cable_length(cfg, k) for k in range(len(poses))]),
        dt=cfg.dt,
    )


def _build_filters(cfg: ScenarioConfig, pose0: ExtendedPose) -> dict:
    gn = GNConfig(
        tol=cfg.tol, n_max=cfg.n_max, gain_mode=cfg.gain_mode, delta=cfg.delta
    )
    common = dict(Q=cfg.Q, gravity=cfg.gravity)
    return {
        "ekf": ErrorStateCraneFilter(
            pose0, cfg.P0, gn, iterated=False, N=cfg.N, **common
        ),
        "iterekf": ErrorStateCraneFilter(
            pose0, cfg.P0, gn, iterated=True, N=cfg.N, **common
        ),
        "iekf": InvariantCraneFilter(pose0, cfg.P0, gn, iterated=False, **common),
        "iiekf": InvariantCraneFilter(pose0, cfg.P0, gn, iterated=True, **common),
    }


def _subspace(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.error_subspace is None:
        return np.arange(9)
    return np.asarray(cfg.error_subspace, dtype=int)


def run_single_simulation(cfg: ScenarioConfig, truth: TruthData, sim_index: int) -> dict:
    """One Monte Carlo run: all four filters on one noise realization.

    Returns per-filter arrays of length ``n_steps + 1``: updated error
    norms, ANEES terms, iteration counts, convergence flags, and the index
    at which the run diverged (-1 if it never did).
    """
    rng = np.random.default_rng([cfg.seed, sim_index])
    K = truth.n_steps
    sub = _subspace(cfg)

    # Initial estimate: true state times exp(-xi0), so the invariant error
    # at k=0 is exactly xi0 ~ N(0, P0). Every filter gets the same estimate.
    Lp = factor(cfg.P0).L
    xi0 = Lp @ rng.standard_normal(Lp.shape[1]) if Lp.shape[1] else np.zeros(9)
    chi0 = truth.pose(0).to_group()
    pose0 = ExtendedPose.from_group(chi0.compose(SE23.exp(-xi0)))

    # IMU noise, then measurement noise; fixed draw order for determinism.
    Lq = factor(cfg.Q).L
    imu_noise = (
        (Lq @ rng.standard_normal((Lq.shape[1], K))).T
        if Lq.shape[1]
        else np.zeros((K, 6))
    )
    Ln = factor(cfg.N).L
    meas_noise = (
        (Ln @ rng.standard_normal((Ln.shape[1], K + 1))).T
        if Ln.shape[1]
        else np.zeros((K + 1, 3))
    )

    samples = [
        ImuSample(
            omega=truth.omegas[k] + imu_noise[k, :3],
            accel=truth.accels[k] + imu_noise[k, 3:],
            dt=truth.dt,
        )
        for k in range(K)
    ]
    # Hang-point measurements; the geometry closes, so y = hang + noise.
    ys = np.array(
        [
            truth.Rs[k] @ np.array([0.0, 0.0, truth.ls[k]]) + truth.ps[k]
            + meas_noise[k]
            for k in range(K + 1)
        ]
    )

    filters = _build_filters(cfg, pose0)
    out = {
        fid: {
            "err": np.full(K + 1, np.nan),
            "anees": np.full(K + 1, np.nan),
            "iters": np.full(K + 1, np.nan),
            "converged": np.zeros(K + 1, dtype=bool),
            "diverged_at": -1,
        }
        for fid in FILTER_IDS
    }
    alive = {fid: True for fid in FILTER_IDS}

    for k in range(K + 1):
        for fid, filt in filters.items():
            rec = out[fid]
            if not alive[fid]:
                continue
            try:
                report = filt.update(ys[k], truth.ls[k], cfg.N)
                rec["iters"][k] = report.iterations
                rec["converged"][k] = report.converged
            except _DIVERGENCE_ERRORS:
                alive[fid] = False
                rec["diverged_at"] = k
                continue

            truth_pose = truth.pose(k)
            truth_group = truth_pose.to_group()
            try:
                xi_err = invariant_error(filt.pose.to_group(), truth_group)
                rec["err"][k] = np.linalg.norm(xi_err)
                if fid in ("ekf", "iterekf"):
                    e = ekf_error(filt.pose, truth_pose)
                else:
                    e = xi_err
                e_s = e[sub]
                P_s = filt.cov[np.ix_(sub, sub)]
                rec["anees"][k] = float(e_s @ np.linalg.solve(P_s, e_s))
            except _DIVERGENCE_ERRORS:
                # Estimate alive but beyond metric range (e.g. rotation
                # error at pi); leave this step's metrics as NaN.
                pass

        if k < K:
            for fid, filt in filters.items():
                if not alive[fid]:
                    continue
                try:
                    filt.predict(samples[k])
                except _DIVERGENCE_ERRORS:
                    alive[fid] = False
                    out[fid]["diverged_at"] = k
    return out


def _simulate_task(args):
    cfg, truth, sim_index = args
    return run_single_simulation(cfg, truth, sim_index)


def run_simulations(
    cfg: ScenarioConfig, truth: TruthData, workers: int | None = None
) -> list[dict]:
    """Run all Monte Carlo simulations, optionally on a process pool.

    The reduction is ordered by simulation index, so results do not depend
    on scheduling.
    """
    tasks = [(cfg, truth, n) for n in range(cfg.n_sims)]
    if workers is None or workers <= 1:
        return [_simulate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_task, tasks, chunksize=4))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def aggregate_and_write(
    cfg: ScenarioConfig, results: list[dict], out_dir: Path
) -> dict:
    """Aggregate per-sim records into per-filter CSVs plus a summary dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    K = next(iter(results[0].values()))["err"].shape[0] - 1
    n_dof = len(_subspace(cfg))
    interval = chi2_interval(cfg.n_sims, n_dof)
    outputs = {}
    summary = {
        "scenario": cfg.scenario_id,
        "n_sims": cfg.n_sims,
        "seed": cfg.seed,
        "n_dof": n_dof,
        "anees_interval": [interval.r1, interval.r2],
        "filters": {},
    }

    raw_path = out_dir / f"scenario{cfg.scenario_id}_raw.csv"
    with open(raw_path, "w", newline="") as fh:
        fh.write("scenario,sim,k,filter,err_norm,anees_term,iterations,converged,diverged\n")
        for sim, res in enumerate(results):
            for fid in FILTER_IDS:
                rec = res[fid]
                div_at = rec["diverged_at"]
                for k in range(K + 1):
                    diverged = div_at >= 0 and k >= div_at
                    fh.write(
                        ",".join(
                            [
                                str(cfg.scenario_id),
                                str(sim),
                                str(k),
                                fid,
                                _fmt(rec["err"][k]),
                                _fmt(rec["anees"][k]),
                                _fmt(rec["iters"][k]),
                                _fmt(rec["converged"][k]),
                                "1" if diverged else "0",
                            ]
                        )
                        + "\n"
                    )
    outputs["raw"] = str(raw_path)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        for fid in FILTER_IDS:
            err = np.array([res[fid]["err"] for res in results])
            anees_terms = np.array([res[fid]["anees"] for res in results])
            iters = np.array([res[fid]["iters"] for res in results])
            mean_err = np.nanmean(err, axis=0)
            std_err = np.nanstd(err, axis=0)
            anees = np.nanmean(anees_terms, axis=0)
            mean_iters = np.nanmean(iters, axis=0)

            path = out_dir / f"scenario{cfg.scenario_id}_{fid}.csv"
            with open(path, "w", newline="") as fh:
                fh.write("k,mean_err,std_err,anees,r1,r2,mean_iters\n")
                for k in range(K + 1):
                    fh.write(
                        ",".join(
                            [
                                str(k),
                                _fmt(mean_err[k]),
                                _fmt(std_err[k]),
                                _fmt(anees[k]),
                                _fmt(interval.r1),
                                _fmt(interval.r2),
                                _fmt(mean_iters[k]),
                            ]
                        )
                        + "\n"
                    )
            outputs[fid] = str(path)

            n_div = sum(1 for res in results if res[fid]["diverged_at"] >= 0)
            skip = max(1, (K + 1) // 10)
            in_band = np.mean(
                (anees[skip:] >= interval.r1) & (anees[skip:] <= interval.r2)
            )
            summary["filters"][fid] = {
                "mean_gn_iterations": float(np.nanmean(iters)),
                "final_mean_err": float(mean_err[-1]),
                "final_std_err": float(std_err[-1]),
                "diverged_runs": n_div,
                "anees_fraction_in_interval": float(in_band),
                "anees_fraction_above_r2": float(np.mean(anees[skip:] > interval.r2)),
            }

    summary_path = out_dir / f"scenario{cfg.scenario_id}_summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs["summary"] = str(summary_path)
    return {"outputs": outputs, "summary": summary}


def run_scenario(
    scenario_id: int,
    overrides: dict | None = None,
    out_dir: str | Path = ".",
    workers: int | None = None,
) -> RunManifest:
    """Run one benchmark scenario end to end and write its outputs."""
    cfg = scenario_config(scenario_id, **(overrides or {}))
    clock = {}
    t0 = time.perf_counter()
    truth = build_truth(cfg)
    clock["truth_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    results = run_simulations(cfg, truth, workers=workers)
    clock["simulate_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    agg = aggregate_and_write(cfg, results, Path(out_dir))
    clock["aggregate_s"] = time.perf_counter() - t0

    manifest = RunManifest(
        scenario_id=cfg.scenario_id,
        seed=cfg.seed,
        version=__version__,
        config=config_to_dict(cfg),
        outputs=agg["outputs"],
        wall_clock=clock,
    )
    manifest_path = Path(out_dir) / f"scenario{cfg.scenario_id}_manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(dataclasses.asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
