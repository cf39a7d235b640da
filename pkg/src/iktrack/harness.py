"""Synthetic trajectory generation, tracking metrics, stream files, and the
benchmark sweep. This module owns all I/O; the solvers stay pure.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._kernels import rotation_about_axis
from .baselines import InstantaneousConfig, solve_pairwise, solve_whole_body
from .errors import IkTrackError, ParseError, SchemaMismatch, SpecInfeasible
from .model import Configuration, KinematicModel, Velocity
from .qp import ActiveSetSolver, LeastSquaresQP
from .so3 import BaumgarteConfig, Rotation
from .tracker import GainConfig, TargetSample, initial_configuration, track

METHODS = ("dynamical", "whole-body", "pairwise")

DEFAULT_CONFIG = {
    "gain": 2.0,
    "limit_slope": 10.0,
    "rho": 10.0,
    "damping": 1e-6,
    "vel_bound_default": 1e3,
    "stop_tol": 1e-4,
    "max_iters": 30,
    "lm_lambda0": 1e-3,
}


# -- metrics ------------------------------------------------------------------

def mnte(model: KinematicModel, q: Configuration, sample: TargetSample) -> float:
    """Mean normalized trace error over the orientation targets: the per-frame
    term tr(I - R_est^T R_target)/2 equals 1 - cos of the relative angle."""
    sample.check_model(model)
    if model.n_o == 0:
        return 0.0
    _, rotations = model.stacked_forward_kinematics(q)
    traces = np.einsum("kij,kij->k", rotations, sample.rotations)
    return float(np.mean((3.0 - traces) / 2.0))


def rmse_angvel(model: KinematicModel, q: Configuration, nu: Velocity,
                sample: TargetSample) -> float:
    """Root mean squared angular-velocity error over the orientation targets,
    with the estimate read from the differential kinematics at (q, nu)."""
    sample.check_model(model)
    if model.n_o == 0:
        return 0.0
    jac = model.stacked_jacobian(q)
    est = (jac @ nu.stacked())[3 * model.n_p:].reshape(-1, 3)
    err = sample.ang_vels - est
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1) / 3.0)))


# -- trajectory specs and synthetic streams -----------------------------------

@dataclass(frozen=True)
class TrajectorySpec:
    """Recipe for a synthetic target stream."""

    kind: str  # static_pose | sinusoidal | random_smooth
    duration: float
    dt: float
    amplitude: float
    freq_band: tuple[float, float] = (0.5, 1.5)
    seed: int = 0
    noise_std: float = 0.0

    def __post_init__(self):
        if self.kind not in ("static_pose", "sinusoidal", "random_smooth"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if not self.dt > 0.0 or self.duration < self.dt:
            raise ValueError("need dt > 0 and duration >= dt")


def _joint_waves(model, spec, rng):
    """Per-joint (midpoint, component amplitudes, frequencies, phases); raises
    when the requested amplitude cannot keep a 5% margin to the limits."""
    n = model.n
    ncomp = 1 if spec.kind != "random_smooth" else 3
    mid = np.zeros(n)
    amp = np.zeros((n, ncomp))
    freq = np.zeros((n, ncomp))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, ncomp))
    for jidx, joint in enumerate(model.joints):
        total = spec.amplitude * rng.uniform(0.5, 1.0)
        if joint.pos_limits is not None:
            lo, hi = joint.pos_limits
            mid[jidx] = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            if total * 1.05 > half:
                raise SpecInfeasible(
                    f"joint {joint.name}: amplitude {total:.3f} rad exceeds the "
                    f"95% usable half-range {half / 1.05:.3f} rad")
        shares = rng.uniform(0.5, 1.0, size=ncomp)
        amp[jidx] = total * shares / shares.sum()
        freq[jidx] = rng.uniform(spec.freq_band[0], spec.freq_band[1], size=ncomp)
    return mid, amp, freq, phase


def generate_stream(model: KinematicModel, spec: TrajectorySpec):
    """Ground-truth (Configuration, Velocity) sequence plus the target samples.

    Joint trajectories are band-limited sums of sinusoids around the limit
    midpoints; the base follows a smooth curve and a single-axis orientation
    wobble. Velocity targets are produced through the stacked differential
    kinematics, so pose and velocity targets are exactly consistent.
    Deterministic in the seed.
    """
    rng = np.random.default_rng(spec.seed)
    steps = int(round(spec.duration / spec.dt))
    mid, amp, freq, phase = _joint_waves(model, spec, rng)
    base_amp = 0.25 * spec.amplitude
    base_freq = rng.uniform(spec.freq_band[0], spec.freq_band[1], size=3)
    base_phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
    rot_axis = rng.normal(size=3)
    rot_axis /= np.linalg.norm(rot_axis)
    rot_amp = 0.5 * min(spec.amplitude, 0.4)
    rot_freq = rng.uniform(spec.freq_band[0], spec.freq_band[1])
    rot_phase = rng.uniform(0.0, 2.0 * np.pi)
    static = spec.kind == "static_pose"
    noise = spec.noise_std
    truth = []
    samples = []
    for k in range(steps):
        t = k * spec.dt
        if static:
            s = mid + amp[:, 0] * np.sin(phase[:, 0])
            s_dot = np.zeros(model.n)
            base_pos = np.zeros(3)
            base_vel = np.zeros(3)
            base_rot = np.eye(3)
            base_omega = np.zeros(3)
        else:
            arg = 2.0 * np.pi * freq * t + phase
            s = mid + np.sum(amp * np.sin(arg), axis=1)
            s_dot = np.sum(amp * 2.0 * np.pi * freq * np.cos(arg), axis=1)
            barg = 2.0 * np.pi * base_freq * t + base_phase
            base_pos = base_amp * np.sin(barg)
            base_vel = base_amp * 2.0 * np.pi * base_freq * np.cos(barg)
            rarg = 2.0 * np.pi * rot_freq * t + rot_phase
            angle = rot_amp * np.sin(rarg)
            base_rot = rotation_about_axis(rot_axis, angle)
            base_omega = rot_axis * (rot_amp * 2.0 * np.pi * rot_freq * np.cos(rarg))
        q = Configuration(base_pos, Rotation.drifting(base_rot), s)
        nu = Velocity(base_vel, base_omega, s_dot)
        positions, rotations = model.stacked_forward_kinematics(q)
        vel = model.stacked_jacobian(q) @ nu.stacked()
        lin = vel[:3 * model.n_p].reshape(-1, 3)
        ang = vel[3 * model.n_p:].reshape(-1, 3)
        if noise > 0.0:
            positions = positions + rng.normal(0.0, noise, size=positions.shape)
            lin = lin + rng.normal(0.0, noise, size=lin.shape)
            ang = ang + rng.normal(0.0, noise, size=ang.shape)
            wobble = rng.normal(0.0, noise, size=(model.n_o, 3))
            rotations = np.array([rotation_about_axis(w / max(np.linalg.norm(w), 1e-30),
                                                      np.linalg.norm(w)) @ r
                                  for w, r in zip(wobble, rotations)])
        truth.append((q, nu))
        samples.append(TargetSample(t=t, positions=positions, rotations=rotations,
                                    lin_vels=lin, ang_vels=ang))
    return truth, samples


# -- stream files --------------------------------------------------------------

def save_stream(path, samples):
    """One JSON record per line; float repr keeps round-trips lossless."""
    with open(path, "w") as fh:
        for sample in samples:
            record = {
                "t": sample.t,
                "p": [list(map(float, row)) for row in sample.positions],
                "R": [[float(v) for v in rot.ravel()] for rot in sample.rotations],
                "v": [list(map(float, row)) for row in sample.lin_vels],
                "w": [list(map(float, row)) for row in sample.ang_vels],
            }
            fh.write(json.dumps(record) + "\n")


def load_stream(path):
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                rotations = np.asarray(record["R"], dtype=float).reshape(-1, 3, 3)
                sample = TargetSample(t=float(record["t"]),
                                      positions=record["p"],
                                      rotations=rotations,
                                      lin_vels=record["v"],
                                      ang_vels=record["w"])
            except SchemaMismatch:
                raise
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ParseError(f"line {lineno}: {e}", line=lineno) from None
            samples.append(sample)
    return samples


# -- per-method runners ----------------------------------------------------------

def _velocity_stage(model, q, sample, solver):
    """Differential-kinematics inversion at a solved configuration, under the
    constant joint-velocity bounds."""
    jac = model.stacked_jacobian(q)
    finite = np.isfinite(model.vel_bounds)
    if np.any(finite):
        G = np.zeros((int(finite.sum()), model.n + 6))
        G[:, 6:] = model.constraint_matrix[finite]
        g = model.vel_bounds[finite]
    else:
        G, g = None, None
    sol = solver.solve(LeastSquaresQP(jac, sample.velocity_stack(), G, g,
                                      damping=solver.damping))
    return Velocity.from_stacked(sol.x)


def run_dynamical(model, samples, config):
    gains = GainConfig.build(model, dt=config["dt"], gain=config["gain"],
                             limit_slope=config["limit_slope"],
                             vel_bound_default=config["vel_bound_default"])
    baumgarte = BaumgarteConfig(rho=config["rho"], dt=config["dt"])
    solver = ActiveSetSolver(damping=config["damping"])
    result = track(model, samples, gains, baumgarte, solver=solver)
    times = [r.step_wall_time for r in result.reports]
    return result.configurations, result.velocities, times, result.error


def _run_instantaneous(model, samples, config, solve_fn):
    cfg = InstantaneousConfig(stop_tol=config["stop_tol"], max_iters=config["max_iters"],
                              lm_lambda0=config["lm_lambda0"])
    solver = ActiveSetSolver(damping=config["damping"])
    qs, nus, times = [], [], []
    q = initial_configuration(model, samples[0])
    for sample in samples:
        t0 = time.perf_counter()
        q = solve_fn(model, sample, q, cfg)
        nu = _velocity_stage(model, q, sample, solver)
        times.append(time.perf_counter() - t0)
        qs.append(q)
        nus.append(nu)
    return qs, nus, times, None


def run_whole_body(model, samples, config):
    def solve_fn(model, sample, q, cfg):
        return solve_whole_body(model, sample, q, cfg).q

    return _run_instantaneous(model, samples, config, solve_fn)


def run_pairwise(model, samples, config):
    def solve_fn(model, sample, q, cfg):
        return solve_pairwise(model, sample, q, cfg)[0]

    return _run_instantaneous(model, samples, config, solve_fn)


_RUNNERS = {"dynamical": run_dynamical, "whole-body": run_whole_body,
            "pairwise": run_pairwise}


def run_method(method, model, samples, config=None):
    """Track a stream with one method; returns per-step configurations,
    velocities, wall times, and an error string for aborted runs."""
    if method not in _RUNNERS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    merged = dict(DEFAULT_CONFIG)
    merged.update(config or {})
    if "dt" not in merged:
        merged["dt"] = samples[1].t - samples[0].t if len(samples) > 1 else 0.01
    return _RUNNERS[method](model, samples, merged)


# -- summaries and the benchmark sweep -----------------------------------------

@dataclass(frozen=True)
class SeriesStats:
    median: float
    p95: float
    iqr: float
    mean: float
    count: int

    @classmethod
    def of(cls, values) -> "SeriesStats":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls(math.nan, math.nan, math.nan, math.nan, 0)
        q25, q75 = np.percentile(values, [25.0, 75.0])
        return cls(median=float(np.median(values)), p95=float(np.percentile(values, 95.0)),
                   iqr=float(q75 - q25), mean=float(values.mean()), count=int(values.size))


@dataclass(eq=False)
class MetricsSummary:
    """Per-step series plus distribution stats over the post-transient window."""

    t: np.ndarray
    mnte_series: np.ndarray
    rmse_series: np.ndarray
    time_series: np.ndarray
    transient_discard: float = 2.0
    mnte_stats: SeriesStats = field(init=False)
    rmse_stats: SeriesStats = field(init=False)
    time_stats: SeriesStats = field(init=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.mnte_series = np.asarray(self.mnte_series, dtype=float)
        self.rmse_series = np.asarray(self.rmse_series, dtype=float)
        self.time_series = np.asarray(self.time_series, dtype=float)
        if not (len(self.t) == len(self.mnte_series) == len(self.rmse_series)
                == len(self.time_series)):
            raise ValueError("series lengths differ")
        keep = self.steady_window()
        self.mnte_stats = SeriesStats.of(self.mnte_series[keep])
        self.rmse_stats = SeriesStats.of(self.rmse_series[keep])
        self.time_stats = SeriesStats.of(self.time_series[keep])

    def steady_window(self) -> np.ndarray:
        if self.t.size == 0:
            return np.zeros(0, dtype=bool)
        return self.t - self.t[0] >= self.transient_discard


@dataclass(eq=False)
class RunRecord:
    method: str
    model_id: str
    trajectory_id: str
    config: dict
    metrics: MetricsSummary
    steps: int
    failures: int
    error: str | None = None


def summarize_run(model, samples, qs, nus, times, transient_discard=2.0) -> MetricsSummary:
    count = len(qs)
    mnte_series = np.array([mnte(model, qs[i], samples[i]) for i in range(count)])
    rmse_series = np.array([rmse_angvel(model, qs[i], nus[i], samples[i]) for i in range(count)])
    ts = np.array([samples[i].t for i in range(count)])
    return MetricsSummary(ts, mnte_series, rmse_series, np.asarray(times, dtype=float),
                          transient_discard=transient_discard)


def _bench_cell(method, model_id, model, trajectory_id, samples, config, transient_discard):
    try:
        qs, nus, times, error = run_method(method, model, samples, config)
    except IkTrackError as e:
        qs, nus, times, error = [], [], [], str(e)
    metrics = summarize_run(model, samples, qs, nus, times, transient_discard)
    return RunRecord(method=method, model_id=model_id, trajectory_id=trajectory_id,
                     config=dict(config or {}), metrics=metrics, steps=len(qs),
                     failures=0 if error is None else 1, error=error)


def worker_slots() -> int:
    try:
        return max(1, int(os.environ.get("IKTRACK_THREADS", "1")))
    except ValueError:
        return 1


def run_benchmark(models, specs, methods, config=None, transient_discard=2.0):
    """Run the full (model x spec x method) grid.

    ``models`` and ``specs`` are (id, value) pairs; streams are generated per
    (model, spec) cell. Individual failures are recorded without aborting the
    sweep. Returns the records in declaration order plus the results CSV.
    """
    merged = dict(DEFAULT_CONFIG)
    merged.update(config or {})
    cells = []
    for model_id, model in models:
        for spec_id, spec in specs:
            _, samples = generate_stream(model, spec)
            cell_config = dict(merged)
            cell_config.setdefault("dt", spec.dt)
            for method in methods:
                cells.append((method, model_id, model, spec_id, samples, cell_config))
    slots = worker_slots()
    if slots == 1 or len(cells) <= 1:
        records = [_bench_cell(*cell, transient_discard) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=slots) as pool:
            futures = [pool.submit(_bench_cell, *cell, transient_discard) for cell in cells]
            records = [f.result() for f in futures]
    return records, results_csv(records)


def results_csv(records) -> str:
    lines = ["method,model,scenario,mnte_median,mnte_p95,rmse_median,rmse_p95,"
             "time_median_ms,time_p95_ms,steps,failures"]
    for rec in records:
        m = rec.metrics
        lines.append(",".join([
            rec.method, rec.model_id, rec.trajectory_id,
            repr(m.mnte_stats.median), repr(m.mnte_stats.p95),
            repr(m.rmse_stats.median), repr(m.rmse_stats.p95),
            repr(m.time_stats.median * 1e3), repr(m.time_stats.p95 * 1e3),
            str(rec.steps), str(rec.failures),
        ]))
    return "\n".join(lines) + "\n"
