"""Closed-loop velocity-level inverse kinematics.

Each sample is handled at constant cost: one residual evaluation, one stacked
Jacobian, one constrained differential-kinematics inversion (QP), and one
integration step. Feedback gains drive the pose residual to zero over time
instead of iterating to convergence per sample.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import QPInfeasible, SchemaMismatch, StaleSample
from .model import Configuration, KinematicModel, Velocity
from .qp import ActiveSetSolver, LeastSquaresQP, QPStatus
from .so3 import BaumgarteConfig, Rotation, baumgarte_step, orthonormality_error

RATE_TOL = 1e-9
ACTIVE_TOL = 1e-6


@dataclass(eq=False)
class TargetSample:
    """Timestamped pose and velocity targets for all declared frames."""

    t: float
    positions: np.ndarray   # (n_p, 3)
    rotations: np.ndarray   # (n_o, 3, 3)
    lin_vels: np.ndarray    # (n_p, 3)
    ang_vels: np.ndarray    # (n_o, 3)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.rotations = np.ascontiguousarray(self.rotations, dtype=float).reshape(-1, 3, 3)
        self.lin_vels = np.asarray(self.lin_vels, dtype=float).reshape(-1, 3)
        self.ang_vels = np.asarray(self.ang_vels, dtype=float).reshape(-1, 3)
        if self.lin_vels.shape != self.positions.shape:
            raise SchemaMismatch("lin_vels count differs from positions")
        if self.ang_vels.shape[0] != self.rotations.shape[0]:
            raise SchemaMismatch("ang_vels count differs from rotations")
        for i, r in enumerate(self.rotations):
            if orthonormality_error(r) > 1e-8 or np.linalg.det(r) <= 0.0:
                raise SchemaMismatch(f"rotation target {i} is not a rotation")

    def velocity_stack(self) -> np.ndarray:
        return np.concatenate([self.lin_vels.ravel(), self.ang_vels.ravel()])

    def check_model(self, model: KinematicModel):
        if self.positions.shape[0] != model.n_p or self.rotations.shape[0] != model.n_o:
            raise SchemaMismatch(
                f"sample has {self.positions.shape[0]} position / "
                f"{self.rotations.shape[0]} orientation targets, model declares "
                f"{model.n_p} / {model.n_o}")


@dataclass(eq=False)
class GainConfig:
    """Feedback gains for the velocity correction and the joint-limit
    velocity shaping.

    ``gain`` is the diagonal of the residual-feedback matrix (one entry per
    stacked residual component), ``limit_slope`` the per-constraint-row slope
    of the tanh bound shaping, and ``vel_bound_default`` the stand-in for
    unbounded velocity rows. Construction enforces the discrete-time
    stability guard max(gain) * dt <= 1.
    """

    gain: np.ndarray
    limit_slope: np.ndarray
    vel_bound_default: float
    dt: float

    def __post_init__(self):
        self.gain = np.asarray(self.gain, dtype=float)
        self.limit_slope = np.asarray(self.limit_slope, dtype=float)
        if np.any(self.gain <= 0.0):
            raise ValueError("gain entries must be positive")
        if np.any(self.limit_slope <= 0.0):
            raise ValueError("limit_slope entries must be positive")
        if not self.vel_bound_default > 0.0:
            raise ValueError("vel_bound_default must be positive")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if float(np.max(self.gain)) * self.dt > 1.0:
            raise ValueError("stability guard: max(gain) * dt must be <= 1")

    @classmethod
    def build(cls, model: KinematicModel, dt: float, gain: float = 2.0,
              limit_slope: float = 10.0, vel_bound_default: float = 1e3) -> "GainConfig":
        dim = 3 * (model.n_p + model.n_o)
        m = model.constraint_matrix.shape[0]
        return cls(gain=np.full(dim, float(gain)),
                   limit_slope=np.full(max(m, 1), float(limit_slope)),
                   vel_bound_default=vel_bound_default, dt=dt)

    @classmethod
    def unchecked(cls, model: KinematicModel, dt: float, gain: float,
                  limit_slope: float = 10.0, vel_bound_default: float = 1e3) -> "GainConfig":
        """Bypass the positivity/stability guard (test fixtures only)."""
        cfg = object.__new__(cls)
        dim = 3 * (model.n_p + model.n_o)
        m = model.constraint_matrix.shape[0]
        cfg.gain = np.full(dim, float(gain))
        cfg.limit_slope = np.full(max(m, 1), float(limit_slope))
        cfg.vel_bound_default = vel_bound_default
        cfg.dt = dt
        return cfg


@dataclass(eq=False)
class SolverState:
    """Rolling state of the tracking loop; ``t`` is the timestamp of the last
    consumed sample (None before the first step)."""

    q: Configuration
    nu: Velocity
    last_active_set: tuple[int, ...] = ()
    step_index: int = 0
    t: float | None = None

    @classmethod
    def initial(cls, model: KinematicModel, q0: Configuration) -> "SolverState":
        return cls(q=q0, nu=Velocity.zeros(model))


@dataclass(eq=False)
class StepReport:
    """Pre-update diagnostics for one step; feeds the tracking metrics."""

    residual_r: np.ndarray
    residual_u: np.ndarray
    qp_status: QPStatus
    step_wall_time: float
    constraint_active: np.ndarray


def initial_configuration(model: KinematicModel, sample: TargetSample) -> Configuration:
    """Zero joints, identity base placed at the base position target (when the
    base frame is a position target)."""
    sample.check_model(model)
    base_pos = None
    if model.base_link in model.position_target_frames:
        base_pos = sample.positions[model.position_target_frames.index(model.base_link)]
    return Configuration.zeros(model, base_pos=base_pos)


def pose_residual(model: KinematicModel, q: Configuration, sample: TargetSample) -> np.ndarray:
    """Stacked pose error: position differences, then rotation error vectors."""
    sample.check_model(model)
    fk = model.fk_arrays(q)
    return model.pose_residual_arrays(fk, sample.positions, sample.rotations)


def velocity_residual(model: KinematicModel, q: Configuration, nu: Velocity,
                      sample: TargetSample) -> np.ndarray:
    """Velocity targets minus the stacked differential kinematics J(q) nu."""
    sample.check_model(model)
    return sample.velocity_stack() - model.stacked_jacobian(q) @ nu.stacked()


def corrected_velocity(sample: TargetSample, residual: np.ndarray,
                       gains: GainConfig) -> np.ndarray:
    """Velocity targets with elementwise residual feedback added."""
    return sample.velocity_stack() + gains.gain * residual


def build_limit_constraints(model: KinematicModel, q: Configuration,
                            gains: GainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Velocity-space constraints G nu <= g realizing the configuration
    limits: the admissible joint velocity shrinks through a tanh profile as a
    row approaches its configuration bound, reaching zero at the bound and
    turning negative past it.
    """
    a = model.constraint_matrix
    m, n = a.shape
    G = np.zeros((m, n + 6))
    if m == 0:
        return G, np.zeros(0)
    G[:, 6:] = a
    b_nu = np.where(np.isinf(model.vel_bounds), gains.vel_bound_default, model.vel_bounds)
    margin = model.config_bounds - a @ q.s
    g = np.tanh(gains.limit_slope * margin) * b_nu
    return G, g


def step(state: SolverState, sample: TargetSample, model: KinematicModel,
         gains: GainConfig, baumgarte: BaumgarteConfig,
         solver: ActiveSetSolver) -> tuple[SolverState, StepReport]:
    """Advance the tracker by one sample: exactly one stacked-Jacobian
    evaluation and one QP solve. The report carries pre-update quantities."""
    dt = gains.dt
    if abs(baumgarte.dt - dt) > RATE_TOL:
        raise ValueError("baumgarte.dt differs from gains.dt")
    sample.check_model(model)
    if state.t is not None and abs(sample.t - state.t - dt) > RATE_TOL:
        raise StaleSample(f"sample at t={sample.t} after state t={state.t}, dt={dt}")
    t_start = time.perf_counter()
    fk = model.fk_arrays(state.q)
    residual = model.pose_residual_arrays(fk, sample.positions, sample.rotations)
    jac = model.stacked_jacobian(state.q, fk=fk)
    v_star = sample.velocity_stack() + gains.gain * residual
    G, g = build_limit_constraints(model, state.q, gains)
    problem = LeastSquaresQP(jac, v_star, G, g, damping=solver.damping)
    solution = solver.solve(problem, warm_start=state.last_active_set)
    if solution.status is QPStatus.INFEASIBLE:
        raise QPInfeasible(f"step {state.step_index}: constraints are inconsistent")
    nu = solution.x
    residual_u = sample.velocity_stack() - jac @ nu
    new_q = Configuration(
        base_pos=state.q.base_pos + dt * nu[0:3],
        base_rot=Rotation.drifting(baumgarte_step(state.q.base_rot, nu[3:6], baumgarte)),
        s=state.q.s + dt * nu[6:],
    )
    wall = time.perf_counter() - t_start
    active = (g - G @ nu <= ACTIVE_TOL) if G.shape[0] else np.zeros(0, dtype=bool)
    report = StepReport(residual_r=residual, residual_u=residual_u,
                        qp_status=solution.status, step_wall_time=wall,
                        constraint_active=active)
    new_state = SolverState(q=new_q, nu=Velocity.from_stacked(nu),
                            last_active_set=solution.active_set,
                            step_index=state.step_index + 1, t=sample.t)
    return new_state, report


@dataclass(eq=False)
class TrackResult:
    configurations: list
    velocities: list
    reports: list
    error: str | None = None

    @property
    def completed(self) -> bool:
        return self.error is None

    def __len__(self) -> int:
        return len(self.configurations)


def track(model: KinematicModel, stream, gains: GainConfig,
          baumgarte: BaumgarteConfig, solver: ActiveSetSolver | None = None,
          q0: Configuration | None = None) -> TrackResult:
    """Fold ``step`` over a fixed-rate sample stream.

    Every sample is consumed exactly once; the first failure aborts and the
    partial results are returned with the error recorded.
    """
    result = TrackResult([], [], [])
    solver = solver if solver is not None else ActiveSetSolver()
    state = None
    for sample in stream:
        if state is None:
            start = q0 if q0 is not None else initial_configuration(model, sample)
            state = SolverState.initial(model, start)
        try:
            state, report = step(state, sample, model, gains, baumgarte, solver)
        except (QPInfeasible, StaleSample, SchemaMismatch) as e:
            result.error = str(e)
            break
        result.configurations.append(state.q)
        result.velocities.append(state.nu)
        result.reports.append(report)
    return result
