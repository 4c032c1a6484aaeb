"""Control problems, plant simulation, the inference-based control loop and metrics."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import polymat
from .bounds import BoundSchedule, BoxBounds
from .kernels import LodeKernel, default_matern_order, matern, se
from .lodegp import Dataset, build_dataset, posterior, train_hyperparameters
from .reweight import CostSpec, gaussian_product
from .thmc import DEFAULT_TRAJECTORY_TIME, clamp_to_box, posterior_summary, sample_truncated

log = logging.getLogger(__name__)


class Model(str, enum.Enum):
    GPSE = "gpse"
    GPM = "gpm"
    GPMO = "gpmo"

    @property
    def kernel_kind(self) -> str:
        return "se" if self is Model.GPSE else "matern"

    @property
    def reweights(self) -> bool:
        return self is Model.GPMO


def variant_name(model: Model, sampled: bool) -> str:
    return model.name + ("S" if sampled else "")


@dataclass(frozen=True)
class ControlSystem:
    """``x' = A x + B u``; must be controllable."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(A.shape[0])])
        if np.linalg.matrix_rank(ctrb) < A.shape[0]:
            raise ValueError("system (A, B) is not controllable")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_z(self) -> int:
        return self.n_x + self.n_u


def simulate_plant(sys: ControlSystem, x, u, dt: float) -> np.ndarray:
    """Exact zero-order-hold step, via the exponential of ``[[A, B], [0, 0]] * dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n, m = sys.n_x, sys.n_u
    M = np.zeros((n + m, n + m))
    M[:n, :n] = sys.A
    M[:n, n:] = sys.B
    E = expm(M * dt)
    return E[:n, :n] @ np.asarray(x, float) + E[:n, n:] @ np.asarray(u, float)


@dataclass(frozen=True)
class Reference:
    """Per-channel reference for the cost and the control error.

    ``mode`` is ``"zero"``, ``"center"`` (the constraint centres, falling back
    to 0 where a bound is infinite) or ``"constant"`` with explicit ``values``.
    """

    mode: str = "zero"
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in ("zero", "center", "constant"):
            raise ValueError(f"unknown reference mode {self.mode!r}")
        if (self.mode == "constant") != (self.values is not None):
            raise ValueError("constant reference needs values; other modes take none")

    def on_grid(self, schedule: BoundSchedule, times, n_x: int) -> np.ndarray:
        """Channel-major reference; input channels and later states get 0 in ``center`` mode."""
        times = np.atleast_1d(times)
        nz = schedule.n_channels
        if self.mode == "zero":
            return np.zeros(nz * times.size)
        if self.mode == "constant":
            if len(self.values) != nz:
                raise ValueError(f"reference has {len(self.values)} values for {nz} channels")
            return np.repeat(np.asarray(self.values, float), times.size)
        ref = np.zeros((nz, times.size))
        lo, hi = schedule.on_grid(times).by_channel(nz)
        with np.errstate(invalid="ignore"):
            centre = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
        ref[0] = centre[0]
        return ref.ravel()


@dataclass
class ControlProblem:
    system: ControlSystem
    x0: np.ndarray
    u0: np.ndarray
    grid: np.ndarray
    bounds: BoundSchedule
    s_diag: np.ndarray
    reference: Reference = field(default_factory=Reference)
    model: Model = Model.GPMO
    sampled: bool = True
    n_samples: int = 200
    trajectory_time: float = DEFAULT_TRAJECTORY_TIME
    seed: int = 0
    horizon: int | None = None
    matern_order: int | None = None
    signal_variance: float = 1.0
    lengthscale: float = 1.0
    train: bool = True
    train_max_iter: int = 500
    pin_input: bool = True

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).ravel()
        self.u0 = np.asarray(self.u0, dtype=float).ravel()
        self.grid = np.asarray(self.grid, dtype=float).ravel()
        self.s_diag = np.asarray(self.s_diag, dtype=float).ravel()
        self.model = Model(self.model)
        sys = self.system
        if self.x0.size != sys.n_x or self.u0.size != sys.n_u:
            raise ValueError("x0/u0 sizes do not match the system")
        if self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least two points")
        if self.bounds.n_channels != sys.n_z:
            raise ValueError(f"bounds for {self.bounds.n_channels} channels, system has {sys.n_z}")
        if self.s_diag.size != sys.n_z or np.any(self.s_diag <= 0):
            raise ValueError("S needs one positive diagonal weight per channel")
        if not self.bounds.on_grid(self.grid[:1]).contains(np.r_[self.x0, self.u0]):
            raise ValueError("initial state/input violates the bounds at t0")
        if self.horizon is not None and self.horizon < 2:
            raise ValueError("receding horizon needs at least two grid points")

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def dataset(self, t0: float, z0, grid, pin_input: bool = True) -> Dataset:
        data = build_dataset(t0, z0, self.bounds.on_grid(grid), grid)
        if not pin_input:
            data.noise[0, self.system.n_x :] = np.inf
        return data

    def operator(self) -> tuple[polymat.PolyMatrix, polymat.PolyMatrix]:
        return polymat.operator_parametrization(self.system.A.tolist(), self.system.B.tolist())

    def initial_kernel(self) -> LodeKernel:
        _, P = self.operator()
        if self.model.kernel_kind == "se":
            spec = se(self.signal_variance, self.lengthscale)
        else:
            r = self.matern_order if self.matern_order is not None else default_matern_order(P)
            spec = matern(r, self.signal_variance, self.lengthscale)
        return LodeKernel(P, [spec] * P.cols)

    def plan_grid(self, i: int) -> np.ndarray:
        if self.horizon is None:
            return self.grid[i:]
        return self.grid[i] + self.dt * np.arange(self.horizon)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    plans: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    hyperparameters: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    bounces: list = field(default_factory=list)

    @property
    def z(self) -> np.ndarray:
        return np.hstack([self.states, self.inputs])


class ControlLoopError(RuntimeError):
    pass


def prepare_kernel(problem: ControlProblem) -> LodeKernel:
    """Initial LODE kernel, trained once on the ``t0`` dataset if requested."""
    kernel = problem.initial_kernel()
    if problem.train:
        data = problem.dataset(problem.grid[0], np.r_[problem.x0, problem.u0], problem.plan_grid(0))
        kernel = kernel.with_base(train_hyperparameters(kernel, data, max_iter=problem.train_max_iter))
    return kernel


def plan_step(problem: ControlProblem, kernel: LodeKernel, t: float, z: np.ndarray, grid, seed=None):
    """One open-loop plan from state/input ``z`` at time ``t`` over ``grid``.

    Returns ``(plan, batch)``; ``plan`` is channel-major and ``batch`` is
    ``None`` for unsampled variants.
    """
    n_x = problem.system.n_x
    pin = problem.pin_input or t == problem.grid[0]
    belief = posterior(kernel, problem.dataset(t, z, grid, pin), grid)
    if problem.model.reweights:
        ref = problem.reference.on_grid(problem.bounds, grid, n_x)
        cost = CostSpec(ref, np.repeat(problem.s_diag, grid.size))
        belief = gaussian_product(belief, cost)
    if not problem.sampled:
        return belief.mean, None
    box = problem.bounds.on_grid(grid)
    init = clamp_to_box(belief.mean, box)
    batch = sample_truncated(
        belief, box, init, problem.n_samples, seed=seed, trajectory_time=problem.trajectory_time
    )
    return posterior_summary(batch), batch


def run_control_loop(
    problem: ControlProblem, kernel: LodeKernel | None = None, record_plans: bool = False
) -> Trajectory:
    """Closed loop over the grid with a one-step input delay.

    At ``t_i`` the plan is conditioned on the measured state and the input
    being applied; the plan's input at ``t_{i+1}`` is applied on
    ``[t_{i+1}, t_{i+2}]``.
    """
    t_start = time.perf_counter()
    if kernel is None:
        kernel = prepare_kernel(problem)
    t_trained = time.perf_counter()

    sys = problem.system
    grid = problem.grid
    n = grid.size
    seeds = np.random.SeedSequence(problem.seed).spawn(n)
    states = np.zeros((n, sys.n_x))
    inputs = np.zeros((n, sys.n_u))
    states[0], inputs[0] = problem.x0, problem.u0
    traj = Trajectory(grid.copy(), states, inputs)
    sampling = 0.0
    for i in range(n - 1):
        pgrid = problem.plan_grid(i)
        z = np.r_[states[i], inputs[i]]
        ts = time.perf_counter()
        try:
            plan, batch = plan_step(problem, kernel, grid[i], z, pgrid, seed=seeds[i])
        except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
            raise ControlLoopError(f"step {i} (t={grid[i]:.4g}): {exc}") from exc
        sampling += time.perf_counter() - ts
        if batch is not None:
            traj.bounces.append(float(batch.bounces.mean()))
        per_channel = plan.reshape(sys.n_z, -1)
        inputs[i + 1] = per_channel[sys.n_x :, 1]
        states[i + 1] = simulate_plant(sys, states[i], inputs[i], grid[i + 1] - grid[i])
        if record_plans:
            traj.plans.append((pgrid, per_channel))
    t_end = time.perf_counter()

    box = problem.bounds.on_grid(grid)
    x_ref = problem.reference.on_grid(problem.bounds, grid, sys.n_x).reshape(sys.n_z, n)[: sys.n_x].T
    traj.metrics = {
        "constraint_error": constraint_violation(traj, box),
        "control_error": control_error(traj, x_ref),
    }
    traj.hyperparameters = [
        {"kind": s.kind, "r": s.r, "signal_variance": s.signal_variance, "lengthscale": s.lengthscale}
        for s in kernel.base
    ]
    traj.timings = {
        "training": t_trained - t_start,
        "control_loop": t_end - t_trained,
        "planning": sampling,
        "total": t_end - t_start,
    }
    return traj


def constraint_violation(traj: Trajectory, bounds: BoxBounds) -> float:
    """Mean over time of the summed per-channel bound excess (all channels)."""
    z = traj.z
    T, nz = z.shape
    lo, hi = bounds.by_channel(nz)
    zc = z.T
    excess = np.maximum(zc - hi, 0.0) + np.maximum(lo - zc, 0.0)
    return float(excess.sum() / T)


def control_error(traj: Trajectory, x_ref) -> float:
    """Mean over time of the squared state tracking error summed over state channels."""
    x_ref = np.asarray(x_ref, dtype=float)
    if x_ref.shape != traj.states.shape:
        raise ValueError(f"reference shape {x_ref.shape} != states shape {traj.states.shape}")
    return float(((traj.states - x_ref) ** 2).sum() / traj.states.shape[0])
