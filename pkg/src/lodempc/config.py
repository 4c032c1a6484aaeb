"""YAML experiment configuration: parsing, validation, dumping."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .bounds import BoundSchedule, ChannelBound
from .mpc import ControlProblem, ControlSystem, Model, Reference
from .polymat import as_fraction

SHIPPED = resources.files("lodempc") / "configs"


class ConfigError(ValueError):
    pass


def _num(x, where: str) -> float:
    try:
        if isinstance(x, str):
            return float(as_fraction(x)) if "/" in x else float(x)
        return float(x)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"{where}: expected a number, got {x!r}") from None


def _vec(x, where: str) -> list[float]:
    if not isinstance(x, (list, tuple)):
        raise ConfigError(f"{where}: expected a list")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(x)]


def _check_keys(d: dict, allowed: set, where: str, required: set = frozenset()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


@dataclass
class ExperimentConfig:
    name: str
    A: list
    B: list
    x0: list[float]
    u0: list[float]
    t0: float
    tN: float
    n_points: int
    bounds: list  # per channel: [lo, hi] or list of [t, lo, hi]
    S: list[float]
    reference: Any = "zero"
    model: str = "gpmo"
    sampled: bool = True
    matern_order: int | None = None
    signal_variance: float = 1.0
    lengthscale: float = 1.0
    train: bool = True
    train_max_iter: int = 500
    n_samples: int = 200
    trajectory_time: float = math.pi / 2
    seed: int = 0
    horizon: int | None = None
    pin_input: bool = True
    output: str | None = None

    @property
    def variant(self) -> str:
        return Model(self.model).name + ("S" if self.sampled else "")

    def schedule(self) -> BoundSchedule:
        chans = []
        for b in self.bounds:
            if len(b) == 2 and not isinstance(b[0], (list, tuple)):
                chans.append(ChannelBound.constant(*b))
            else:
                chans.append(ChannelBound(tuple(tuple(bp) for bp in b)))
        return BoundSchedule(tuple(chans))

    def to_problem(self) -> ControlProblem:
        if isinstance(self.reference, str):
            ref = Reference(self.reference)
        else:
            ref = Reference("constant", tuple(self.reference))
        A = [[float(as_fraction(v)) for v in row] for row in self.A]
        B = [[float(as_fraction(v)) for v in row] for row in self.B]
        return ControlProblem(
            system=ControlSystem(A, B),
            x0=self.x0,
            u0=self.u0,
            grid=np.linspace(self.t0, self.tN, self.n_points),
            bounds=self.schedule(),
            s_diag=self.S,
            reference=ref,
            model=Model(self.model),
            sampled=self.sampled,
            n_samples=self.n_samples,
            trajectory_time=self.trajectory_time,
            seed=self.seed,
            horizon=self.horizon,
            matern_order=self.matern_order,
            signal_variance=self.signal_variance,
            lengthscale=self.lengthscale,
            train=self.train,
            train_max_iter=self.train_max_iter,
            pin_input=self.pin_input,
        )

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "system": {"A": self.A, "B": self.B},
            "x0": self.x0,
            "u0": self.u0,
            "grid": {"t0": self.t0, "tN": self.tN, "n": self.n_points},
            "bounds": [
                list(b) if len(b) == 2 and not isinstance(b[0], (list, tuple)) else {"breakpoints": [list(bp) for bp in b]}
                for b in self.bounds
            ],
            "kernel": {
                "matern_order": self.matern_order,
                "signal_variance": self.signal_variance,
                "lengthscale": self.lengthscale,
                "train": self.train,
                "max_iter": self.train_max_iter,
            },
            "cost": {"reference": self.reference, "S": self.S},
            "model": self.model,
            "sampled": self.sampled,
            "hmc": {"n_samples": self.n_samples, "trajectory_time": self.trajectory_time},
            "seed": self.seed,
            "horizon": self.horizon,
            "pin_input": self.pin_input,
        }
        if self.output is not None:
            d["output"] = self.output
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.to_problem()
        except ConfigError:
            raise
        except (ValueError, TypeError, ArithmeticError) as exc:
            raise ConfigError(f"{self.name}: {exc}") from None


TOP_KEYS = {
    "name", "system", "x0", "u0", "grid", "bounds", "kernel", "cost",
    "model", "sampled", "hmc", "seed", "horizon", "pin_input", "output",
}


def parse_config(raw: dict) -> ExperimentConfig:
    _check_keys(raw, TOP_KEYS, "config", {"name", "system", "x0", "grid", "bounds", "cost"})
    sysd = raw["system"]
    _check_keys(sysd, {"A", "B"}, "system", {"A", "B"})
    for key in ("A", "B"):
        m = sysd[key]
        if not isinstance(m, list) or not all(isinstance(r, list) for r in m):
            raise ConfigError(f"system.{key}: expected a nested list")
        for r in m:
            for v in r:
                try:
                    as_fraction(v)
                except (TypeError, ValueError, ZeroDivisionError):
                    raise ConfigError(f"system.{key}: bad entry {v!r}") from None
    grid = raw["grid"]
    _check_keys(grid, {"t0", "tN", "n"}, "grid", {"t0", "tN", "n"})

    bounds = []
    if not isinstance(raw["bounds"], list):
        raise ConfigError("bounds: expected one entry per channel")
    for c, b in enumerate(raw["bounds"]):
        where = f"bounds[{c}]"
        if isinstance(b, dict):
            _check_keys(b, {"breakpoints"}, where, {"breakpoints"})
            bps = [_vec(bp, f"{where}.breakpoints") for bp in b["breakpoints"]]
            if any(len(bp) != 3 for bp in bps):
                raise ConfigError(f"{where}: breakpoints are [t, lower, upper] triples")
            for t, lo, hi in bps:
                if lo > hi:
                    raise ConfigError(f"{where}: lower {lo} > upper {hi} at t={t}")
            bounds.append(bps)
        else:
            lo, hi = _vec(b, where) if isinstance(b, list) and len(b) == 2 else (None, None)
            if lo is None:
                raise ConfigError(f"{where}: expected [lower, upper] or {{breakpoints: ...}}")
            if lo > hi:
                raise ConfigError(f"{where}: lower {lo} > upper {hi}")
            bounds.append([lo, hi])

    kern = raw.get("kernel", {})
    _check_keys(kern, {"matern_order", "signal_variance", "lengthscale", "train", "max_iter"}, "kernel")
    cost = raw["cost"]
    _check_keys(cost, {"reference", "S"}, "cost", {"S"})
    ref = cost.get("reference", "zero")
    if isinstance(ref, list):
        ref = _vec(ref, "cost.reference")
    elif ref not in ("zero", "center"):
        raise ConfigError(f"cost.reference: expected 'zero', 'center' or a list, got {ref!r}")
    hmc = raw.get("hmc", {})
    _check_keys(hmc, {"n_samples", "trajectory_time"}, "hmc")
    model = str(raw.get("model", "gpmo")).lower()
    if model not in {m.value for m in Model}:
        raise ConfigError(f"model: expected one of gpse, gpm, gpmo, got {model!r}")

    cfg = ExperimentConfig(
        name=str(raw["name"]),
        A=sysd["A"],
        B=sysd["B"],
        x0=_vec(raw["x0"], "x0"),
        u0=_vec(raw.get("u0", [0.0] * len(sysd["B"][0])), "u0"),
        t0=_num(grid["t0"], "grid.t0"),
        tN=_num(grid["tN"], "grid.tN"),
        n_points=int(grid["n"]),
        bounds=bounds,
        S=_vec(cost["S"], "cost.S"),
        reference=ref,
        model=model,
        sampled=bool(raw.get("sampled", True)),
        matern_order=kern.get("matern_order"),
        signal_variance=_num(kern.get("signal_variance", 1.0), "kernel.signal_variance"),
        lengthscale=_num(kern.get("lengthscale", 1.0), "kernel.lengthscale"),
        train=bool(kern.get("train", True)),
        train_max_iter=int(kern.get("max_iter", 500)),
        n_samples=int(hmc.get("n_samples", 200)),
        trajectory_time=_num(hmc.get("trajectory_time", math.pi / 2), "hmc.trajectory_time"),
        seed=int(raw.get("seed", 0)),
        horizon=raw.get("horizon"),
        pin_input=bool(raw.get("pin_input", True)),
        output=raw.get("output"),
    )
    cfg.validate()
    return cfg


def resolve_config_path(spec: str | Path) -> Path:
    """A filesystem path, or the stem of a shipped config such as ``experiment1``."""
    p = Path(spec)
    if p.exists():
        return p
    shipped = SHIPPED / f"{spec}.yaml"
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"no such config: {spec}")


def load_config(spec: str | Path) -> ExperimentConfig:
    path = resolve_config_path(spec)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(raw)


def config_from_problem(problem: ControlProblem, name: str, output: str | None = None) -> ExperimentConfig:
    """Inverse of :meth:`ExperimentConfig.to_problem` (system matrices as floats)."""
    bounds = []
    for ch in problem.bounds.channels:
        if ch.is_constant:
            bounds.append([ch.breakpoints[0][1], ch.breakpoints[0][2]])
        else:
            bounds.append([list(bp) for bp in ch.breakpoints])
    ref = problem.reference
    grid = problem.grid
    return ExperimentConfig(
        name=name,
        A=problem.system.A.tolist(),
        B=problem.system.B.tolist(),
        x0=problem.x0.tolist(),
        u0=problem.u0.tolist(),
        t0=float(grid[0]),
        tN=float(grid[-1]),
        n_points=int(grid.size),
        bounds=bounds,
        S=problem.s_diag.tolist(),
        reference=list(ref.values) if ref.mode == "constant" else ref.mode,
        model=problem.model.value,
        sampled=problem.sampled,
        matern_order=problem.matern_order,
        signal_variance=problem.signal_variance,
        lengthscale=problem.lengthscale,
        train=problem.train,
        train_max_iter=problem.train_max_iter,
        n_samples=problem.n_samples,
        trajectory_time=problem.trajectory_time,
        seed=problem.seed,
        horizon=problem.horizon,
        pin_input=problem.pin_input,
        output=output,
    )
