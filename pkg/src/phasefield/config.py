"""Flat ``key = value`` scenario files.

One setting per line, ``#`` starts a comment, keys are dotted
(``params.tau``). Parsing never stops at the first problem: every unknown
key, malformed value, missing key and violated invariant is reported with
its line number. Temperatures and the ramp rate are in the scaled units of
the model; ``boundary.rate = -1`` is the one-degree-per-second cooling ramp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .assembly import ModelParams
from .geometry import MeshSpec
from .stepper import CubicMode, StepperConfig

INITIAL_PRESETS = ("constant", "liquid")
BOUNDARY_PRESETS = ("constant", "ramp", "table")
CONVERGENCE_MODES = ("scenario", "uniform")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class InitialSpec:
    preset: str = "liquid"
    u0: float = 0.0
    phi0: float = 1.0

    def values(self) -> tuple[float, float]:
        # liquid: uniform melting temperature, pure liquid phase
        return (0.0, 1.0) if self.preset == "liquid" else (self.u0, self.phi0)


@dataclass(frozen=True)
class BoundarySpec:
    preset: str = "constant"
    value: float = 0.0
    start: float = 0.0
    rate: float = -1.0
    floor: float | None = None
    table: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class OutputSpec:
    stride: int = 1
    dir: str = "out"


@dataclass(frozen=True)
class PerturbationConfig:
    eps_u0: float = 0.0
    eps_phi0: float = 0.0
    eps_g: float = 0.0
    ladder: tuple[float, ...] = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class ConvergenceConfig:
    mode: str = "scenario"
    levels: int = 3
    # oracle substep is the finest dt divided by this
    oracle_ratio: int = 50


@dataclass(frozen=True)
class ScenarioConfig:
    mesh: MeshSpec
    params: ModelParams
    stepper: StepperConfig
    initial: InitialSpec = field(default_factory=InitialSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    threads: int = 1
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)


# ---------------------------------------------------------------------------
# value codecs

def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not a finite number")
    return v


def _int(s):
    f = float(s)
    if not f.is_integer():
        raise ValueError("not an integer")
    return int(f)


def _opt_float(s):
    return None if s.lower() in ("none", "") else _float(s)


def _float_list(s):
    return tuple(_float(v) for v in s.split(",") if v.strip())


def _table(s):
    pairs = []
    for item in s.split(","):
        if not item.strip():
            continue
        t, v = item.split(":")
        pairs.append((_float(t), _float(v)))
    return tuple(pairs)


def _str(s):
    if not s:
        raise ValueError("empty value")
    return s


def _enum(*choices):
    def parse(s):
        if s not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}")
        return s
    return parse


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, CubicMode):
        return v.value
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{_fmt(t)}:{_fmt(x)}" for t, x in v)
        return ", ".join(_fmt(x) for x in v)
    return str(v)


_REQUIRED = object()

# key -> (section, field, parser, default)
SCHEMA = {
    "mesh.outer_width": ("mesh", "outer_width", _float, _REQUIRED),
    "mesh.outer_height": ("mesh", "outer_height", _float, _REQUIRED),
    "mesh.wall_thickness": ("mesh", "wall_thickness", _float, _REQUIRED),
    "mesh.target_h": ("mesh", "target_h", _float, _REQUIRED),
    "params.k_omega": ("params", "k_omega", _float, _REQUIRED),
    "params.k_wall": ("params", "k_wall", _float, _REQUIRED),
    "params.latent_l": ("params", "latent_l", _float, _REQUIRED),
    "params.tau": ("params", "tau", _float, _REQUIRED),
    "params.xi": ("params", "xi", _float, _REQUIRED),
    "params.lambda_bc": ("params", "lambda_bc", _float, _REQUIRED),
    "params.t_end": ("params", "t_end", _float, _REQUIRED),
    "stepper.dt": ("stepper", "dt", _float, _REQUIRED),
    "stepper.linsolve_tol": ("stepper", "linsolve_tol", _float, 1e-10),
    "stepper.linsolve_maxit": ("stepper", "linsolve_maxit", _int, 2000),
    "stepper.cubic_mode": ("stepper", "cubic_mode", _enum(*(m.value for m in CubicMode)), "SEMI_IMPLICIT"),
    "initial.preset": ("initial", "preset", _enum(*INITIAL_PRESETS), "liquid"),
    "initial.u0": ("initial", "u0", _float, 0.0),
    "initial.phi0": ("initial", "phi0", _float, 1.0),
    "boundary.preset": ("boundary", "preset", _enum(*BOUNDARY_PRESETS), "constant"),
    "boundary.value": ("boundary", "value", _float, 0.0),
    "boundary.start": ("boundary", "start", _float, 0.0),
    "boundary.rate": ("boundary", "rate", _float, -1.0),
    "boundary.floor": ("boundary", "floor", _opt_float, None),
    "boundary.table": ("boundary", "table", _table, ()),
    "output.stride": ("output", "stride", _int, 1),
    "output.dir": ("output", "dir", _str, "out"),
    "threads": (None, "threads", _int, 1),
    "perturbation.eps_u0": ("perturbation", "eps_u0", _float, 0.0),
    "perturbation.eps_phi0": ("perturbation", "eps_phi0", _float, 0.0),
    "perturbation.eps_g": ("perturbation", "eps_g", _float, 0.0),
    "perturbation.ladder": ("perturbation", "ladder", _float_list, (1e-1, 1e-2, 1e-3)),
    "convergence.mode": ("convergence", "mode", _enum(*CONVERGENCE_MODES), "scenario"),
    "convergence.levels": ("convergence", "levels", _int, 3),
    "convergence.oracle_ratio": ("convergence", "oracle_ratio", _int, 50),
}

_SECTIONS = {
    "mesh": MeshSpec, "params": ModelParams, "stepper": StepperConfig, "initial": InitialSpec,
    "boundary": BoundarySpec, "output": OutputSpec, "perturbation": PerturbationConfig,
    "convergence": ConvergenceConfig,
}


def _section_problems(section: str, obj) -> list[str]:
    if hasattr(obj, "problems"):
        return obj.problems()
    out = []
    if section == "output" and obj.stride < 1:
        out.append(f"stride must be at least 1, got {obj.stride}")
    if section == "boundary" and obj.preset == "table":
        times = [t for t, _ in obj.table]
        if not times:
            out.append("table must list at least one time:value pair")
        elif any(b <= a for a, b in zip(times, times[1:])):
            out.append("table times must be strictly increasing")
    if section == "boundary" and obj.preset == "ramp" and obj.floor is not None and obj.floor > obj.start and obj.rate < 0:
        out.append(f"floor {obj.floor} lies above the ramp start {obj.start}")
    if section == "perturbation":
        lad = obj.ladder
        if not lad or any(v <= 0 for v in lad) or any(b >= a for a, b in zip(lad, lad[1:])):
            out.append("ladder must be positive and strictly decreasing")
    if section == "convergence":
        if obj.levels < 2:
            out.append(f"levels must be at least 2, got {obj.levels}")
        if obj.oracle_ratio < 1:
            out.append(f"oracle_ratio must be at least 1, got {obj.oracle_ratio}")
    return out


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    values: dict[str, object] = {}
    line_of: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in line_of:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {line_of[key]})")
            continue
        line_of[key] = lineno
        try:
            values[key] = SCHEMA[key][2](val)
        except (ValueError, TypeError) as exc:
            errors.append(f"line {lineno}: {key}: cannot parse {val!r} ({exc})")

    for key, (_, _, _, default) in SCHEMA.items():
        if default is _REQUIRED and key not in line_of:
            errors.append(f"missing required key {key!r}")

    if errors:
        raise ConfigError(errors)

    kwargs: dict[str, dict] = {s: {} for s in _SECTIONS}
    top = {}
    for key, (section, name, _, default) in SCHEMA.items():
        v = values.get(key, default)
        (top if section is None else kwargs[section])[name] = v
    sections = {s: cls(**kwargs[s]) for s, cls in _SECTIONS.items()}

    for s, obj in sections.items():
        for msg in _section_problems(s, obj):
            name = msg.split()[0]
            key = f"{s}.{name}"
            where = f"line {line_of[key]}: " if key in line_of else ""
            errors.append(f"{where}{s}: {msg}")
    if top["threads"] < 1:
        errors.append(f"line {line_of['threads']}: threads must be at least 1")
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(threads=top["threads"], **sections)


def serialize_config(cfg: ScenarioConfig) -> str:
    lines = []
    section = None
    for key, (sec, name, _, _) in SCHEMA.items():
        if sec != section:
            if lines:
                lines.append("")
            section = sec
        obj = cfg if sec is None else getattr(cfg, sec)
        lines.append(f"{key} = {_fmt(getattr(obj, name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# presets

def ampoule_preset(target_h: float = 0.025) -> ScenarioConfig:
    """1 x 5 interior behind a 0.1 wall, cooled from the melting point at rate -1.

    The initial temperature, the starting value of g, the floor and the
    run length are choices of this package, not measured data.
    """
    return ScenarioConfig(
        mesh=MeshSpec(1.2, 5.2, 0.1, target_h),
        params=ModelParams(k_omega=1.0, k_wall=0.5, latent_l=1.0, tau=0.005, xi=0.03,
                           lambda_bc=10.0, t_end=2.0),
        stepper=StepperConfig(dt=1e-3),
        initial=InitialSpec("liquid"),
        boundary=BoundarySpec("ramp", start=0.0, rate=-1.0, floor=-2.0),
        output=OutputSpec(stride=250, dir="out/ampoule"),
    )


def freezing_preset() -> ScenarioConfig:
    """The ampoule problem on a coarse (~2k node) mesh, used for convergence checks."""
    cfg = ampoule_preset(target_h=0.06)
    return replace(cfg, output=OutputSpec(stride=500, dir="out/freezing"))


def equilibrium_preset() -> ScenarioConfig:
    return ScenarioConfig(
        mesh=MeshSpec(1.0, 1.0, 0.1, 0.05),
        params=ModelParams(1.0, 0.5, 1.0, 0.005, 0.03, 1.0, 0.1),
        stepper=StepperConfig(dt=1e-2),
        initial=InitialSpec("liquid"),
        boundary=BoundarySpec("constant", value=0.0),
        output=OutputSpec(stride=2, dir="out/equilibrium"),
    )


PRESETS = {"ampoule": ampoule_preset, "freezing": freezing_preset, "equilibrium": equilibrium_preset}
