"""Scenario files: a JSON object describing one numerical experiment.

Example::

    {"dimension": 2, "source": {"family": "dipole", "params": [0.25, 0.25, 0.75, 0.75, 0.1, 10]},
     "gamma": 1.5, "nu": 1.0, "r": 0.1, "d2": 0.01, "levels": [8, 16, 32],
     "init": {"kind": "constant", "value": 1.0}}

Unknown keys are rejected so that typos do not silently fall back to
defaults.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..energy import Params
from ..mesh import build_mesh_1d, build_mesh_2d, check_conductivities
from ..sources import SourceError, SourceSpec

MAX_LEVEL = 512

KEYS = {"dimension", "source", "gamma", "nu", "r", "d2", "levels", "init", "field",
        "epsilons", "perturbation", "tol", "max_iter", "t_end", "dt", "svg", "reference"}
INIT_KEYS = {"zero": set(), "constant": {"value"}, "random": {"seed", "low", "high"},
             "field": {"name"}}


class ScenarioError(ValueError):
    pass


# named smooth fields: name -> (c1(x, y), c2(x, y)); 1D uses c1(x, 0)
def _named_fields(value):
    return {
        "zero": (lambda x, y: 0.0 * x, lambda x, y: 0.0 * x),
        "constant": (lambda x, y: value + 0.0 * x, lambda x, y: value + 0.0 * x),
        "linear": (lambda x, y: 1.0 + x, lambda x, y: 1.0 + x),
        "quadratic": (lambda x, y: 1.0 + x * x, lambda x, y: 1.0 + y * y),
        "bilinear": (lambda x, y: 1.0 + x * y, lambda x, y: 1.0 + x * y),
    }


@dataclass(frozen=True)
class SmoothField:
    """A named conductivity field, e.g. ``"quadratic"`` or ``"constant 2.5"``."""
    name: str
    value: float = 0.0

    @classmethod
    def parse(cls, spec):
        if isinstance(spec, SmoothField):
            return spec
        if not isinstance(spec, str) or not spec.split():
            raise ScenarioError(f"field must be a non-empty string, got {spec!r}")
        tokens = spec.split()
        name = tokens[0]
        if name not in _named_fields(0.0):
            raise ScenarioError(f"unknown field {name!r}; expected one of {sorted(_named_fields(0.0))}")
        if name == "constant":
            if len(tokens) != 2:
                raise ScenarioError("field 'constant' takes one value, e.g. 'constant 2.0'")
            try:
                value = float(tokens[1])
            except ValueError:
                raise ScenarioError(f"bad constant {tokens[1]!r}") from None
            if value < 0:
                raise ScenarioError("constant field must be nonnegative")
            return cls(name, value)
        if len(tokens) != 1:
            raise ScenarioError(f"field {name!r} takes no parameters")
        return cls(name)

    def functions(self):
        return _named_fields(self.value)[self.name]

    def functions_1d(self):
        f1, _ = self.functions()
        return lambda x: f1(x, 0.0 * x)

    def __str__(self):
        return f"constant {self.value!r}" if self.name == "constant" else self.name


@dataclass(frozen=True)
class Init:
    kind: str = "zero"
    value: float = 0.0
    seed: int = 0
    low: float = 0.0
    high: float = 1.0
    name: str = "zero"

    @classmethod
    def parse(cls, spec):
        if spec is None:
            return cls()
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ScenarioError(f"init must be an object with a 'kind', got {spec!r}")
        kind = spec["kind"]
        if kind not in INIT_KEYS:
            raise ScenarioError(f"unknown init kind {kind!r}; expected one of {sorted(INIT_KEYS)}")
        extra = set(spec) - {"kind"} - INIT_KEYS[kind]
        if extra:
            raise ScenarioError(f"unknown keys for init kind {kind!r}: {sorted(extra)}")
        try:
            if kind == "constant":
                v = float(spec.get("value", 1.0))
                if v < 0:
                    raise ScenarioError("constant init must be nonnegative")
                return cls(kind, value=v)
            if kind == "random":
                lo, hi = float(spec.get("low", 0.0)), float(spec.get("high", 1.0))
                if not 0 <= lo <= hi:
                    raise ScenarioError("random init needs 0 <= low <= high")
                return cls(kind, seed=int(spec.get("seed", 0)), low=lo, high=hi)
            if kind == "field":
                SmoothField.parse(spec.get("name", "zero"))
                return cls(kind, name=spec.get("name", "zero"))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"bad init {spec!r}: {exc}") from None
        return cls(kind)

    def conductivities(self, mesh):
        n = mesh.n_edges
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "random":
            rng = np.random.Generator(np.random.Philox(self.seed))
            return rng.uniform(self.low, self.high, n)
        f1, f2 = SmoothField.parse(self.name).functions()
        if mesh.dim == 1:
            return np.maximum(0.0, f1(mesh.midpoints, 0.0 * mesh.midpoints))
        mid = mesh.edge_midpoints
        nh = mesh.n_hedges
        return np.maximum(0.0, np.concatenate([f1(mid[:nh, 0], mid[:nh, 1]), f2(mid[nh:, 0], mid[nh:, 1])]))

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "random":
            d.update(seed=self.seed, low=self.low, high=self.high)
        elif self.kind == "field":
            d["name"] = self.name
        return d


@dataclass(frozen=True)
class Scenario:
    dimension: int
    source: SourceSpec
    params: Params
    levels: tuple
    init: Init = Init()
    field: SmoothField = None
    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    perturbation: int = 3
    tol: float = 1e-8
    max_iter: int = 20000
    t_end: float = 5.0
    dt: float = 1e-2
    svg: bool = False
    reference: str = "auto"

    def mesh(self, N):
        return build_mesh_1d(N) if self.dimension == 1 else build_mesh_2d(N)

    def smooth_field(self):
        if self.field is None:
            raise ScenarioError("this study needs a 'field' entry, e.g. \"quadratic\"")
        return self.field

    def initial_conductivities(self, mesh):
        return check_conductivities(mesh, self.init.conductivities(mesh))

    def to_dict(self):
        d = {"dimension": self.dimension, "source": self.source.to_dict(),
             "gamma": self.params.gamma, "nu": self.params.nu, "r": self.params.r,
             "d2": self.params.d2, "levels": list(self.levels), "init": self.init.to_dict(),
             "epsilons": list(self.epsilons), "perturbation": self.perturbation, "tol": self.tol,
             "max_iter": self.max_iter, "t_end": self.t_end, "dt": self.dt, "svg": self.svg,
             "reference": self.reference}
        if self.field is not None:
            d["field"] = str(self.field)
        return d


def _number(data, key, default, kind=float):
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{key!r} must be a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ScenarioError(f"{key!r} must be an integer, got {v!r}")
        return int(v)
    v = float(v)
    if not np.isfinite(v):
        raise ScenarioError(f"{key!r} must be finite")
    return v


def scenario_from_dict(data):
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("dimension", "source", "levels"):
        if key not in data:
            raise ScenarioError(f"scenario is missing {key!r}")
    dim = data["dimension"]
    if dim not in (1, 2) or isinstance(dim, bool):
        raise ScenarioError(f"dimension must be 1 or 2, got {dim!r}")
    try:
        source = SourceSpec.parse(data["source"])
    except SourceError as exc:
        raise ScenarioError(str(exc)) from None
    if not source.supports(dim):
        raise ScenarioError(f"source {source} is not defined in {dim}D")
    try:
        params = Params(_number(data, "gamma", 1.5), _number(data, "nu", 1.0),
                        _number(data, "r", 0.1), _number(data, "d2", 0.0))
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    levels = data["levels"]
    if (not isinstance(levels, list) or not levels
            or not all(isinstance(n, int) and not isinstance(n, bool) for n in levels)):
        raise ScenarioError(f"levels must be a non-empty list of integers, got {levels!r}")
    if any(n < 1 or n > MAX_LEVEL for n in levels):
        raise ScenarioError(f"levels must lie in 1..{MAX_LEVEL}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ScenarioError(f"levels must be strictly increasing, got {levels}")
    eps = data.get("epsilons", [0.4, 0.2, 0.1, 0.05])
    if not isinstance(eps, list) or not eps or any(
            isinstance(e, bool) or not isinstance(e, (int, float)) or e < 0 for e in eps):
        raise ScenarioError("epsilons must be a non-empty list of nonnegative numbers")
    ref = data.get("reference", "auto")
    if ref not in ("auto", "analytic", "finest"):
        raise ScenarioError(f"reference must be 'auto', 'analytic' or 'finest', got {ref!r}")
    svg = data.get("svg", False)
    if not isinstance(svg, bool):
        raise ScenarioError("svg must be true or false")
    sc = Scenario(
        dimension=dim, source=source, params=params, levels=tuple(levels),
        init=Init.parse(data.get("init")),
        field=SmoothField.parse(data["field"]) if "field" in data else None,
        epsilons=tuple(float(e) for e in eps),
        perturbation=_number(data, "perturbation", 3, int),
        tol=_number(data, "tol", 1e-8), max_iter=_number(data, "max_iter", 20000, int),
        t_end=_number(data, "t_end", 5.0), dt=_number(data, "dt", 1e-2),
        svg=svg, reference=ref)
    if sc.tol <= 0 or sc.max_iter < 1 or sc.t_end < 0 or sc.dt <= 0 or sc.perturbation < 1:
        raise ScenarioError("tol, dt and perturbation must be positive, max_iter >= 1, t_end >= 0")
    return sc


def load_scenario(path):
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(f"scenario file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: invalid JSON ({exc})") from None
    return scenario_from_dict(data)
