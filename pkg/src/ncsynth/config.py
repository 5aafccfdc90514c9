"""Run configuration: one JSON document drives every pipeline stage."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


class ConfigError(Exception):
    """Malformed or inconsistent run configuration."""


def _require(d, key, kind, where):
    if key not in d:
        raise ConfigError(f"{where}: missing required key {key!r}")
    v = d[key]
    if kind is float and isinstance(v, int):
        v = float(v)
    if not isinstance(v, kind):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, "
                          f"got {type(v).__name__}")
    return v


def _vector(d, key, where, optional=False):
    if key not in d:
        if optional:
            return None
        raise ConfigError(f"{where}: missing required key {key!r}")
    v = d[key]
    if (not isinstance(v, list) or not v
            or not all(isinstance(x, (int, float)) for x in v)):
        raise ConfigError(f"{where}.{key}: expected a nonempty number list")
    return tuple(float(x) for x in v)


def _boxes(d, key, where):
    out = []
    for i, box in enumerate(d.get(key) or []):
        tag = f"{where}.{key}[{i}]"
        if (not isinstance(box, list) or len(box) != 2):
            raise ConfigError(f"{tag}: expected [lo, hi] corner pair")
        lo = _vector({"lo": box[0]}, "lo", tag)
        hi = _vector({"hi": box[1]}, "hi", tag)
        if len(lo) != len(hi):
            raise ConfigError(f"{tag}: corner dimensions differ")
        out.append((lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class GridConfig:
    lb: tuple
    ub: tuple
    eta: tuple

    @classmethod
    def from_dict(cls, d, where):
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected an object")
        lb = _vector(d, "lb", where)
        ub = _vector(d, "ub", where)
        eta = _vector(d, "eta", where)
        if not (len(lb) == len(ub) == len(eta)):
            raise ConfigError(f"{where}: lb/ub/eta lengths differ")
        return cls(lb=lb, ub=ub, eta=eta)


@dataclass(frozen=True)
class PlantConfig:
    name: str
    tau: float
    grid: GridConfig
    input_grid: GridConfig
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("plant: expected an object")
        return cls(name=_require(d, "name", str, "plant"),
                   tau=_require(d, "tau", float, "plant"),
                   grid=GridConfig.from_dict(d.get("grid"), "plant.grid"),
                   input_grid=GridConfig.from_dict(d.get("input_grid"),
                                                   "plant.input_grid"),
                   params=d.get("params") or {})


@dataclass(frozen=True)
class DelayConfig:
    nsc_min: int
    nsc_max: int
    nca_min: int
    nca_max: int

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("delays: expected an object")
        vals = {}
        for key in ("nsc_min", "nsc_max", "nca_min", "nca_max"):
            vals[key] = _require(d, key, int, "delays")
        if not (1 <= vals["nsc_min"] <= vals["nsc_max"]):
            raise ConfigError("delays: need 1 <= nsc_min <= nsc_max")
        if not (1 <= vals["nca_min"] <= vals["nca_max"]):
            raise ConfigError("delays: need 1 <= nca_min <= nca_max")
        return cls(**vals)

    @property
    def prolonged(self):
        return self.nsc_min == self.nsc_max and self.nca_min == self.nca_max


_SPEC_KINDS = ("safety", "reach", "persistence", "recurrence", "gen_buchi")


@dataclass(frozen=True)
class SpecConfig:
    kind: str
    targets: tuple = ()
    obstacles: tuple = ()
    safe: tuple = ()

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("spec: expected an object")
        kind = _require(d, "kind", str, "spec")
        if kind not in _SPEC_KINDS:
            raise ConfigError(f"spec.kind: {kind!r} is not one of {_SPEC_KINDS}")
        spec = cls(kind=kind,
                   targets=_boxes(d, "targets", "spec"),
                   obstacles=_boxes(d, "obstacles", "spec"),
                   safe=_boxes(d, "safe", "spec"))
        if kind in ("reach", "recurrence", "gen_buchi") and not spec.targets:
            raise ConfigError(f"spec: kind {kind!r} requires targets")
        if kind in ("safety", "persistence") and not (spec.safe or spec.obstacles):
            raise ConfigError(f"spec: kind {kind!r} requires safe boxes or "
                              f"obstacles")
        return spec


@dataclass(frozen=True)
class SimConfig:
    steps: int = 100
    x0: tuple = ()
    seed: int = 0
    channel_mode: str = "prolonged"
    u0: tuple = None

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        if not isinstance(d, dict):
            raise ConfigError("sim: expected an object")
        mode = d.get("channel_mode", "prolonged")
        if mode not in ("prolonged", "random"):
            raise ConfigError(f"sim.channel_mode: unknown mode {mode!r}")
        return cls(steps=_require(d, "steps", int, "sim") if "steps" in d else 100,
                   x0=_vector(d, "x0", "sim"),
                   seed=d.get("seed", 0),
                   channel_mode=mode,
                   u0=_vector(d, "u0", "sim", optional=True))


@dataclass(frozen=True)
class CodegenConfig:
    targets: tuple = ("c", "verilog")
    name: str = "controller"

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        targets = tuple(d.get("targets", ("c", "verilog")))
        for t in targets:
            if t not in ("c", "verilog"):
                raise ConfigError(f"codegen.targets: unknown target {t!r}")
        return cls(targets=targets, name=d.get("name", "controller"))


@dataclass(frozen=True)
class RunConfig:
    plant: PlantConfig
    delays: DelayConfig
    spec: SpecConfig
    sim: SimConfig
    codegen: CodegenConfig
    report_reachable: bool = False
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("top level: expected a JSON object")
        unknown = set(d) - {"plant", "delays", "spec", "sim", "codegen",
                            "report_reachable"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        if "plant" not in d:
            raise ConfigError("missing required section 'plant'")
        if "delays" not in d:
            raise ConfigError("missing required section 'delays'")
        if "spec" not in d:
            raise ConfigError("missing required section 'spec'")
        return cls(plant=PlantConfig.from_dict(d["plant"]),
                   delays=DelayConfig.from_dict(d["delays"]),
                   spec=SpecConfig.from_dict(d["spec"]),
                   sim=SimConfig.from_dict(d.get("sim")),
                   codegen=CodegenConfig.from_dict(d.get("codegen")),
                   report_reachable=bool(d.get("report_reachable", False)),
                   raw=d)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    def sha256(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
