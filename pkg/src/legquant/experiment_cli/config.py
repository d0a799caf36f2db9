"""Experiment configuration: YAML files checked against a JSON schema."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import yaml

from ..errors import ConfigError
from ..legendrian import BUILTINS, LegendrianImmersion
from ..model_geometry import BundlePoint, TorusAction

SCHEMA_VERSION = 1

_complex = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_cvec = {"type": "array", "items": _complex, "minItems": 1}
_family = {
    "type": "object",
    "required": ["family"],
    "additionalProperties": False,
    "properties": {
        "family": {"enum": sorted(BUILTINS)},
        "params": {"type": "object"},
        "f_lambda": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "trig"]},
                "value": _complex,
                "terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["freq", "coef"],
                        "additionalProperties": False,
                        "properties": {
                            "freq": {"type": "array", "items": {"type": "integer"}},
                            "coef": _complex,
                        },
                    },
                },
            },
        },
    },
}
_krange = {
    "type": "object",
    "required": ["min", "max"],
    "additionalProperties": False,
    "properties": {
        "min": {"type": "integer", "minimum": 0},
        "max": {"type": "integer", "minimum": 0},
        "step": {"type": "integer", "minimum": 1},
        "parity": {"enum": ["all", "even", "odd"]},
    },
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "id", "model", "legendrian", "k_range"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "kind": {"enum": ["state", "pairing"]},
        "model": {
            "type": "object",
            "required": ["n"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "kernel": {"enum": ["sphere-unit-pi"]},
            },
        },
        "legendrian": _family,
        "sigma": _family,
        "action": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["weights"],
                    "additionalProperties": False,
                    "properties": {
                        "weights": {
                            "type": "array",
                            "items": {"type": "array", "items": {"type": "integer"}},
                        },
                        "shift": {"type": "array", "items": {"type": "number"}},
                    },
                },
            ]
        },
        "varpi_list": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
        "probes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "point"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "point": _cvec,
                    "w": _cvec,
                    "chart": {"enum": ["standard", "adapted"]},
                    "k_range": _krange,
                    "checks": {"type": "array", "items": {"enum": ["fit", "compare", "decay"]}},
                },
            },
        },
        "k_range": _krange,
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nodes": {"type": "integer", "minimum": 8},
                "group_nodes": {"type": "integer", "minimum": 8},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fit": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "phase_pattern": {
                            "oneOf": [{"enum": ["auto", "interference", "prediction"]}, {"type": "integer"}]
                        },
                        "correction": {"type": ["number", "null"]},
                        "expected_exponent": {"type": "number"},
                        "exponent_tol": {"type": "number", "exclusiveMinimum": 0},
                        "expected_coefficient": {"type": "number"},
                        "coefficient_rtol": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "compare": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "rtol": {"type": "number", "exclusiveMinimum": 0},
                        "min_pattern": {"type": "number", "minimum": 0},
                        "k_min": {"type": "integer", "minimum": 0},
                    },
                },
                "decay": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "N_max": {"type": "integer", "minimum": 0},
                        "threshold": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


def parse_complex(v) -> complex:
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError as exc:
            raise ConfigError(f"cannot read {v!r} as a complex number") from exc
    return complex(v)


@dataclass(frozen=True)
class KRange:
    min: int
    max: int
    step: int = 1
    parity: str = "all"

    def values(self) -> np.ndarray:
        ks = np.arange(self.min, self.max + 1, self.step)
        if self.parity == "even":
            ks = ks[ks % 2 == 0]
        elif self.parity == "odd":
            ks = ks[ks % 2 == 1]
        return ks

    @classmethod
    def from_dict(cls, d: dict) -> "KRange":
        kr = cls(d["min"], d["max"], d.get("step", 1), d.get("parity", "all"))
        if kr.max < kr.min or len(kr.values()) == 0:
            raise ConfigError(f"k_range {d} selects no levels")
        return kr


@dataclass(frozen=True)
class Probe:
    id: str
    point: BundlePoint
    w: np.ndarray | None
    chart: str
    k_range: KRange | None
    checks: tuple[str, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    id: str
    kind: str
    n: int
    legendrian: dict
    sigma: dict | None
    action: TorusAction | None
    varpi_list: tuple[tuple[int, ...], ...]
    probes: tuple[Probe, ...]
    k_range: KRange
    quadrature: dict
    tolerances: dict
    output_dir: str = "results"
    source: str | None = field(default=None, compare=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def build_legendrian(self, desc: dict | None = None) -> LegendrianImmersion:
        return build_family(desc or self.legendrian, self.n)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _weight_fn(desc: dict | None):
    if desc is None or desc["kind"] == "constant":
        c = parse_complex((desc or {}).get("value", 1.0))
        if c == 1.0:
            return None
        return lambda t: np.full(np.shape(t)[:-1], c, dtype=complex)
    terms = [(np.asarray(tm["freq"], dtype=float), parse_complex(tm["coef"])) for tm in desc.get("terms", [])]
    if not terms:
        raise ConfigError("trig weight needs at least one term")

    def f(t):
        t = np.asarray(t, dtype=float)
        return sum(c * np.exp(1j * (t @ fr)) for fr, c in terms)

    return f


def build_family(desc: dict, n: int) -> LegendrianImmersion:
    params = dict(desc.get("params", {}))
    fam = desc["family"]
    try:
        if fam == "knot":
            if n != 1:
                raise ConfigError("the knot family lives in n = 1")
            L = BUILTINS[fam](float(params.get("a", 0.0)))
        elif fam == "torus_product":
            a = params.get("a", [0.0] * n)
            L = BUILTINS[fam](n, np.asarray(a, dtype=float))
        else:  # pragma: no cover - schema restricts the names
            raise ConfigError(f"unknown family {fam}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for {fam}: {exc}") from exc
    fw = _weight_fn(desc.get("f_lambda"))
    return L.with_weight(fw) if fw is not None else L


def _point(vals, n: int, where: str) -> BundlePoint:
    v = np.array([parse_complex(c) for c in vals])
    if v.shape != (n + 1,):
        raise ConfigError(f"{where}: point needs {n + 1} entries")
    if np.linalg.norm(v) == 0:
        raise ConfigError(f"{where}: point is zero")
    return BundlePoint.normalized(v)


def load_config_dict(raw: dict, source: str | None = None) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source or 'config'}: {loc}: {exc.message}") from exc
    raw = copy.deepcopy(raw)
    n = raw["model"]["n"]
    kind = raw.get("kind", "state")
    act = None
    if raw.get("action"):
        W = np.asarray(raw["action"]["weights"], dtype=int)
        if W.ndim != 2 or W.shape[1] != n + 1:
            raise ConfigError(f"action weights must be g x {n + 1}")
        try:
            act = TorusAction(W, raw["action"].get("shift"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    g = 0 if act is None else act.g
    varpis = tuple(tuple(v) for v in raw.get("varpi_list", [[0] * g] if g else [[]]))
    for v in varpis:
        if len(v) != g:
            raise ConfigError(f"varpi {list(v)} must have {g} entries")
    probes = []
    for p in raw.get("probes", []):
        w = None
        if "w" in p:
            w = np.array([parse_complex(c) for c in p["w"]])
            if w.shape != (n,):
                raise ConfigError(f"probe {p['id']}: w needs {n} entries")
        probes.append(
            Probe(
                p["id"],
                _point(p["point"], n, f"probe {p['id']}"),
                w,
                p.get("chart", "standard"),
                KRange.from_dict(p["k_range"]) if "k_range" in p else None,
                tuple(p.get("checks", ["compare"])),
            )
        )
    if len({p.id for p in probes}) != len(probes):
        raise ConfigError("probe ids must be unique")
    if kind == "state" and not probes:
        raise ConfigError("state experiments need at least one probe")
    if kind == "pairing" and "sigma" not in raw:
        raise ConfigError("pairing experiments need a sigma entry")
    cfg = ExperimentConfig(
        raw=raw,
        id=raw["id"],
        kind=kind,
        n=n,
        legendrian=raw["legendrian"],
        sigma=raw.get("sigma"),
        action=act,
        varpi_list=varpis,
        probes=tuple(probes),
        k_range=KRange.from_dict(raw["k_range"]),
        quadrature=raw.get("quadrature", {}),
        tolerances=raw.get("tolerances", {}),
        output_dir=raw.get("output", {}).get("dir", "results"),
        source=source,
    )
    # fail early on bad family parameters
    cfg.build_legendrian()
    if cfg.sigma:
        cfg.build_legendrian(cfg.sigma)
    return cfg


def builtin_config_names() -> list[str]:
    root = resources.files(__package__) / "configs"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(path_or_name: str | Path) -> ExperimentConfig:
    """Load a YAML config from a path, or a bundled config by name."""
    p = Path(path_or_name)
    if p.exists():
        text, source = p.read_text(), str(p)
    elif str(path_or_name) in builtin_config_names():
        res = resources.files(__package__) / "configs" / f"{path_or_name}.yaml"
        text, source = res.read_text(), f"builtin:{path_or_name}"
    else:
        raise ConfigError(f"no config file or bundled config named {path_or_name!r}")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    return load_config_dict(raw, source)
