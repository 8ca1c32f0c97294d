"""JSON run configuration: schema validation, defaults, and model construction."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .cir import CirParams
from .errors import ConfigError, DomainError
from .mc import PathConfig
from .model import QuadraturePolicy, SubCirModel, Truncation
from .subordinators import SubordinatorSpec

SEED_ENV = "SUBCIR_SEED"

DEFAULTS = {
    "numerics": {"n_max": 200, "tol": 1e-10, "t_min": 1e-3, "rel_tol": 1e-8, "budget": 1_000_000},
    "mc": {"n_paths": 1000, "h": 1 / 500, "seed": 0, "antithetic": False,
           "business_times": {"start": 0.0, "stop": 5.0, "num": 251}},
    "spectrum": {"n": 20},
    "survival": {"horizons": [1, 3, 5]},
    "spreads": {"horizons": [1, 3, 5]},
    "levy": {"x": [0.01, 0.1, 0.2], "y": {"start": 0.002, "stop": 0.4, "num": 200}},
    "intensity": {"x": {"start": 0.0, "stop": 0.4, "num": 81}},
    "price": {"claims": []},
    "validate": {"n_paths": 100_000, "sampler_draws": 1_000_000},
}


def _data_text(name: str) -> str:
    return resources.files("subcir").joinpath("data", name).read_text(encoding="utf-8")


def schema() -> dict:
    return json.loads(_data_text("config.schema.json"))


def shipped_config_text() -> str:
    return _data_text("paper_fig.json")


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def grid(spec) -> np.ndarray:
    """A grid is either an explicit list or ``{"start", "stop", "num"}``."""
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)


def _semantic_problems(cfg: dict):
    probs = []
    sub = cfg["model"]["subordinator"]
    if "C" not in sub and sub.get("gamma", 0) <= 0:
        probs.append(("/model/subordinator", "a subordinator without jumps needs gamma > 0"))
    bt = grid(cfg["mc"]["business_times"])
    if bt[0] < 0 or np.any(np.diff(bt) <= 0):
        probs.append(("/mc/business_times", "must start at >= 0 and increase strictly"))
    for key in ("survival", "spreads"):
        hz = grid(cfg[key]["horizons"])
        if np.any(hz < 0):
            probs.append((f"/{key}/horizons", "horizons must be nonnegative"))
    return probs


@dataclass(frozen=True)
class RunConfig:
    data: dict

    def model(self) -> SubCirModel:
        md, nm = self.data["model"], self.data["numerics"]
        sub = md["subordinator"]
        spec = (SubordinatorSpec.tempered_stable(sub["C"], sub["alpha"], sub["eta"], sub.get("gamma", 0.0))
                if "C" in sub else SubordinatorSpec.drift_only(sub["gamma"]))
        return SubCirModel(
            CirParams(float(md["kappa"]), float(md["theta"]), float(md["sigma"])),
            spec,
            Truncation(nm["n_max"], nm["tol"], nm["t_min"]),
            QuadraturePolicy(nm["rel_tol"], nm["budget"]),
        )

    def path_config(self) -> PathConfig:
        c = self.data["mc"]
        return PathConfig(grid(c["business_times"]).tolist(), c["n_paths"], c["seed"], c["h"],
                          c["antithetic"], c.get("x0"))

    def section(self, name: str) -> dict:
        return self.data[name]


def parse_config(text: str, env=None) -> RunConfig:
    """Validate JSON text, apply defaults and the seed override from the environment."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"malformed JSON: {exc}")]) from exc
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise ConfigError([(_pointer(e.absolute_path), e.message) for e in errors])
    cfg = _merge(DEFAULTS, raw)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            cfg["mc"]["seed"] = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError([("/mc/seed", f"{SEED_ENV} must be an integer")]) from exc
        if not 0 <= cfg["mc"]["seed"] < 2**64:
            raise ConfigError([("/mc/seed", f"{SEED_ENV} must fit in 64 unsigned bits")])
    probs = _semantic_problems(cfg)
    if probs:
        raise ConfigError(probs)
    rc = RunConfig(cfg)
    try:
        rc.model()
    except DomainError as exc:
        raise ConfigError([("/model", str(exc))]) from exc
    return rc


def load_config(path, env=None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from exc
    return parse_config(text, env)
