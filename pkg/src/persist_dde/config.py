"""JSON run configuration: parsing, validation and the echo embedded in reports."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import HistorySegment, ModelSpec, StepControl, make_history_constant
from .errors import ConfigError, PersistDDEError
from .guiding.functions import BUILTIN_GUIDING, GuidingFunction
from .models import BUILTINS, DelayFamily, as_coefficient, family_model

COMMANDS = ("simulate", "check", "persistence", "attractor", "periodic")


@dataclass
class RunConfig:
    command: str
    model: ModelSpec
    V: GuidingFunction
    a: Any
    history: HistorySegment
    step: StepControl
    analysis: dict
    out_dir: str
    raw: dict = field(repr=False, default_factory=dict)

    def echo(self):
        return copy.deepcopy(self.raw)


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _positive(path, v, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        _fail(path, f"must be a finite positive number, got {v!r}")
    return float(v)


def _section(raw, key, required=True):
    sec = raw.get(key)
    if sec is None:
        if required:
            _fail(key, "missing block")
        return {}
    if not isinstance(sec, dict):
        _fail(key, "must be an object")
    return sec


def _coefficient(path, spec):
    try:
        return as_coefficient(spec)
    except (TypeError, ValueError, KeyError) as exc:
        _fail(path, str(exc))


def _model(sec):
    if "builtin" in sec:
        name = sec["builtin"]
        if name not in BUILTINS:
            _fail("model.builtin", f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}")
        params = sec.get("params", {})
        if not isinstance(params, dict):
            _fail("model.params", "must be an object")
        if "tau" in params:
            _positive("model.params.tau", params["tau"])
        try:
            return BUILTINS[name](**params)
        except TypeError as exc:
            _fail("model.params", str(exc))
        except (ValueError, PersistDDEError) as exc:
            _fail("model.params", str(exc))
    if "family" in sec:
        fam = sec["family"]
        if not isinstance(fam, dict):
            _fail("model.family", "must be an object")
        tau = _positive("model.family.tau", fam.get("tau"))
        coeffs = {}
        for key in ("A", "B", "P"):
            if key not in fam:
                continue
            val = fam[key]
            if key == "P":
                coeffs[key] = [_coefficient(f"model.family.P[{i}]", v) for i, v in enumerate(val)]
            else:
                coeffs[key] = [[_coefficient(f"model.family.{key}[{i}][{j}]", v) for j, v in enumerate(row)]
                               for i, row in enumerate(val)]
        try:
            family = DelayFamily(dim=fam.get("dim"), **coeffs)
            return family_model(family, tau, fam.get("label", "family"), bool(sec.get("cone", True)))
        except (ValueError, PersistDDEError) as exc:
            _fail("model.family", str(exc))
    _fail("model", "needs either 'builtin' or 'family'")


def _guiding(sec, model):
    name = sec.get("V", "linear")
    if name not in BUILTIN_GUIDING:
        _fail("guiding.V", f"unknown guiding function {name!r}; choose from {sorted(BUILTIN_GUIDING)}")
    V = BUILTIN_GUIDING[name]()
    a = sec.get("a", 1.0)
    if isinstance(a, (int, float)) and not isinstance(a, bool):
        a = _positive("guiding.a", a)
    else:
        a = _coefficient("guiding.a", a)
    return V, a


def _history(sec, model, M):
    if not sec:
        return make_history_constant(np.ones(model.dim), model.tau, M)
    if "constant" in sec:
        c = np.broadcast_to(np.asarray(sec["constant"], dtype=float), (model.dim,))
        if np.any(~np.isfinite(c)):
            _fail("history.constant", "must be finite")
        if model.cone and np.any(c < 0):
            _fail("history.constant", "must be nonnegative for cone models")
        return make_history_constant(c, model.tau, M)
    if "values" in sec:
        vals = np.asarray(sec["values"], dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[1] != model.dim or vals.shape[0] < 2:
            _fail("history.values", f"expected rows of length {model.dim}")
        try:
            return HistorySegment(model.tau, vals, nonneg=model.cone)
        except (ValueError, PersistDDEError) as exc:
            _fail("history.values", str(exc))
    _fail("history", "needs 'constant' or 'values'")


def _step(sec):
    kw = {}
    for key in ("h", "cap", "min_step"):
        if key in sec:
            kw[key] = _positive(f"step.{key}", sec[key])
    if "backend" in sec:
        if sec["backend"] not in ("auto", "compiled", "python", "callable"):
            _fail("step.backend", f"unknown backend {sec['backend']!r}")
        kw["backend"] = sec["backend"]
    return StepControl(**kw)


def _check_tolerances(analysis, path="analysis"):
    for key, val in analysis.items():
        if key in ("tol", "margin", "epsilon") or key.endswith("_tol"):
            _positive(f"{path}.{key}", val, allow_none=True)
        if key in ("t_end", "period", "R0", "r0", "R"):
            _positive(f"{path}.{key}", val, allow_none=True)


def parse_config(raw: dict, command: str, out_dir=None, seed_grid=None) -> RunConfig:
    """Validate a decoded JSON document into a :class:`RunConfig`.

    ``seed_grid`` is folded into the echo as ``analysis.seed_grid`` so that a
    re-run from the echoed document reproduces the same grids.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    raw = copy.deepcopy(raw)
    analysis = _section(raw, "analysis", required=False)
    if command == "check" and not analysis:
        _fail("analysis", "empty analysis block; list the hypotheses to check")
    if seed_grid is not None:
        if seed_grid < 1:
            _fail("--seed-grid", "must be a positive integer")
        analysis["seed_grid"] = int(seed_grid)
    raw["analysis"] = analysis
    _check_tolerances(analysis)
    model = _model(_section(raw, "model"))
    V, a = _guiding(_section(raw, "guiding", required=False), model)
    M = int(_section(raw, "history", required=False).get("M", 64))
    if M < 2:
        _fail("history.M", "need at least 2 intervals")
    history = _history(_section(raw, "history", required=False), model, M)
    step = _step(_section(raw, "step", required=False))
    output = _section(raw, "output", required=False)
    out = out_dir or output.get("dir", ".")
    return RunConfig(command, model, V, a, history, step, analysis, out, raw)


def load_config(path, command, out_dir=None, seed_grid=None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw, command, out_dir, seed_grid)
