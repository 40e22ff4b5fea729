"""Strict JSON experiment configuration.

Document shape::

    {
      "seed": 7,
      "experiments": [
        {
          "name": "occupation", "kind": "occupation_growth",
          "walk": {"base": {"kind": "LazySimpleNeighbor", "dim": 2}},
          "membrane": [{"point": [0, 0], "law": {"kind": "Categorical", "support": [[1, 0, "0.5"], [-1, 0, "0.5"]]}}],
          "horizons": [10000, 1000000], "replicates": 10000,
          "seed": 11, "norm": "euclidean", "params": {"quantile_factor": 1.5}
        }
      ]
    }

Probabilities may be given as decimal strings so that the config hash does
not depend on binary float formatting.
"""
from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import ConfigError
from .experiments import EXPERIMENTS, PARAMS, ExperimentSpec
from .lattice import Membrane, point
from .laws import law_from_dict

TOP_FIELDS = {"seed", "experiments", "description"}
EXPERIMENT_FIELDS = {"name", "kind", "walk", "membrane", "horizons", "replicates", "seed", "norm", "params"}
REQUIRED = {"kind", "walk", "horizons", "replicates"}


def canonical_text(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(doc: Any) -> str:
    return hashlib.sha256(canonical_text(doc).encode()).hexdigest()


def _check_fields(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path)
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown field(s) {sorted(extra)}", path)


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"expected an integer, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be at least {minimum}", path)
    return value


def _membrane(entries, dim, path) -> Membrane:
    if not isinstance(entries, list):
        raise ConfigError("membrane must be a list", path)
    pairs = []
    for i, e in enumerate(entries):
        p = f"{path}[{i}]"
        _check_fields(e, {"point", "law"}, p)
        if "point" not in e or "law" not in e:
            raise ConfigError("membrane entries need 'point' and 'law'", p)
        try:
            x = point(e["point"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), f"{p}.point") from None
        if len(x) != dim:
            raise ConfigError(f"point has dimension {len(x)}, walk has {dim}", f"{p}.point")
        pairs.append((x, law_from_dict(e["law"], f"{p}.law")))
    try:
        return Membrane(tuple(pairs))
    except ConfigError as exc:
        raise ConfigError(exc.message, path) from None


def parse_document(doc: Any, seed_override: int | None = None) -> list[ExperimentSpec]:
    _check_fields(doc, TOP_FIELDS, "$")
    if "experiments" not in doc:
        raise ConfigError("missing field 'experiments'", "$")
    exps = doc["experiments"]
    if not isinstance(exps, list):
        raise ConfigError("experiments must be a list", "$.experiments")
    master = doc.get("seed", 0)
    specs = []
    names = set()
    for i, e in enumerate(exps):
        p = f"$.experiments[{i}]"
        _check_fields(e, EXPERIMENT_FIELDS, p)
        missing = REQUIRED - set(e)
        if missing:
            raise ConfigError(f"missing field(s) {sorted(missing)}", p)
        kind = e["kind"]
        if kind not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {sorted(EXPERIMENTS)}", f"{p}.kind")
        walk = e["walk"]
        _check_fields(walk, {"base"}, f"{p}.walk")
        if "base" not in walk:
            raise ConfigError("missing field 'base'", f"{p}.walk")
        base = law_from_dict(walk["base"], f"{p}.walk.base")
        membrane = _membrane(e.get("membrane", []), base.dim, f"{p}.membrane")
        hs = e["horizons"]
        if not isinstance(hs, list) or not hs:
            raise ConfigError("horizons must be a nonempty list", f"{p}.horizons")
        hs = [_int(h, f"{p}.horizons[{j}]", 1) for j, h in enumerate(hs)]
        if hs != sorted(hs):
            raise ConfigError("horizons must be sorted ascending", f"{p}.horizons")
        reps = _int(e["replicates"], f"{p}.replicates", 100)
        params = e.get("params", {})
        _check_fields(params, PARAMS[kind], f"{p}.params")
        seed = e.get("seed", master)
        if seed_override is not None:
            seed = seed_override
        seed = _int(seed, f"{p}.seed")
        name = e.get("name", f"{kind}_{i}")
        if not isinstance(name, str) or not name or any(c in name for c in "/\\"):
            raise ConfigError("name must be a nonempty string without path separators", f"{p}.name")
        if name in names:
            raise ConfigError(f"duplicate experiment name {name!r}", f"{p}.name")
        names.add(name)
        try:
            specs.append(ExperimentSpec(kind=kind, base=base, membrane=membrane, horizons=tuple(hs),
                                        replicates=reps, seed=seed, norm=e.get("norm", "euclidean"),
                                        params=dict(params), name=name, index=i))
        except ConfigError as exc:
            raise ConfigError(exc.message, f"{p}.{exc.path}" if exc.path else p) from None
    return specs


def parse_config(text: str, seed_override: int | None = None) -> list[ExperimentSpec]:
    """Validate a JSON config document and return one spec per experiment."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "$") from None
    return parse_document(doc, seed_override)
