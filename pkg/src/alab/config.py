"""Run configuration: JSON schema, validation, and construction of the objects a run needs."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .errors import ConfigError
from .fibfam import MONOMIAL_CASCADE, FiberedPair, TrapRegion, make_cascade_pair
from .hpoly import HomogeneousPolynomial, ProjectiveMap

EXPERIMENTS = (
    "genericity",
    "search",
    "verify-std",
    "dkloc",
    "potential-sup",
    "potential-l1",
    "modulus",
    "lyapunov",
    "full-suite",
)
# these only look at the pair (f_inf, R) and never at f_eps
PAIR_ONLY = ("genericity", "search")

_complex = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_term = {
    "type": "object",
    "properties": {
        "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "re": {"type": "number"},
        "im": {"type": "number"},
    },
    "required": ["exponents"],
    "additionalProperties": False,
}
_poly = {"type": "array", "items": _term, "minItems": 1}

PARAM_DEFAULTS = {
    "n_max": 5,
    "samples": 200,
    "budget": 100,
    "generic_n_max": 4,
    "stratified_fraction": 0.5,
    "dk_n_max": 10,
    "dk_samples": 2000,
    "dk_leaf_budget": 1 << 20,
    "dk_method": "fibered",
    "mass_samples": 10000,
    "pot_n_max": 8,
    "pot_samples": 100,
    "fiber_shift": 0.0005,
    "n_eval": 7,
    "pairs_per_distance": 10,
    "distance_exponents": [2, 12],
    "n_transient": 1000,
    "n_cocycle": 10000,
    "start": [[0.3, 0.0], [1.0, 0.0], [0.001, 0.0]],
    "orbit_mode": "backward",
    "block_size": 50,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "family": {
            "type": "object",
            "properties": {
                "k": {"type": "integer", "minimum": 2},
                "d": {"type": "integer", "minimum": 2},
                "alpha": {"type": "array", "items": _complex, "minItems": 2},
                "f_inf": {"type": "array", "items": _poly, "minItems": 2},
                "R": _poly,
                "base_kind": {"enum": ["p1-general", "monomial-cascade"]},
                "power_shift": {"type": "array", "items": _complex},
            },
            "required": ["k", "d"],
            "oneOf": [{"required": ["alpha"]}, {"required": ["f_inf", "R"]}],
            "additionalProperties": False,
        },
        "epsilon": _complex,
        "region": {
            "oneOf": [
                {"const": "auto"},
                {
                    "type": "object",
                    "properties": {"c": {"type": "number", "exclusiveMinimum": 0}, "c_outer": {"type": "number", "exclusiveMinimum": 0}},
                    "required": ["c"],
                    "additionalProperties": False,
                },
            ]
        },
        "experiment": {"enum": list(EXPERIMENTS)},
        "params": {
            "type": "object",
            "properties": {
                "n_max": {"type": "integer", "minimum": 0, "maximum": 12},
                "samples": {"type": "integer", "minimum": 1},
                "budget": {"type": "integer", "minimum": 1},
                "generic_n_max": {"type": "integer", "minimum": 1, "maximum": 12},
                "stratified_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "dk_n_max": {"type": "integer", "minimum": 2, "maximum": 20},
                "dk_samples": {"type": "integer", "minimum": 2},
                "dk_leaf_budget": {"type": "integer", "minimum": 1},
                "dk_method": {"enum": ["fibered", "jacobian", "count"]},
                "mass_samples": {"type": "integer", "minimum": 2},
                "pot_n_max": {"type": "integer", "minimum": 3, "maximum": 10},
                "pot_samples": {"type": "integer", "minimum": 2},
                "fiber_shift": {"type": "number"},
                "n_eval": {"type": "integer", "minimum": 0, "maximum": 10},
                "pairs_per_distance": {"type": "integer", "minimum": 1},
                "distance_exponents": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
                "n_transient": {"type": "integer", "minimum": 0},
                "n_cocycle": {"type": "integer", "minimum": 100},
                "start": {"type": "array", "items": _complex, "minItems": 3},
                "orbit_mode": {"enum": ["backward", "forward"]},
                "block_size": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "allow_zero_epsilon": {"type": "boolean"},
    },
    "required": ["family", "epsilon", "experiment", "seed"],
    "additionalProperties": False,
}


def _error_text(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return f"{where}: unknown key(s) {', '.join(repr(k) for k in extra)}"
    return f"{where}: {err.message}"


@dataclass
class RunConfig:
    family: dict
    epsilon: complex
    experiment: str
    seed: int
    region: object = "auto"
    params: dict = field(default_factory=dict)
    output_dir: str = "runs/out"
    allow_zero_epsilon: bool = False

    def param(self, name: str):
        return self.params.get(name, PARAM_DEFAULTS[name])

    def pair(self) -> FiberedPair:
        return build_pair(self.family)

    def to_dict(self) -> dict:
        out = {
            "family": copy.deepcopy(self.family),
            "epsilon": [self.epsilon.real, self.epsilon.imag],
            "region": copy.deepcopy(self.region),
            "experiment": self.experiment,
            "params": {**PARAM_DEFAULTS, **self.params},
            "seed": self.seed,
            "output_dir": self.output_dir,
            "allow_zero_epsilon": self.allow_zero_epsilon,
        }
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def validate(tree) -> list[str]:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(tree), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    msgs = [_error_text(e) for e in errs]
    if not msgs:
        msgs += _semantic_errors(tree)
    return msgs


def _semantic_errors(tree: dict) -> list[str]:
    msgs = []
    fam = tree["family"]
    k = fam["k"]
    if "alpha" in fam and len(fam["alpha"]) != k:
        msgs.append(f"family/alpha: need {k} entries, got {len(fam['alpha'])}")
    if "alpha" in fam and any(a == [0, 0] for a in fam["alpha"]):
        msgs.append("family/alpha: entries must be nonzero")
    if "f_inf" in fam and len(fam["f_inf"]) != k:
        msgs.append(f"family/f_inf: need {k} components on P^{k - 1}, got {len(fam['f_inf'])}")
    eps = complex(*tree["epsilon"])
    if eps == 0 and tree["experiment"] not in PAIR_ONLY and not tree.get("allow_zero_epsilon", False):
        msgs.append(f"epsilon: |epsilon| = 0 is degenerate for experiment {tree['experiment']!r} (pass --allow-zero-epsilon to run it as a control)")
    if not msgs:
        try:
            build_pair(fam)
        except (ValueError, ConfigError) as exc:
            msgs.append(f"family: {exc}")
    return msgs


def from_tree(tree) -> RunConfig:
    msgs = validate(tree)
    if msgs:
        raise ConfigError(msgs)
    return RunConfig(
        family=copy.deepcopy(tree["family"]),
        epsilon=complex(*tree["epsilon"]),
        experiment=tree["experiment"],
        seed=int(tree["seed"]),
        region=copy.deepcopy(tree.get("region", "auto")),
        params=dict(tree.get("params", {})),
        output_dir=tree.get("output_dir", "runs/out"),
        allow_zero_epsilon=bool(tree.get("allow_zero_epsilon", False)),
    )


def parse_config(text: str) -> RunConfig:
    """JSON text to a validated RunConfig; raises ConfigError listing every problem found."""
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed config: {exc}"]) from exc
    return from_tree(tree)


def _poly_from(terms, nvars: int, d: int) -> HomogeneousPolynomial:
    return HomogeneousPolynomial(nvars, d, [(t["exponents"], complex(t.get("re", 1.0), t.get("im", 0.0))) for t in terms])


def build_pair(fam: dict) -> FiberedPair:
    k, d = fam["k"], fam["d"]
    if "alpha" in fam:
        pair = make_cascade_pair(k, d, [complex(*a) for a in fam["alpha"]])
    else:
        F = ProjectiveMap([_poly_from(c, k, d) for c in fam["f_inf"]])
        R = _poly_from(fam["R"], k, d)
        kind = fam.get("base_kind", MONOMIAL_CASCADE if F.is_pure_power_map() else "p1-general")
        pair = FiberedPair(k, d, F, R, kind)
    if "power_shift" in fam:
        pair = pair.with_power_shift([complex(*c) for c in fam["power_shift"]])
    return pair


def region_of(cfg: RunConfig) -> tuple[TrapRegion, TrapRegion] | None:
    """Explicit regions from the config, or None when they must be calibrated."""
    if cfg.region == "auto":
        return None
    c = float(cfg.region["c"])
    c2 = float(cfg.region.get("c_outer", 2 * c))
    return TrapRegion(c, abs(cfg.epsilon)), TrapRegion(c2, abs(cfg.epsilon))


def sub_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for one labelled stochastic operation; independent of call order and worker count."""
    h = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed), h]))
