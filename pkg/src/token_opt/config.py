"""JSON run configuration: schema, parsing and object construction.

A config has five blocks plus an output path::

    {
      "graph": {"family": "cycle", "n": 50},
      "chain": {"kind": "srw"},
      "objective": {"family": "sigmoid", "data_mode": "homogeneous", "dim": 10, "seed": 0},
      "algorithm": {"name": "mc_sag", "gamma_policy": "adaptive_eq7"},
      "replication": {"seeds": 10, "T": 20000, "log_every": 100},
      "output": "runs/cycle50"
    }

``seeds`` is either a count (seeds ``0..k-1``) or an explicit list.
"""

from dataclasses import dataclass
import copy
import json

import jsonschema

from .chains import (chain_lazy_maxdeg, chain_metropolis_uniform, chain_simple_rw, chain_two_state)
from .graphs import (Graph, build_complete, build_cycle, build_random_geometric, build_star, build_torus)
from .objectives import (identity_quadratic, quadratic_interpolation, shared_hessian_quadratic,
                         sigmoid_loss, two_point_disagreement, worst_case_chain)
from .optimizers import ALGORITHMS


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_POS_NUM = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["graph", "chain", "objective", "algorithm", "replication"],
    "additionalProperties": False,
    "properties": {
        "graph": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["cycle", "torus", "complete", "star", "geometric", "file"]},
                "n": _POS_INT,
                "side": _POS_INT,
                "dim": _POS_INT,
                "radius": _POS_NUM,
                "seed": _NONNEG_INT,
                "path": {"type": "string"},
            },
        },
        "chain": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["srw", "lazy", "metropolis", "two_state"]},
                "p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "objective": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["quadratic_interpolation", "identity_quadratic", "two_point_disagreement",
                                    "shared_hessian_quadratic", "worst_case_chain", "sigmoid"]},
                "dim": _POS_INT,
                "seed": _NONNEG_INT,
                "condition": {"type": "number", "minimum": 1},
                "x_star": {"type": "array", "items": {"type": "number"}},
                "spread": _POS_NUM,
                "dissimilarity": {"type": "number", "minimum": 0},
                "K": _POS_INT,
                "alpha": _POS_NUM,
                "assign": {"type": "array", "items": _NONNEG_INT, "minItems": 2, "maxItems": 2},
                "data_mode": {"enum": ["homogeneous", "two-hot-heterogeneous"]},
                "samples_per_node": _POS_INT,
            },
        },
        "algorithm": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"enum": sorted(ALGORITHMS)},
                "gamma": _POS_NUM,
                "gamma_policy": {"enum": ["constant", "theorem51", "adaptive_eq7"]},
                "noise": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["gaussian", "minibatch"]},
                        "sd": {"type": "number", "minimum": 0},
                        "batch_size": _POS_INT,
                    },
                },
                "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "wait_k": _POS_INT,
                "init": {"enum": ["perfect", "zero", "random"]},
                "step_factor": _POS_NUM,
                "tau_hit": _POS_NUM,
                "x0": {"type": "array", "items": {"type": "number"}},
            },
        },
        "replication": {
            "type": "object",
            "required": ["T"],
            "additionalProperties": False,
            "properties": {
                "seeds": {"oneOf": [_POS_INT, {"type": "array", "items": _NONNEG_INT, "minItems": 1,
                                               "uniqueItems": True}]},
                "T": _NONNEG_INT,
                "log_every": _POS_INT,
            },
        },
        "output": {"type": "string"},
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate(data):
    """Raise :class:`ConfigError` for the first schema violation (deepest path first)."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: (-len(e.absolute_path), _path(e)))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _path(err))


@dataclass
class RunConfig:
    graph: dict
    chain: dict
    objective: dict
    algorithm: dict
    replication: dict
    output: str = None

    @classmethod
    def from_dict(cls, data):
        validate(data)
        data = copy.deepcopy(data)
        cfg = cls(graph=data["graph"], chain=data["chain"], objective=data["objective"],
                  algorithm=data["algorithm"], replication=data["replication"], output=data.get("output"))
        cfg._check_semantics()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def to_dict(self):
        out = {"graph": self.graph, "chain": self.chain, "objective": self.objective,
               "algorithm": self.algorithm, "replication": self.replication}
        if self.output is not None:
            out["output"] = self.output
        return copy.deepcopy(out)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def _check_semantics(self):
        fam = self.graph["family"]
        need = {"cycle": ["n"], "complete": ["n"], "star": ["n"], "geometric": ["n", "radius"],
                "torus": ["side"], "file": ["path"]}[fam]
        for key in need:
            if key not in self.graph:
                raise ConfigError(f"'{key}' is required for family '{fam}'", f"graph.{key}")
        if self.chain["kind"] == "two_state" and "p" not in self.chain:
            raise ConfigError("'p' is required for the two_state chain", "chain.p")
        algo = self.algorithm
        policy = algo.get("gamma_policy", "adaptive_eq7" if algo["name"] in ("mc_sag", "sag_iid") else "constant")
        if policy == "constant" and "gamma" not in algo:
            raise ConfigError("'gamma' is required with the constant stepsize policy", "algorithm.gamma")
        if algo["name"] in ("dsgd_fixed", "dsgd_randomized") and policy != "constant":
            raise ConfigError(f"gossip baselines only take a constant stepsize, not '{policy}'",
                              "algorithm.gamma_policy")
        if policy == "adaptive_eq7" and algo["name"] not in ("mc_sag", "sag_iid"):
            raise ConfigError("adaptive_eq7 applies to mc_sag and sag_iid only", "algorithm.gamma_policy")
        if policy == "theorem51" and ALGORITHMS[algo["name"]][0].__name__ != "MarkovSGD":
            raise ConfigError("theorem51 applies to the SGD variants only", "algorithm.gamma_policy")
        accepted = set(ALGORITHMS[algo["name"]][0]().get_params())
        for key in algo:
            if key not in ("name", "gamma_policy") and key not in accepted:
                raise ConfigError(f"'{key}' is not a parameter of {algo['name']}", f"algorithm.{key}")

    @property
    def seeds(self):
        s = self.replication.get("seeds", 1)
        return list(range(s)) if isinstance(s, int) else list(s)

    @property
    def T(self):
        return self.replication["T"]

    @property
    def log_every(self):
        return self.replication.get("log_every", 1)

    def build(self):
        """Construct ``(graph, chain, objective)``; builder errors become :class:`ConfigError`."""
        try:
            graph = build_graph(self.graph)
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc), "graph") from None
        try:
            chain = build_chain(self.chain, graph)
        except ValueError as exc:
            raise ConfigError(str(exc), "chain") from None
        try:
            obj = build_objective(self.objective, chain.n)
        except ValueError as exc:
            raise ConfigError(str(exc), "objective") from None
        if obj.n_components != chain.n:
            raise ConfigError(f"objective has {obj.n_components} components but the chain has {chain.n} states",
                              "objective")
        return graph, chain, obj

    def estimator_params(self):
        """Keyword arguments for :func:`token_opt.optimizers.make_estimator`."""
        params = {k: v for k, v in self.algorithm.items() if k != "name"}
        if self.algorithm["name"].startswith("dsgd"):
            params.pop("gamma_policy", None)
        return params


def build_graph(block):
    fam = block["family"]
    if fam == "cycle":
        return build_cycle(block["n"])
    if fam == "complete":
        return build_complete(block["n"])
    if fam == "star":
        return build_star(block["n"] - 1)
    if fam == "torus":
        return build_torus(block["side"], block.get("dim", 2))
    if fam == "geometric":
        return build_random_geometric(block["n"], block["radius"], block.get("seed", 0))
    if fam == "file":
        return Graph.load(block["path"])
    raise ValueError(f"unknown graph family {fam!r}")


def build_chain(block, graph):
    kind = block["kind"]
    if kind == "two_state":
        return chain_two_state(block["p"])
    return {"srw": chain_simple_rw, "lazy": chain_lazy_maxdeg, "metropolis": chain_metropolis_uniform}[kind](graph)


def build_objective(block, n):
    fam = block["family"]
    seed = block.get("seed", 0)
    dim = block.get("dim", 10)
    if fam == "quadratic_interpolation":
        return quadratic_interpolation(n, dim, seed, condition=block.get("condition", 10.0))
    if fam == "identity_quadratic":
        return identity_quadratic(n, len(block.get("x_star", [0.0] * dim)), block.get("x_star", [0.0] * dim))
    if fam == "two_point_disagreement":
        if n != 2:
            raise ValueError("two_point_disagreement needs a 2-state chain")
        return two_point_disagreement()
    if fam == "shared_hessian_quadratic":
        return shared_hessian_quadratic(n, dim, seed, spread=block.get("spread", 1e-3),
                                        dissimilarity=block.get("dissimilarity", 1.0))
    if fam == "worst_case_chain":
        return worst_case_chain(block.get("K", 20), alpha=block.get("alpha", 0.1),
                                assign=tuple(block.get("assign", (0, n // 2))), n=n)
    if fam == "sigmoid":
        return sigmoid_loss(n, dim=dim, data_mode=block.get("data_mode", "homogeneous"), seed=seed,
                            samples_per_node=block.get("samples_per_node", 1))
    raise ValueError(f"unknown objective family {fam!r}")
