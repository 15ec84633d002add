"""Declarative experiment configuration (strict JSON)."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ._validation import check_lrd_hurst, check_order
from .green_operator import OperatorSpec
from .hermite_chaos import PotentialSpec
from .lrd_gaussian import SlowVaryFn
from .random_solver import check_resolution

__all__ = ["ExperimentConfig", "KINDS", "load_config", "config_hash"]

KINDS = ("rate", "fluctuation-dist", "autocov", "hermite-var", "isometry")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment case.

    Solver kinds (``rate``, ``fluctuation-dist``) use ``operator``, ``eps``
    and ``probes``; the others ignore them. ``m`` defaults to the Hermite rank
    of the potential and must agree with it when given. ``L`` names the slowly
    varying function used in X(eps); ``fgn_example`` is that of the driver.
    """

    kind: str
    H0: float
    potential: dict = field(default_factory=lambda: {"phi": "sin"})
    operator: dict = field(default_factory=lambda: {"kind": "laplace", "q0": 1.0, "n": 4095})
    m: int | None = None
    L: str = "fgn_example"
    eps: tuple = ()
    replicates: int = 200
    probes: tuple = (0.5,)
    seed: int = 0
    output: str = "results"
    f: float = 1.0
    tolerance: float | None = None
    oracle_replicates: int = 10000
    T: tuple = (2**14,)
    hermite_grid: int = 64
    delta: float = 1.0
    lags: tuple = (4, 8, 16, 32, 64, 128, 256, 512)
    path_length: int | None = None
    integrands: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for name in ("eps", "probes", "T", "lags"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, "integrands", tuple({"breaks": tuple(d["breaks"]), "values": tuple(d["values"])} for d in self.integrands)
        )
        pot = self.potential_spec()
        m = pot.rank if self.m is None else check_order(self.m, name="m", minimum=1)
        if m != pot.rank:
            raise ValueError(f"m = {m} differs from the Hermite rank {pot.rank} of the potential")
        object.__setattr__(self, "m", m)
        check_lrd_hurst(self.H0, m)
        check_order(self.replicates, name="replicates", minimum=2)
        check_order(self.seed, name="seed", minimum=0, maximum=2**64 - 1)
        if self.L not in ("fgn_example", "constant", "logarithmic"):
            raise ValueError(f"unknown slowly varying kind {self.L!r}")
        if self.kind in ("rate", "fluctuation-dist"):
            spec = self.operator_spec()
            if not self.eps:
                raise ValueError("solver experiments need a non-empty eps list")
            if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
                raise ValueError("eps list must be strictly decreasing")
            check_resolution(spec.n, self.eps)
            if self.kind == "rate" and len(self.eps) < 4:
                raise ValueError("a slope fit needs at least 4 eps values")
        if self.kind == "fluctuation-dist" and self.operator.get("kind", "laplace") != "laplace":
            raise ValueError("the fluctuation experiment needs a Lipschitz Green function (laplace kind)")

    def potential_spec(self):
        return PotentialSpec.from_dict(self.potential)

    def operator_spec(self):
        return OperatorSpec.from_dict(self.operator)

    def slow_vary(self):
        if self.L == "fgn_example":
            return SlowVaryFn.fgn_example(self.H0)
        return SlowVaryFn(self.L)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [dict(x) if isinstance(x, dict) else x for x in v]
        for item in d["integrands"]:
            item["breaks"] = list(item["breaks"])
            item["values"] = list(item["values"])
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in d or "H0" not in d:
            raise ValueError("config needs at least 'kind' and 'H0'")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def load_config(path):
    return ExperimentConfig.from_json(Path(path).read_text())


def config_hash(cfg: ExperimentConfig):
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
