"""Experiment configuration files.

A config is a TOML document::

    [experiment]
    name = "table1_foxgood"
    seed = 0
    out = "results"          # output directory
    record_timing = false    # write real wall times into the CSV

    [problem]
    spec = "foxgood:n=1024"
    cutoff = 0.0             # relative SVD cutoff; 0 keeps every sigma > 0
    alpha_units = "physical" # or "normalized"

    [noise]
    xi = 0.02

    [stop]
    rule = "discrepancy"     # or "max-only"
    tau = 1.01
    max_iter = 200           # optional, schedule default otherwise

    [[sweeps]]
    label = "SIFT"
    method = "nsift"         # nsiwt | nsift
    alpha = "constant"       # constant | geometric | factorial
    alpha0 = [0.05, 0.01]
    q = [0.7]                # geometric only
    exponent = "constant"    # constant | nonincreasing | linear
    values = [0.6, 0.8]      # exponent values, or slopes for "linear"
    allow_nonregularizing = false

Every sweep expands to the Cartesian product ``alpha0 x q x values`` in that
order.  ``--set section.key=value`` on the command line overrides any scalar.
"""
from __future__ import annotations

import copy
import itertools
import sys
from dataclasses import asdict, dataclass, field

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..iterate import (ConstantAlpha, ConstantExponent, FactorialAlpha, GeometricAlpha,
                       LinearExponent, NonincreasingExponent, ParamSchedule)
from ..problems import _BUILDERS
from ..spectral import DEFAULT_CUTOFF


class ConfigError(ValueError):
    pass


ALPHA_RULES = ("constant", "geometric", "factorial")
EXPONENT_RULES = ("constant", "nonincreasing", "linear")


@dataclass(frozen=True)
class GridPoint:
    label: str
    method: str
    schedule: ParamSchedule
    alpha0: float | None
    q: float | None
    exponent_label: str
    allow_nonregularizing: bool

    @property
    def r(self):
        return self.exponent_label if self.method == "nsiwt" else ""

    @property
    def gamma(self):
        return self.exponent_label if self.method == "nsift" else ""


@dataclass
class Sweep:
    label: str
    method: str
    alpha: str = "constant"
    alpha0: list = field(default_factory=list)
    q: list = field(default_factory=list)
    exponent: str = "constant"
    values: list = field(default_factory=list)
    allow_nonregularizing: bool = False

    def validate(self):
        if self.method not in ("nsiwt", "nsift"):
            raise ConfigError(f"sweep {self.label!r}: unknown method {self.method!r}")
        if self.alpha not in ALPHA_RULES:
            raise ConfigError(f"sweep {self.label!r}: unknown alpha rule {self.alpha!r}")
        if self.exponent not in EXPONENT_RULES:
            raise ConfigError(f"sweep {self.label!r}: unknown exponent rule {self.exponent!r}")
        if self.alpha != "factorial" and not self.alpha0:
            raise ConfigError(f"sweep {self.label!r}: alpha0 grid is empty")
        if self.alpha == "geometric" and not self.q:
            raise ConfigError(f"sweep {self.label!r}: q grid is empty")
        if self.exponent != "nonincreasing" and not self.values:
            raise ConfigError(f"sweep {self.label!r}: exponent grid is empty")

    def points(self, max_iter):
        self.validate()
        a0s = self.alpha0 if self.alpha != "factorial" else [None]
        qs = self.q if self.alpha == "geometric" else [None]
        vals = self.values if self.exponent != "nonincreasing" else [None]
        out = []
        for a0, q, v in itertools.product(a0s, qs, vals):
            if self.alpha == "constant":
                arule = ConstantAlpha(float(a0))
            elif self.alpha == "geometric":
                arule = GeometricAlpha(float(a0), float(q))
            else:
                arule = FactorialAlpha()
            if self.exponent == "constant":
                erule = ConstantExponent(float(v))
            elif self.exponent == "linear":
                erule = LinearExponent(float(v))
            else:
                erule = NonincreasingExponent()
            try:
                sched = ParamSchedule(arule, erule, max_iter)
            except ValueError as exc:
                raise ConfigError(f"sweep {self.label!r}: {exc}") from exc
            out.append(GridPoint(self.label, self.method, sched,
                                 None if a0 is None else float(a0),
                                 None if q is None else float(q),
                                 erule.label, self.allow_nonregularizing))
        return out


@dataclass
class ExperimentConfig:
    name: str
    problem: str
    xi: float
    sweeps: list
    seed: int = 0
    out: str = "results"
    record_timing: bool = False
    cutoff: float = DEFAULT_CUTOFF
    alpha_units: str = "normalized"
    stop_rule: str = "discrepancy"
    tau: float = 1.01
    max_iter: int | None = None

    def validate(self):
        pname = self.problem.partition(":")[0]
        if pname not in _BUILDERS:
            raise ConfigError(f"unknown problem {pname!r}")
        if self.alpha_units not in ("normalized", "physical"):
            raise ConfigError(f"alpha_units must be 'normalized' or 'physical'")
        if self.stop_rule not in ("discrepancy", "max-only"):
            raise ConfigError(f"unknown stop rule {self.stop_rule!r}")
        if not self.xi >= 0:
            raise ConfigError("xi must be non-negative")
        if self.stop_rule == "discrepancy" and not self.tau > 1:
            raise ConfigError("tau must exceed 1")
        if not 0 <= self.cutoff < 1:
            raise ConfigError("cutoff must lie in [0, 1)")
        if not self.sweeps:
            raise ConfigError("no sweeps defined")
        for s in self.sweeps:
            s.validate()
        return self

    def grid(self):
        return [pt for s in self.sweeps for pt in s.points(self.max_iter)]

    # -- TOML mapping ---------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "experiment": {"name": self.name, "seed": self.seed, "out": self.out,
                           "record_timing": self.record_timing},
            "problem": {"spec": self.problem, "cutoff": self.cutoff,
                        "alpha_units": self.alpha_units},
            "noise": {"xi": self.xi},
            "stop": {"rule": self.stop_rule, "tau": self.tau},
            "sweeps": [],
        }
        if self.max_iter is not None:
            d["stop"]["max_iter"] = self.max_iter
        for s in self.sweeps:
            d["sweeps"].append({k: v for k, v in asdict(s).items() if v != []})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = copy.deepcopy(d)
        try:
            exp, prob = d.pop("experiment"), d.pop("problem")
            noise, stop = d.pop("noise", {}), d.pop("stop", {})
            sweeps = [Sweep(**s) for s in d.pop("sweeps")]
            if d:
                raise ConfigError(f"unknown sections {sorted(d)}")
            cfg = cls(
                name=exp.pop("name"), seed=int(exp.pop("seed", 0)),
                out=exp.pop("out", "results"),
                record_timing=bool(exp.pop("record_timing", False)),
                problem=prob.pop("spec"),
                cutoff=float(prob.pop("cutoff", DEFAULT_CUTOFF)),
                alpha_units=prob.pop("alpha_units", "normalized"),
                xi=float(noise.pop("xi")),
                stop_rule=stop.pop("rule", "discrepancy"),
                tau=float(stop.pop("tau", 1.01)),
                max_iter=stop.pop("max_iter", None),
                sweeps=sweeps,
            )
            leftover = {**exp, **prob, **noise, **stop}
        except KeyError as exc:
            raise ConfigError(f"missing field {exc}") from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if leftover:
            raise ConfigError(f"unknown fields {sorted(leftover)}")
        return cfg.validate()

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return ExperimentConfig.loads(text)


def _coerce(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


def apply_overrides(cfg: ExperimentConfig, assignments) -> ExperimentConfig:
    """Apply ``section.key=value`` strings on top of a parsed config."""
    d = cfg.to_dict()
    for item in assignments or ():
        path, sep, value = item.partition("=")
        section, dot, key = path.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if section == "sweeps" or section not in d:
            raise ConfigError(f"cannot override section {section!r}")
        d[section][key] = _coerce(value)
    return ExperimentConfig.from_dict(d)
