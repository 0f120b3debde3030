"""Flat key-value run configuration.

Grammar: one ``key = value`` assignment per line; ``#`` starts a comment;
blank lines are ignored.  Scalars are typed per key.  Two keys have richer
values:

* ``initial_condition``: a preset name, optionally with arguments, e.g.
  ``taylor_green``, ``charged_shear``,
  ``random_smooth(seed=7, energy=1.0, peak_wavenumber=3)``,
  ``from_checkpoint(path=run/final.ehds)``.
* ``criterion`` (repeatable): a triple ``kind, p, threshold`` such as
  ``PS_u, 6, auto``; threshold ``auto`` defers to the 10x-at-10%-horizon
  heuristic.

Parsing reports every violation, not just the first.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .criteria import make_accumulator
from .initial_conditions import PRESET_NAMES


class ConfigError(ValueError):
    """One or more configuration violations; .violations lists them all."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class CriterionSpec:
    kind: str
    p: float
    threshold: float | None


@dataclass
class InitialConditionSpec:
    name: str
    params: dict = field(default_factory=dict)


def _default_criteria() -> list[CriterionSpec]:
    return [
        CriterionSpec("BKM", math.inf, None),
        CriterionSpec("PS_u", 6.0, None),
        CriterionSpec("PS_grad_u", 2.0, None),
        CriterionSpec("BESOV_ANISO", 2.0, None),
    ]


@dataclass
class RunConfig:
    t_end: float
    initial_condition: InitialConditionSpec
    grid_n: int = 32
    cfl: float = 0.4
    dt: float = 5e-4
    dt_min: float = 1e-10
    criteria: list[CriterionSpec] = field(default_factory=_default_criteria)
    output_dir: str = "."
    series_csv: str = "series.csv"
    audit_csv: str = "audit.csv"
    energy_csv: str = "energy.csv"
    report_json: str = "report.json"
    checkpoint_path: str = "final.ehds"
    checkpoint_every: int = 0  # extra checkpoints every k steps; 0 = final only

    def as_dict(self) -> dict:
        def j(x):
            if isinstance(x, float) and not math.isfinite(x):
                return str(x)
            return x

        return {
            "grid_n": self.grid_n,
            "t_end": self.t_end,
            "cfl": self.cfl,
            "dt": self.dt,
            "dt_min": self.dt_min,
            "initial_condition": {
                "name": self.initial_condition.name,
                "params": {k: j(v) for k, v in self.initial_condition.params.items()},
            },
            "criteria": [
                {"kind": c.kind, "p": j(c.p), "threshold": j(c.threshold)}
                for c in self.criteria
            ],
            "output_dir": self.output_dir,
            "series_csv": self.series_csv,
            "audit_csv": self.audit_csv,
            "energy_csv": self.energy_csv,
            "report_json": self.report_json,
            "checkpoint_path": self.checkpoint_path,
            "checkpoint_every": self.checkpoint_every,
        }


_SCALAR_KEYS = {
    "grid_n": int,
    "t_end": float,
    "cfl": float,
    "dt": float,
    "dt_min": float,
    "checkpoint_every": int,
    "output_dir": str,
    "series_csv": str,
    "audit_csv": str,
    "energy_csv": str,
    "report_json": str,
    "checkpoint_path": str,
}

_KIND_ALIASES = {"bkm": "BKM", "ps_u": "PS_u", "ps_grad_u": "PS_grad_u",
                 "besov_aniso": "BESOV_ANISO"}

_IC_CALL = re.compile(r"^(\w+)\s*(?:\((.*)\))?$")

_IC_PARAM_TYPES = {
    "random_smooth": {"seed": int, "energy": float, "peak_wavenumber": float},
    "from_checkpoint": {"path": str},
    "taylor_green": {},
    "charged_shear": {},
}
_IC_REQUIRED = {"random_smooth": ("seed",), "from_checkpoint": ("path",)}


def _parse_float(text: str) -> float:
    value = float(text)  # accepts 'inf'
    return value


def _parse_criterion(value: str, lineno: int, violations: list) -> CriterionSpec | None:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) not in (2, 3):
        violations.append(
            f"line {lineno}: criterion needs 'kind, p[, threshold]', got {value!r}"
        )
        return None
    kind = _KIND_ALIASES.get(parts[0].lower())
    if kind is None:
        violations.append(
            f"line {lineno}: unknown criterion kind {parts[0]!r} "
            f"(expected BKM, PS_u, PS_grad_u, BESOV_ANISO)"
        )
        return None
    try:
        p = _parse_float(parts[1])
    except ValueError:
        violations.append(f"line {lineno}: criterion exponent {parts[1]!r} is not a number")
        return None
    threshold = None
    if len(parts) == 3 and parts[2].lower() not in ("auto", "none", ""):
        try:
            threshold = _parse_float(parts[2])
        except ValueError:
            violations.append(
                f"line {lineno}: criterion threshold {parts[2]!r} is not a number or 'auto'"
            )
            return None
    try:
        make_accumulator(kind, p, threshold)
    except ValueError as exc:
        violations.append(f"line {lineno}: {exc}")
        return None
    return CriterionSpec(kind, p, threshold)


def _parse_initial_condition(value: str, lineno: int, violations: list):
    m = _IC_CALL.match(value)
    if m is None:
        violations.append(f"line {lineno}: malformed initial_condition {value!r}")
        return None
    name, argtext = m.group(1), m.group(2)
    if name not in PRESET_NAMES:
        violations.append(
            f"line {lineno}: unknown preset {name!r} (expected one of {', '.join(PRESET_NAMES)})"
        )
        return None
    params = {}
    if argtext and argtext.strip():
        for item in argtext.split(","):
            if "=" not in item:
                violations.append(
                    f"line {lineno}: preset argument {item.strip()!r} must be name=value"
                )
                continue
            k, v = (s.strip() for s in item.split("=", 1))
            typ = _IC_PARAM_TYPES[name].get(k)
            if typ is None:
                violations.append(f"line {lineno}: preset {name} has no parameter {k!r}")
                continue
            try:
                params[k] = typ(v.strip("'\""))
            except ValueError:
                violations.append(f"line {lineno}: bad value {v!r} for {name}.{k}")
    for req in _IC_REQUIRED.get(name, ()):
        if req not in params:
            violations.append(f"line {lineno}: preset {name} requires parameter {req!r}")
            return None
    return InitialConditionSpec(name, params)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError carrying every violation found.

    Named charge presets are neutral and nonnegative by construction;
    checkpoint-loaded states are validated when the run starts.
    """
    violations: list[str] = []
    seen: dict[str, int] = {}
    values: dict = {}
    criteria: list[CriterionSpec] = []
    ic = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "criterion":
            spec = _parse_criterion(value, lineno, violations)
            if spec is not None:
                criteria.append(spec)
            continue
        if key in seen:
            violations.append(
                f"line {lineno}: duplicate key {key!r} (already set at line {seen[key]})"
            )
            continue
        seen[key] = lineno
        if key == "initial_condition":
            ic = _parse_initial_condition(value, lineno, violations)
        elif key in _SCALAR_KEYS:
            try:
                values[key] = _SCALAR_KEYS[key](value)
            except ValueError:
                violations.append(
                    f"line {lineno}: bad value {value!r} for {key} "
                    f"(expected {_SCALAR_KEYS[key].__name__})"
                )
        else:
            violations.append(f"line {lineno}: unknown key {key!r}")

    if "t_end" not in values:
        violations.append("missing required key 't_end'")
    if ic is None and "initial_condition" not in seen:
        violations.append("missing required key 'initial_condition'")

    # Range checks on whatever parsed.
    n = values.get("grid_n", 32)
    if n < 8 or (n & (n - 1)) != 0:
        violations.append(f"grid_n must be a power of two >= 8, got {n}")
    if "t_end" in values and not values["t_end"] > 0:
        violations.append(f"t_end must be positive, got {values['t_end']}")
    cfl = values.get("cfl", 0.4)
    if not 0 < cfl < 1:
        violations.append(f"cfl must lie strictly between 0 and 1, got {cfl}")
    dt = values.get("dt", 5e-4)
    dt_min = values.get("dt_min", 1e-10)
    if not dt > 0:
        violations.append(f"dt must be positive, got {dt}")
    elif not 0 < dt_min <= dt:
        violations.append(f"need 0 < dt_min <= dt, got dt_min={dt_min}, dt={dt}")
    if values.get("checkpoint_every", 0) < 0:
        violations.append("checkpoint_every must be >= 0")

    if violations:
        raise ConfigError(violations)

    return RunConfig(
        t_end=values["t_end"],
        initial_condition=ic,
        grid_n=n,
        cfl=cfl,
        dt=dt,
        dt_min=dt_min,
        criteria=criteria or _default_criteria(),
        output_dir=values.get("output_dir", "."),
        series_csv=values.get("series_csv", "series.csv"),
        audit_csv=values.get("audit_csv", "audit.csv"),
        energy_csv=values.get("energy_csv", "energy.csv"),
        report_json=values.get("report_json", "report.json"),
        checkpoint_path=values.get("checkpoint_path", "final.ehds"),
        checkpoint_every=values.get("checkpoint_every", 0),
    )
