"""Experiment configuration and the flat ``key = value`` file format.

Each non-blank line of a config file reads ``key = value``; ``#`` starts a
comment.  Values are JSON literals (``0.05``, ``[0, 0.1]``, ``"text"``,
``true``); anything that is not valid JSON is taken as a bare string, so
``initial_condition = constant:1.0`` works without quotes.

Initial conditions are tagged strings:

    double_step | constant:<value> | single_mode:<j>,<n> | sampled_file:<path>
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError


def _default_snapshots():
    return [round(0.025 * k, 10) for k in range(12)] + [0.3]


@dataclass(frozen=True)
class ExperimentConfig:
    L: float = 1.0
    T: float = 0.3
    tau: float = 0.05
    s: float = 1.65
    J: int = 21
    N: int = 200
    I: int = 40
    n1: int = 101
    n2: int = 101
    dt: float = 1.25e-4
    snapshot_times: list = field(default_factory=_default_snapshots)
    initial_condition: str = "double_step"
    output_dir: str | None = None
    quadrature_panels: int = 1024
    envelope_samples: int = 101
    probe_points: int = 21

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", [float(t) for t in self.snapshot_times])
        problems = self.problems()
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))

    def problems(self) -> list:
        """Names of all violated invariants (empty when valid)."""
        out = []
        reals = ("L", "T", "tau", "s", "dt")
        for name in reals:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                out.append(f"{name} must be a finite number, got {v!r}")
        for name in ("J", "N", "I", "n1", "n2", "quadrature_panels", "envelope_samples", "probe_points"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                out.append(f"{name} must be an integer, got {v!r}")
        if out:
            return out
        if not self.L > 0:
            out.append(f"L must be > 0 (got {self.L})")
        if not self.T > 0:
            out.append(f"T must be > 0 (got {self.T})")
        if not (0 < self.tau < self.T):
            out.append(f"tau must satisfy 0 < tau < T (got tau={self.tau}, T={self.T})")
        if not (1 < self.s < 2):
            out.append(f"s must satisfy 1 < s < 2 (got {self.s})")
        for name in ("J", "N", "I"):
            if getattr(self, name) < 1:
                out.append(f"truncation {name} must be >= 1 (got {getattr(self, name)})")
        if self.n1 < 3 or self.n2 < 3:
            out.append(f"grid sizes n1, n2 must be >= 3 (got {self.n1}, {self.n2})")
        if not self.dt > 0:
            out.append(f"dt must be > 0 (got {self.dt})")
        else:
            for name in ("T", "tau"):
                v = getattr(self, name)
                k = round(v / self.dt)
                if abs(k * self.dt - v) > 1e-9 * max(1.0, v):
                    out.append(f"{name}={v} must be a multiple of dt={self.dt}")
        ts = self.snapshot_times
        if any(b < a for a, b in zip(ts, ts[1:])):
            out.append("snapshot_times must be sorted")
        if any(not (0 <= t <= self.T) for t in ts):
            out.append(f"snapshot_times must lie in [0, T={self.T}]")
        if self.quadrature_panels < 2 or self.quadrature_panels % 2:
            out.append("quadrature_panels must be an even integer >= 2")
        if self.envelope_samples < 2 or self.probe_points < 2:
            out.append("envelope_samples and probe_points must be >= 2")
        try:
            parse_initial_condition(self.initial_condition)
        except ConfigError as exc:
            out.append(str(exc))
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_text(cls, text: str, overrides=()) -> "ExperimentConfig":
        values = parse_pairs(text.splitlines())
        values.update(parse_pairs(overrides, source="--set"))
        return cls.from_mapping(values)

    @classmethod
    def from_file(cls, path, overrides=()) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        return cls.from_text(text, overrides)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        coerced = {}
        for key, v in values.items():
            if key in ("L", "T", "tau", "s", "dt") and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            if key == "output_dir" and v is not None:
                v = str(v)
            if key == "initial_condition":
                v = str(v)
            coerced[key] = v
        return cls(**coerced)


def parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_pairs(lines, source="config") -> dict:
    out = {}
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {num}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source} line {num}: duplicate key {key!r}")
        out[key] = parse_value(raw)
    return out


@dataclass(frozen=True)
class InitialConditionSpec:
    kind: str
    value: float = 0.0
    j: int = 0
    n: int = 0
    path: str = ""


def parse_initial_condition(tag: str) -> InitialConditionSpec:
    tag = str(tag).strip()
    kind, _, arg = tag.partition(":")
    kind = kind.strip()
    try:
        if kind == "double_step" and not arg:
            return InitialConditionSpec("double_step")
        if kind == "constant":
            return InitialConditionSpec("constant", value=float(arg))
        if kind == "single_mode":
            j, n = (int(a) for a in arg.split(","))
            if j < 0 or n < 0:
                raise ValueError
            return InitialConditionSpec("single_mode", j=j, n=n)
        if kind == "sampled_file" and arg.strip():
            return InitialConditionSpec("sampled_file", path=arg.strip())
    except ValueError:
        pass
    raise ConfigError(
        f"initial_condition {tag!r} is not one of double_step, constant:<value>, "
        "single_mode:<j>,<n>, sampled_file:<path>"
    )
