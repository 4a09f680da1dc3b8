"""Run configuration for the replay harness, stored as canonical JSON."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Union

from . import _canon
from .effects import Tolerances
from .errors import SceneFormatError
from .guardrail import STRATEGIES

CONFIG_FORMAT = "hylos-config/1"


@dataclass(frozen=True)
class Config:
    seed: int = 0
    deltas: tuple[float, ...] = (-0.05, -0.03, -0.01, 0.01, 0.03, 0.05)
    axes: tuple[str, ...] = ("x", "y")
    controls: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)
    probe_noise: float = 0.0
    dead_end_strategy: str = "backtrack"
    backtrack_depth: int = 32

    def __post_init__(self):
        if self.dead_end_strategy not in STRATEGIES:
            raise SceneFormatError(f"unknown dead-end strategy {self.dead_end_strategy!r}")
        if any(d == 0.0 for d in self.deltas):
            raise SceneFormatError("zero displacement is the control; use 'controls' instead")
        if not set(self.axes) <= {"x", "y"}:
            raise SceneFormatError("axes must be lateral (x, y)")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["deltas"] = [float(x) for x in self.deltas]
        d["axes"] = list(self.axes)
        d["tolerances"] = self.tolerances.to_dict()
        return {"version": CONFIG_FORMAT, **d}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Config":
        if data.get("version") != CONFIG_FORMAT:
            raise SceneFormatError(f"expected version {CONFIG_FORMAT!r}, got {data.get('version')!r}")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known - {"version"})
        if extra:
            raise SceneFormatError(f"unknown config keys {extra}")
        kw = {k: v for k, v in data.items() if k in known}
        if "deltas" in kw:
            kw["deltas"] = tuple(float(x) for x in kw["deltas"])
        if "axes" in kw:
            kw["axes"] = tuple(kw["axes"])
        if "tolerances" in kw:
            kw["tolerances"] = Tolerances.from_dict(kw["tolerances"])
        return cls(**kw)

    @property
    def digest(self) -> str:
        return _canon.digest(self.to_dict())


def load_config(path: Union[str, Path]) -> Config:
    try:
        return Config.from_dict(_canon.loads(Path(path).read_text()))
    except ValueError as exc:
        raise SceneFormatError(f"{path}: {exc}") from exc


def dumps_config(config: Config) -> str:
    return _canon.dumps(config.to_dict()) + "\n"
