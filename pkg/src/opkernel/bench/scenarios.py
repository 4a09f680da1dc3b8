"""The causal-repair scenario family.

Each scenario displaces the receiving assembly's frame along one lateral
axis. Variants toggle whether generic geometric alternatives are available
and whether a diagnostic probe is registered. Ground truth (the expected
actuator and the under-supported flag) lives on the scenario and never
reaches a policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..causal import CENTER_ON_PARENT, ProbeSpec, align_to_anchor
from ..config import Config
from ..scenes import BODY, DRIVER_FRAME, TRAY

CENTER_ALT = CENTER_ON_PARENT.alt_id
ANCHOR_ALT = align_to_anchor("anchor.opening").alt_id
PROBE = ProbeSpec("probe.tray_offset", "camera.top", TRAY, BODY)
INSTRUCTION = {"text": "The tray sits sideways from where it belongs. Fix it.", "hint": "center the tray on the body"}


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    scene: str
    axis: str
    delta: float
    instruction: dict
    alternatives: tuple[str, ...]
    probes: tuple[ProbeSpec, ...]
    sources: tuple[str, ...]
    under_supported: bool
    expected_actuator: Optional[str]
    expected_target: Optional[str]
    control: bool = False

    @property
    def supported(self) -> bool:
        return not self.control and not self.under_supported

    def to_dict(self) -> dict:
        return {
            "id": self.scenario_id,
            "scene": self.scene,
            "axis": self.axis,
            "delta": self.delta,
            "instruction": dict(self.instruction),
            "alternatives": list(self.alternatives),
            "probes": [p.to_dict() for p in self.probes],
            "sources": list(self.sources),
            "under_supported": self.under_supported,
            "expected_actuator": self.expected_actuator,
            "expected_target": self.expected_target,
            "control": self.control,
        }


def _scenario(axis: str, delta: float, alts: bool, probe: bool, control: bool = False) -> Scenario:
    mm = round(delta * 1000)
    sid = f"s.{axis}.{mm:+04d}.{'alt' if alts else 'noalt'}.{'probe' if probe else 'noprobe'}"
    available = (CENTER_ALT, ANCHOR_ALT) if alts else ()
    return Scenario(
        scenario_id=sid,
        scene="repair",
        axis=axis,
        delta=float(delta),
        instruction=dict(INSTRUCTION),
        alternatives=available,
        probes=(PROBE,) if probe else (),
        sources=(PROBE.source,) if probe else (),
        # without a center alternative nothing supported restores the intended layout
        under_supported=not control and CENTER_ALT not in available,
        expected_actuator=None if control or not alts else "set_frame_offset",
        expected_target=None if control or not alts else DRIVER_FRAME,
        control=control,
    )


def build_scenarios(config: Optional[Config] = None, seed: int = 0) -> list[Scenario]:
    """Cross product of displacements, axes, alternative and probe flags, plus one control per axis.

    The family is a pure function of *config*; *seed* is accepted so callers
    can thread one value through every stage, and only perturbs probe noise
    downstream.
    """
    config = config or Config()
    out = [
        _scenario(axis, d, alts, probe)
        for axis in config.axes
        for d in config.deltas
        for alts in (True, False)
        for probe in (True, False)
    ]
    if config.controls:
        out += [_scenario(axis, 0.0, True, False, control=True) for axis in config.axes]
    return sorted(out, key=lambda s: s.scenario_id)
