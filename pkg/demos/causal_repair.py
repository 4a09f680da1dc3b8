"""Walk one displaced tray through every policy condition and print what each one did.

The tray sits 3 cm off center because the receiver frame it hangs from was
shifted. Editing the tray directly hides the symptom; fixing the receiver
offset restores the layout.
"""

from opkernel.bench.replay import CONDITIONS, replay
from opkernel.bench.scenarios import build_scenarios
from opkernel.causal import trace_upstream
from opkernel.scenes import repair_scene


def main():
    snap = repair_scene("x", 0.03)
    print("upstream trace from the misalignment:")
    for step in trace_upstream(snap, "assert.tray_align"):
        print(f"  depth {step.depth}: {step.driver}")

    for sid in ("s.x.+030.alt.noprobe", "s.x.+030.noalt.noprobe"):
        sc = next(s for s in build_scenarios() if s.scenario_id == sid)
        print(f"\n{sid} (center alternative {'available' if sc.supported else 'missing'})")
        for cond in CONDITIONS:
            r = replay(sc, cond).result
            what = "deferred" if r.deferred else f"{r.actuator} on {r.target} -> {r.outcome}"
            print(f"  {cond:32s} {what:55s} success={r.success}")


if __name__ == "__main__":
    main()
