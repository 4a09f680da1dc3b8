"""Ingest three generated artifacts into a live scene.

Only the one whose claims all check out geometrically becomes scene state.
One names a constraint kind nobody can check, and one claims contact across
a 5 cm gap.
"""

from opkernel.artifact import fixtures
from opkernel.artifact.checks import cycle_disagreement
from opkernel.artifact.ingest import artifact_runtime, ingest
from opkernel.kernel import Kernel
from opkernel.scenes import repair_scene


def main():
    for make in (fixtures.consistent_artifact, fixtures.checkerless_artifact, fixtures.contradicted_artifact):
        art = make()
        kernel = Kernel(repair_scene(), artifact_runtime())
        res = ingest(art, kernel)
        added = sorted(set(kernel.head.entities) - set(kernel.initial.entities))
        print(f"{art.artifact_id}: {res.outcome}")
        print(f"  consistency score {res.gsc.value}, unchecked {list(res.gsc.excluded)}")
        if res.submission.txn.gap:
            print(f"  gap {res.submission.txn.gap}: {res.submission.txn.detail}")
        print(f"  entities added {added}")
        print(f"  cycle disagreement {cycle_disagreement(art)}")


if __name__ == "__main__":
    main()
