from __future__ import annotations


class KernelError(Exception):
    """Base class for every error raised by the package."""


class UnknownRef(KernelError):
    def __init__(self, ref: str, detail: str = ""):
        self.ref = ref
        msg = f"unresolved reference {ref!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CyclicFrames(KernelError):
    pass


class InvariantBreakingStructure(KernelError):
    pass


class SceneFormatError(KernelError):
    """A scene/registry/config file failed to load or validate."""


class SchemaMismatch(KernelError):
    pass


class StaleContext(KernelError):
    pass


class MissingLowerer(KernelError):
    pass


class UnknownPolicy(KernelError):
    pass


class MissingSource(KernelError):
    pass


class MalformedArtifact(KernelError):
    pass


class MalformedDistribution(KernelError):
    pass


class NonFinite(KernelError):
    pass
