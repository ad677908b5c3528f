"""reqforge: multi-agent requirements development engine."""

__version__ = "0.1.0"

from reqforge.pool import Artifact, ArtifactEvent, ArtifactKind, ArtifactPool, ArtifactState

__all__ = [
    "__version__",
    "Artifact",
    "ArtifactEvent",
    "ArtifactKind",
    "ArtifactPool",
    "ArtifactState",
]
