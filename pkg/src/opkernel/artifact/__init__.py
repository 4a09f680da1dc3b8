"""Model-native artifacts: ingestion, consistency checks, handles, latent repair, cycle disagreement."""

from .checks import GscReport, cycle_disagreement, gsc
from .decoder import ToyDecoder, gamma_hip, handle_jacobian, handle_valid
from .ingest import IngestResult, artifact_runtime, ingest
from .model import GeneratedSpatialArtifact, dumps_artifact, loads_artifact
from .repair import RepairResult, latent_repair
