from .schedule import DiffusionSchedule, q_sample
from .model import LdmConfig, LatentDiffusionModel, StructureEncoder, bucket_of
from .sample import generate
from .decode import truncate_and_decode, EmptySongError

__all__ = [
    "DiffusionSchedule", "q_sample",
    "LdmConfig", "LatentDiffusionModel", "StructureEncoder", "bucket_of",
    "generate", "truncate_and_decode", "EmptySongError",
]
