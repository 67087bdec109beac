from .f1 import F1Report, f1_scores
from .fid import frechet_distance, phrase_fid
from .structure import bar_ssm, srs
from .melody import (MemorizationReport, length_accuracy, melody_string,
                     memorization_report, wer)

__all__ = [
    "F1Report", "f1_scores",
    "frechet_distance", "phrase_fid",
    "bar_ssm", "srs",
    "MemorizationReport", "melody_string", "wer",
    "memorization_report", "length_accuracy",
]
