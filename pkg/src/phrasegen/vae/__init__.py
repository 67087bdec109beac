from .model import PhraseCompressor, VaeConfig, kl_divergence
from .corruption import corrupt_spans

__all__ = ["PhraseCompressor", "VaeConfig", "kl_divergence", "corrupt_spans"]
