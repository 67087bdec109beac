"""Declarative run configuration: one YAML file drives every pipeline stage."""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .ldm.model import LdmConfig
from .synthetic import CorpusSpec
from .vae.model import VaeConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    out_dir: str = "runs/default"
    seed: int = 0
    # corpus: either a directory of MIDI files or the synthetic generator
    midi_dir: str | None = None
    n_songs: int = 200
    val_fraction: float = 0.05
    truncate_long_songs: bool = False
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    vae: VaeConfig = field(default_factory=VaeConfig)
    ldm: LdmConfig = field(default_factory=LdmConfig)
    conditioning: str = "length"  # unconditional | length | length+structure
    # stage budgets (the full-scale defaults live in the model configs)
    vae_epochs: int = 30
    ldm_steps: int = 20_000
    sampling_steps: int = 250

    def validate(self):
        if self.midi_dir is not None and not Path(self.midi_dir).is_dir():
            raise ConfigError(f"midi_dir does not exist: {self.midi_dir}")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")
        self.vae.validate()
        self.corpus.validate()

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw)
        if "vae" in raw:
            raw["vae"] = VaeConfig(**raw["vae"])
        if "ldm" in raw:
            raw["ldm"] = LdmConfig(**raw["ldm"])
        if "corpus" in raw:
            spec = dict(raw["corpus"])
            if "layouts" in spec:
                spec["layouts"] = tuple(
                    tuple((k, int(n)) for k, n in layout)
                    for layout in spec["layouts"])
            if "layout_weights" in spec:
                spec["layout_weights"] = tuple(spec["layout_weights"])
            raw["corpus"] = CorpusSpec(**spec)
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path, overrides=None):
        raw = yaml.safe_load(Path(path).read_text()) or {}
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(raw)

    def to_dict(self):
        return asdict(self)
