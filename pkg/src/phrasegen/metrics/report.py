"""Structured metric report: JSON, human-readable table, SSM images."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class MetricReport:
    phrase_fid: float = float("nan")
    srs_mean: float = float("nan")
    srs_std: float = float("nan")
    srs_values: list = field(default_factory=list)
    mmr: list = field(default_factory=list)
    t2r: list = field(default_factory=list)
    mr: float = float("nan")
    length_accuracy: float = float("nan")
    length_bucket: int | None = None
    n_generated: int = 0
    n_reference: int = 0

    def to_json(self, path=None):
        text = json.dumps(asdict(self), indent=1)
        if path:
            Path(path).write_text(text)
        return text

    def to_table(self):
        rows = [
            ("PhraseFID", f"{self.phrase_fid:.3f}"),
            ("SRS mean", f"{self.srs_mean:.3f}"),
            ("SRS std", f"{self.srs_std:.3f}"),
            ("MMR mean", f"{np.mean(self.mmr):.3f}" if self.mmr else "-"),
            ("T2R mean", f"{np.mean(self.t2r):.3f}" if self.t2r else "-"),
            ("MR", f"{self.mr:.3f}"),
            ("Length acc", f"{self.length_accuracy:.3f}"
             if self.length_bucket is not None else "-"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def save_ssm_image(ssm, path):
    """Grayscale SSM picture (bright = similar)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(np.asarray(ssm), cmap="gray", vmin=-1.0, vmax=1.0)
    ax.set_xlabel("bar")
    ax.set_ylabel("bar")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
