"""Run configuration: dataclass, presets, flat key-value config files."""

import dataclasses
from dataclasses import dataclass

import yaml

from .errors import ConfigError

MODEL_KINDS = ("s2s", "lvs2s", "ntm", "ltcm")


@dataclass
class RunConfig:
    # model
    model: str = "s2s"
    n_layers: int = 2
    d: int = 64
    d_emb: int = 64
    k: int = 32           # latent dimensionality
    K: int = 20           # topic count
    vocab_size: int = 2000
    layer_norm: bool = True
    residual_start: int = 3   # first layer index (1-based) with a residual skip
    mlp_hidden: int = 64
    latent_mode: str = "conditional"   # "unconditional" | "conditional"
    tie_topic_proj: bool = True
    gate_mode: str = "sample"          # "sample" | "threshold"
    # training
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    lr: float = 1e-3
    halve_lr_every: int = 0            # 0 = constant rate
    dropout: float = 0.2
    kl_anneal: bool = False
    anneal_steps: int = 0              # 0 = ramp over one epoch of steps
    lambda_ma: float = 1e-3
    lambda_l2: float = 1e-5
    stopword_n: int = 300
    stopword_direction: str = "lowest"  # "lowest" | "highest" IDF
    max_len: int = 50
    split: str = "train"               # "train" | "all"
    # paths
    corpus: str = ""
    vocab: str = ""
    checkpoint_dir: str = ""
    report_dir: str = ""

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind '{self.model}'")
        if self.latent_mode not in ("unconditional", "conditional"):
            raise ConfigError(f"unknown latent_mode '{self.latent_mode}'")
        if self.stopword_direction not in ("lowest", "highest"):
            raise ConfigError(f"unknown stopword_direction '{self.stopword_direction}'")
        if self.gate_mode not in ("sample", "threshold"):
            raise ConfigError(f"unknown gate_mode '{self.gate_mode}'")
        if self.d % 2 != 0:
            raise ConfigError("hidden size d must be even (bidirectional halves)")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls):
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - cls.field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must be a flat key-value document")
        return cls.from_dict(data)


PRESETS = {
    # the full-scale setup; configuration only, not meant for CI machines
    "paper": dict(n_layers=4, d=500, d_emb=500, vocab_size=30000,
                  batch_size=128, dropout=0.2, stopword_n=300),
    "desk": dict(n_layers=2, d=64, d_emb=64, vocab_size=2000,
                 batch_size=16, dropout=0.2, stopword_n=8),
}


def apply_preset(cfg, name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'")
    return dataclasses.replace(cfg, **PRESETS[name])
