"""Shared model scaffolding: parameter registry and batch forward glue."""

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor


class BaseModel:
    kind = "base"

    def __init__(self, cfg):
        self.cfg = cfg
        self.params = {}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def param_data(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_param_data(self, data):
        for k, p in self.params.items():
            p.data[...] = data[k]


def flat_targets(batch):
    """Targets/mask/labels flattened time-major to align with stacked
    decoder states (step 0 rows first)."""
    tgt = batch.response.T.reshape(-1)
    mask = batch.mask.T.reshape(-1)
    gate = batch.gate_labels.T.reshape(-1)
    return tgt, mask, gate


def per_sequence(flat_data, batch):
    """Fold a flat time-major [T*B] array back to per-sequence sums [B]."""
    t = batch.response.shape[1]
    return flat_data.reshape(t, batch.size).sum(axis=0)
