from ..errors import ConfigError
from .latent import LatentSeq2Seq
from .seq2seq import Seq2Seq
from .topic import NeuralTopicModel, TopicGatedSeq2Seq

_KINDS = {
    "s2s": Seq2Seq,
    "lvs2s": LatentSeq2Seq,
    "ntm": NeuralTopicModel,
    "ltcm": TopicGatedSeq2Seq,
}


def build_model(cfg, rng):
    try:
        cls = _KINDS[cfg.model]
    except KeyError:
        raise ConfigError(f"unknown model kind '{cfg.model}'") from None
    return cls(cfg, rng)
