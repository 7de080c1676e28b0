"""Synthetic dialogue corpus with known topical structure.

Each pair belongs to one word cluster.  Prompts name the cluster and ask a
templated question; responses fill a randomly chosen template with random
words from the same cluster, so one prompt admits many valid responses.
A small closed lexicon of function words appears in every pair, which makes
those words recoverable as the lowest-IDF types.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# function words woven into every template; these are the intended
# low-IDF stop-word set of the generated corpus
FUNCTION_WORDS = ["the", "a", "is", "it", "of", "to", "and", "so"]

_PROMPT_TEMPLATES = [
    "so what do you think of the {c} stuff",
    "tell me a bit about the {c} thing",
    "is it true the {c} scene is big",
    "the {c} question again , what of it",
]

# every template contains all of FUNCTION_WORDS, so each function word
# occurs in every generated pair and ties at idf = 0
_RESPONSE_TEMPLATES = [
    "it is the {w0} and so a {w1} is of the {w2} to it",
    "so it is a {w0} of the {w1} and the {w2} is to it",
    "the {w0} is it and a {w1} of the {w2} is so to it",
    "it is so the {w0} , and a {w1} is of the {w2} to it",
    "so a {w0} is the {w1} and it is of the {w2} to it",
]

_CLUSTER_STEMS = [
    "river", "engine", "garden", "violin", "market", "glacier",
    "harbor", "circuit", "meadow", "comet", "quarry", "lantern",
]


@dataclass
class SyntheticSpec:
    n_clusters: int = 3
    words_per_cluster: int = 10
    n_pairs: int = 200
    seed: int = 0
    stopwords: list = field(default_factory=lambda: list(FUNCTION_WORDS))

    def __post_init__(self):
        if self.n_clusters <= 0:
            raise ConfigError("n_clusters must be positive")
        if self.words_per_cluster <= 0:
            raise ConfigError("words_per_cluster must be positive")
        if self.n_pairs <= 0:
            raise ConfigError("n_pairs must be positive")

    def cluster_name(self, c):
        stem = _CLUSTER_STEMS[c % len(_CLUSTER_STEMS)]
        return stem if c < len(_CLUSTER_STEMS) else f"{stem}{c // len(_CLUSTER_STEMS)}"

    def cluster_words(self, c):
        name = self.cluster_name(c)
        return [f"{name}{j}" for j in range(self.words_per_cluster)]


def make_corpus(spec):
    """Returns (records, truth): corpus dicts with prompt/response strings
    and per-pair ground-truth dicts with the cluster id and its words."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 17]))
    records = []
    truth = []
    for i in range(spec.n_pairs):
        c = i % spec.n_clusters
        words = spec.cluster_words(c)
        p_tpl = _PROMPT_TEMPLATES[int(rng.integers(len(_PROMPT_TEMPLATES)))]
        r_tpl = _RESPONSE_TEMPLATES[int(rng.integers(len(_RESPONSE_TEMPLATES)))]
        # one topic word per pair, repeated in every slot: the word choice
        # is a single latent decision reused across the whole response
        word = words[int(rng.integers(len(words)))]
        fills = {f"w{j}": word for j in range(3)}
        records.append({
            "prompt": p_tpl.format(c=spec.cluster_name(c)),
            "response": r_tpl.format(**fills),
        })
        truth.append({
            "index": i,
            "cluster": c,
            "cluster_name": spec.cluster_name(c),
            "cluster_words": words,
        })
    return records, truth


def write_corpus(spec, corpus_path, truth_path=None):
    records, truth = make_corpus(spec)
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    if truth_path is not None:
        with open(truth_path, "w", encoding="utf-8") as fh:
            for rec in truth:
                fh.write(json.dumps(rec) + "\n")
    return corpus_path
