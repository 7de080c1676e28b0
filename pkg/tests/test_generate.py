import numpy as np
import pytest

from conftest import make_model, tiny_cfg, tiny_pairs, tiny_vocab
from latentchat.errors import ConfigError
from latentchat.generate import generate


def test_s2s_greedy_is_deterministic():
    cfg = tiny_cfg("s2s", max_len=6)
    model = make_model(cfg)
    vocab = tiny_vocab()
    pairs = tiny_pairs(vocab, n=2)
    samples = generate(model, vocab, pairs, strategy="greedy", latent="none",
                       n=5, seed=0, max_len=6)
    for s in samples:
        assert len(s.responses) == 5
        assert all(r == s.responses[0] for r in s.responses)


def test_fixed_seed_reproducible():
    cfg = tiny_cfg("ltcm", max_len=6)
    model = make_model(cfg)
    vocab = tiny_vocab()
    pairs = tiny_pairs(vocab, n=2)
    kw = dict(strategy="greedy", latent="prior", n=3, seed=7, max_len=6)
    a = generate(model, vocab, pairs, **kw)
    b = generate(model, vocab, pairs, **kw)
    assert [s.responses for s in a] == [s.responses for s in b]
    assert [s.gate_probs for s in a] == [s.gate_probs for s in b]


def test_streams_independent_of_batching():
    cfg = tiny_cfg("lvs2s", max_len=6)
    model = make_model(cfg)
    vocab = tiny_vocab()
    pairs = tiny_pairs(vocab, n=3)
    joint = generate(model, vocab, pairs, strategy="greedy", latent="prior",
                     n=2, seed=3, max_len=6)
    solo = [generate(model, vocab, [p], strategy="greedy", latent="prior",
                     n=2, seed=3, max_len=6)[0] for p in pairs]
    # stream RNG is derived from the prompt index, so single-prompt calls
    # reproduce the first batched stream
    assert joint[0].responses == solo[0].responses


def test_responses_terminate():
    cfg = tiny_cfg("ltcm", max_len=5)
    model = make_model(cfg)
    vocab = tiny_vocab()
    samples = generate(model, vocab, tiny_pairs(vocab, n=2), strategy="sample",
                       latent="prior", n=3, seed=0, max_len=5)
    for s in samples:
        for r in s.responses:
            assert len(r) <= 5
            assert "</s>" not in r[:-1]
            assert "<pad>" not in r and "<s>" not in r


def test_ltcm_beta_zero_gate_off_matches_s2s_greedy():
    cfg = tiny_cfg("ltcm", max_len=6, gate_mode="threshold")
    model = make_model(cfg)
    model.params["beta"].data[...] = 0.0
    plain = make_model(tiny_cfg("s2s", max_len=6))
    for k in plain.params:
        plain.params[k].data[...] = model.params[k].data
    vocab = tiny_vocab()
    pairs = tiny_pairs(vocab, n=2)
    a = generate(model, vocab, pairs, strategy="greedy", latent="prior",
                 n=1, seed=0, max_len=6, gate_mode="threshold")
    b = generate(plain, vocab, pairs, strategy="greedy", latent="none",
                 n=1, seed=0, max_len=6)
    assert [s.responses for s in a] == [s.responses for s in b]


def test_conditional_with_zero_variance_collapses():
    cfg = tiny_cfg("lvs2s", max_len=6)
    model = make_model(cfg)
    # prior net: mean fixed, log-variance driven to -inf surrogate
    for leaf in ("W2", "b2"):
        model.params[f"prior_net.logvar.{leaf}"].data[...] = 0.0
    model.params["prior_net.logvar.b2"].data[...] = -60.0
    vocab = tiny_vocab()
    samples = generate(model, vocab, tiny_pairs(vocab, n=1),
                       strategy="greedy", latent="conditional",
                       n=5, seed=0, max_len=6)
    rs = samples[0].responses
    assert all(r == rs[0] for r in rs)


def test_invalid_combinations_rejected():
    vocab = tiny_vocab()
    pairs = tiny_pairs(vocab, n=1)
    s2s = make_model(tiny_cfg("s2s"))
    with pytest.raises(ConfigError):
        generate(s2s, vocab, pairs, latent="prior")
    with pytest.raises(ConfigError):
        generate(s2s, vocab, pairs, strategy="beam", latent="none")
    lv = make_model(tiny_cfg("lvs2s"))
    with pytest.raises(ConfigError):
        generate(lv, vocab, pairs, latent="none")
    lv_u = make_model(tiny_cfg("lvs2s", latent_mode="unconditional"))
    with pytest.raises(ConfigError):
        generate(lv_u, vocab, pairs, latent="conditional")
    ntm = make_model(tiny_cfg("ntm"))
    with pytest.raises(ConfigError):
        generate(ntm, vocab, pairs, latent="none")
