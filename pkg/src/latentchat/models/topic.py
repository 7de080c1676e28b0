"""Gaussian-softmax neural topic model and the topic-gated conversational
model: topic proportions, word-level topic gate, additive logit fusion,
and the topic-matrix regularisers."""

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import InputError, TrainingError
from ..layers import MLP, init_uniform
from ..text import N_RESERVED
from .base import BaseModel, flat_targets, per_sequence
from .latent import DiagonalGaussian, GaussianHead, kl_diag, reparam_sample
from .seq2seq import Seq2Seq


def topic_proportion(nu, w1):
    """theta = softmax(W1^T nu): [B,k] x [k,K] -> simplex rows [B,K]."""
    return ad.softmax(ad.matmul(nu, w1))


def beta_regularizers(beta, lambda_ma, lambda_l2):
    """Mean squared cosine between topic columns plus squared Frobenius
    norm; zero-norm columns are skipped in the angular part."""
    gram = ad.matmul(ad.transpose(beta), beta)
    k = gram.data.shape[0]
    eye = np.eye(k)
    diag = ad.sum_axis(gram * Tensor(eye), axis=1)  # [K] column norms^2
    nz = (diag.data > 0.0).astype(np.float64)
    pair_mask = np.outer(nz, nz) * (1.0 - eye)
    denom = diag_outer(diag) + Tensor(1.0 - pair_mask)  # masked slots stay safe
    cos2 = gram * gram * recip(denom) * Tensor(pair_mask)
    n_pairs = k * (k - 1) / 2
    ma = (0.5 / max(n_pairs, 1)) * ad.tsum(cos2)
    l2 = ad.tsum(beta * beta)
    return lambda_ma * ma + lambda_l2 * l2


def diag_outer(diag):
    """outer(d, d) for a 1-D tensor via broadcast multiply."""
    return reshape_col(diag) * diag


def reshape_col(t):
    """[K] -> [K,1] view as an autodiff node."""
    def vjp(g):
        return [(t, g[:, 0])]

    return ad.Tensor(t.data[:, None], parents=(t,), vjp=vjp)


def recip(t):
    return ad.Tensor(1.0 / t.data, parents=(t,), vjp=lambda g: [(t, -g / (t.data * t.data))])


def top_words_per_topic(beta_data, vocab, k_words):
    """Per topic column, the k_words vocabulary items with the largest
    entries, ties lexicographic."""
    k_words = min(k_words, len(vocab))
    out = []
    for kcol in range(beta_data.shape[1]):
        ranked = sorted(
            range(len(vocab)),
            key=lambda i: (-beta_data[i, kcol], vocab.token_of(i)),
        )
        out.append([vocab.token_of(i) for i in ranked[:k_words]])
    return out


def _nonreserved_row_mask(vocab_size):
    m = np.ones((vocab_size, 1))
    m[:N_RESERVED] = 0.0
    return m


class TopicGatedSeq2Seq(Seq2Seq):
    """Encoder-decoder whose word logits are additively fused with a
    gated topic contribution beta @ theta; the per-word binary gate is
    observed from the stop-word labels during training."""

    kind = "ltcm"

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng, extra_in=0)
        L, K, k = cfg.vocab_size, cfg.K, cfg.k
        # wide init on the topic path: at the default 0.08 scale the
        # nu -> theta -> logits chain carries no usable gradient and the
        # latent collapses before the topic matrix can specialise
        self.beta = init_uniform(rng, (L, K), scale=1.0)
        self.beta.data[:N_RESERVED] = 0.0
        self.params["beta"] = self.beta
        self._row_mask = Tensor(_nonreserved_row_mask(L))
        self.w1 = init_uniform(rng, (k, K), scale=2.0)
        self.params["topic_proj_w1"] = self.w1
        if cfg.tie_topic_proj:
            self.wa = self.w1
        else:
            self.wa = init_uniform(rng, (k, K), scale=2.0)
            self.params["infer_proj_wa"] = self.wa
        self.w2 = init_uniform(rng, (cfg.d, 1))
        self.params["gate_w2"] = self.w2
        self.conditional = cfg.latent_mode == "conditional"
        if self.conditional:
            self.prior_net = GaussianHead(
                rng, cfg.d, cfg.mlp_hidden, k, "prior_net", self.params
            )
        self.infer_net = GaussianHead(
            rng, 2 * L, cfg.mlp_hidden, k, "infer_net", self.params
        )

    # ----- topic pieces -----------------------------------------------------

    def masked_beta(self):
        """beta with reserved-token rows pinned to zero (no gradient)."""
        return self.beta * self._row_mask

    def prior(self, u_summary, b):
        if self.conditional:
            return self.prior_net(u_summary)
        return DiagonalGaussian.standard(b, self.cfg.k)

    def posterior(self, batch):
        bows = Tensor(np.concatenate([batch.bow_prompt, batch.bow_response], axis=1))
        return self.infer_net(bows)

    def fused_loglik(self, h_tops, batch, theta, gate_flat):
        """Word log-likelihood with the gated topic term added to the
        logits; gate_flat is the observed [T*B] 0/1 label vector."""
        t_steps = len(h_tops)
        topic_part = ad.matmul(theta, ad.transpose(self.masked_beta()))  # [B,L]
        tiled = ad.concat([topic_part] * t_steps, axis=0)
        topic_add = tiled * Tensor(gate_flat[:, None])
        return self.word_loglik(h_tops, batch, topic_add=topic_add)

    def gate_logits(self, h_tops):
        H = ad.concat(h_tops, axis=0)
        return ad.sum_axis(ad.matmul(H, self.w2), axis=1)  # [T*B]

    def gate_loglik(self, h_tops, batch):
        _, mask, gate = flat_targets(batch)
        z = self.gate_logits(h_tops)
        ll = (
            Tensor(gate) * ad.log_sigmoid(z)
            + Tensor(1.0 - gate) * ad.log_sigmoid(-1.0 * z)
        ) * Tensor(mask)
        return ll, ad.tsum(ll)

    # ----- training / evaluation -------------------------------------------

    def objective(self, batch, w=1.0, training=True, rng=None, eps=None):
        if batch.gate_labels is None:
            raise TrainingError("topic-gated training requires gate labels")
        _, finals, u = self.encode(batch, training=training, rng=rng)
        q = self.posterior(batch)
        p = self.prior(u, batch.size)
        if eps is None:
            eps = rng.standard_normal((batch.size, self.cfg.k))
        nu = reparam_sample(q, eps)
        theta = topic_proportion(nu, self.wa)
        h_tops = self.decoder_h_tops(batch, finals, training=training, rng=rng)
        _, mask, gate = flat_targets(batch)
        ll_flat, ll_sum = self.fused_loglik(h_tops, batch, theta, gate)
        gate_flat, gate_sum = self.gate_loglik(h_tops, batch)
        kl_rows = kl_diag(q, p)
        kl_sum = ad.tsum(kl_rows)
        penalty = beta_regularizers(
            self.masked_beta(), self.cfg.lambda_ma, self.cfg.lambda_l2
        )
        obj = (1.0 / batch.size) * (
            -1.0 * ll_sum - gate_sum + w * kl_sum
        ) + penalty
        stats = {
            "nll": -float(ll_sum.data),
            "recon": -float(ll_sum.data),
            "gate": -float(gate_sum.data),
            "kl": float(kl_sum.data),
            "tokens": batch.n_tokens,
            "per_seq_neg_bound": (
                -per_sequence(ll_flat.data, batch)
                - per_sequence(gate_flat.data, batch)
                + kl_rows.data
            ),
            "per_seq_kl": kl_rows.data.copy(),
        }
        return obj, stats

    def approx_nll(self, batch):
        """Per-token probability p(y|h,l,theta-hat) p(l|h) with theta-hat
        from the prior mean and l from the reference stop-word labels."""
        _, finals, u = self.encode(batch, training=False)
        p = self.prior(u, batch.size)
        theta_hat = topic_proportion(p.mu, self.w1)
        h_tops = self.decoder_h_tops(batch, finals)
        _, mask, gate = flat_targets(batch)
        _, ll_sum = self.fused_loglik(h_tops, batch, theta_hat, gate)
        _, gate_sum = self.gate_loglik(h_tops, batch)
        return -(float(ll_sum.data) + float(gate_sum.data))

    def eval_sums(self, batch, rng=None):
        eps = (
            rng.standard_normal((batch.size, self.cfg.k))
            if rng is not None
            else np.zeros((batch.size, self.cfg.k))
        )
        _, stats = self.objective(batch, w=1.0, training=False, eps=eps)
        return {
            "approx_nll": self.approx_nll(batch),
            "tokens": stats["tokens"],
            "per_seq_neg_bound": stats["per_seq_neg_bound"],
            "per_seq_kl": stats["per_seq_kl"],
            "n_seqs": batch.size,
        }

    def gate_probs_forced(self, batch):
        """sigmoid(W2^T h_t) at reference positions -> ([T*B] probs,
        emitted token ids, validity mask)."""
        _, finals, _ = self.encode(batch, training=False)
        h_tops = self.decoder_h_tops(batch, finals)
        z = self.gate_logits(h_tops)
        probs = 1.0 / (1.0 + np.exp(-z.data))
        tgt, mask, _ = flat_targets(batch)
        return probs, tgt, mask


class NeuralTopicModel(BaseModel):
    """Standalone bag-of-words topic model: theta = softmax(W^T nu) over
    a document-level Gaussian, word mixture from column-normalised beta."""

    kind = "ntm"

    def __init__(self, cfg, rng):
        super().__init__(cfg)
        L, K, k = cfg.vocab_size, cfg.K, cfg.k
        self.beta = init_uniform(rng, (L, K))
        self.params["beta"] = self.beta
        self.w1 = init_uniform(rng, (k, K))
        self.params["topic_proj_w1"] = self.w1
        if cfg.tie_topic_proj:
            self.wa = self.w1
        else:
            self.wa = init_uniform(rng, (k, K))
            self.params["infer_proj_wa"] = self.wa
        self.infer_net = GaussianHead(
            rng, L, cfg.mlp_hidden, k, "infer_net", self.params
        )

    def word_mixture(self, theta):
        """p(word | theta): columns of beta softmax-normalised over the
        vocabulary, mixed by theta -> [B,L]."""
        topics = ad.softmax(ad.transpose(self.beta))  # [K,L] rows on simplex
        return ad.matmul(theta, topics)

    def bound(self, bags, rng=None, eps=None):
        """Variational bound per batch of document bags [B,L] (reserved
        columns must be zero)."""
        if bags.shape[0] == 0 or not np.any(bags.sum(axis=1) > 0):
            raise InputError("empty document bag")
        b = bags.shape[0]
        q = self.infer_net(Tensor(bags))
        p = DiagonalGaussian.standard(b, self.cfg.k)
        if eps is None:
            eps = rng.standard_normal((b, self.cfg.k))
        nu = reparam_sample(q, eps)
        theta = topic_proportion(nu, self.wa)
        mix = self.word_mixture(theta)
        ll_rows = ad.sum_axis(ad.log(mix) * Tensor(bags), axis=1)
        kl_rows = kl_diag(q, p)
        return ll_rows, kl_rows

    def objective(self, batch, w=1.0, training=True, rng=None, eps=None):
        bags = batch.bow_prompt + batch.bow_response
        ll_rows, kl_rows = self.bound(bags, rng=rng, eps=eps)
        ll_sum = ad.tsum(ll_rows)
        kl_sum = ad.tsum(kl_rows)
        penalty = beta_regularizers(
            self.beta, self.cfg.lambda_ma, self.cfg.lambda_l2
        )
        obj = (1.0 / bags.shape[0]) * (-1.0 * ll_sum + w * kl_sum) + penalty
        stats = {
            "nll": -float(ll_sum.data),
            "recon": -float(ll_sum.data),
            "kl": float(kl_sum.data),
            "gate": 0.0,
            "tokens": float(bags.sum()),
            "per_seq_neg_bound": -ll_rows.data + kl_rows.data,
            "per_seq_kl": kl_rows.data.copy(),
        }
        return obj, stats

    def eval_sums(self, batch, rng=None):
        bags = batch.bow_prompt + batch.bow_response
        eps = (
            rng.standard_normal((bags.shape[0], self.cfg.k))
            if rng is not None
            else np.zeros((bags.shape[0], self.cfg.k))
        )
        ll_rows, kl_rows = self.bound(bags, eps=eps)
        neg_bound = -ll_rows.data + kl_rows.data
        return {
            "approx_nll": float(neg_bound.sum()),
            "tokens": float(bags.sum()),
            "per_seq_neg_bound": neg_bound,
            "per_seq_kl": kl_rows.data.copy(),
            "n_seqs": bags.shape[0],
        }
