"""Adversarial training of a learned retrieval scheme.

Each iteration alternates two stochastic gradient phases: the adversary
maximizes its log-likelihood of the requested index from the generated
queries, then the user triple (query, answer, decoder networks) descends
the sum of the adversary's log-likelihood and an eta-weighted distortion
term, with the answer forced through the quantized layer.  The trade-off
weight eta grows by a fixed increment every iteration; an optional
controller instead steers it to hold the adversary at a target accuracy.

The download rate is pinned by construction: ``answer_dim`` quantized
symbols of ``log2(kappa)`` bits each per ``beta`` source symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .networks import AdversaryNet, AnswerNet, DecoderNet, QueryNet
from .quantized import QuantizedAnswer


@dataclass
class TrainerConfig:
    """Everything a training run needs; defaults follow the benchmark
    four-file Gaussian setup."""

    answer_dim: int = 6
    quant_levels: int = 2
    minibatch: int = 2048
    iterations: int = 2000
    eta_initial: float = 0.5
    eta_increment: float = 0.0002
    learning_rate: float = 1e-4
    adversary_lr: float = 5e-4
    query_widths: tuple = (8, 8, 8, 8)
    answer_widths: tuple = (256,) * 9
    decoder_widths: tuple = (256,) * 8
    adversary_widths: tuple = (64,) * 6
    query_dim: int | None = None
    target_accuracy: float | None = None  # steer eta instead of ramping
    target_band: float = 0.01
    controller_gain: float = 0.1  # multiplicative eta step while steering
    eval_every: int = 25
    eval_samples: int = 8192
    seed: int = 0

    def __post_init__(self):
        if self.quant_levels < 2:
            raise ValueError("quant_levels must be at least 2")
        if self.answer_dim < 1:
            raise ValueError("answer_dim must be positive")


@dataclass
class TrainedScheme:
    """Trained networks plus the per-evaluation history."""

    query_net: QueryNet
    answer_net: AnswerNet
    decoder_net: DecoderNet
    adversary_net: AdversaryNet
    quantizer: QuantizedAnswer
    num_files: int
    beta: int
    config: TrainerConfig
    history: dict = field(default_factory=dict)
    diverged: bool = False

    @property
    def rate(self):
        return self.config.answer_dim * math.log2(self.config.quant_levels) \
            / self.beta

    @property
    def final_accuracy(self):
        return self.history["accuracy"][-1]

    @property
    def final_distortion(self):
        return self.history["distortion"][-1]

    def eval_mode(self):
        for net in (self.query_net, self.answer_net, self.decoder_net,
                    self.adversary_net, self.quantizer):
            net.eval()

    def generate_queries(self, requested, rng):
        """Test-mode queries for an array of 1-based requests."""
        self.eval_mode()
        m = self.num_files
        onehot = np.eye(m)[np.asarray(requested) - 1]
        noise = rng.standard_normal((len(onehot), m))
        with torch.no_grad():
            q = self.query_net(
                torch.tensor(noise, dtype=torch.float32),
                torch.tensor(onehot, dtype=torch.float32),
            )
        return q.numpy()


def _evaluate(nets, quantizer, files, num_files, rng, batch):
    """Test-mode adversary accuracy and distortion on a fresh batch."""
    query_net, answer_net, decoder_net, adversary_net = nets
    for net in (query_net, answer_net, decoder_net, adversary_net, quantizer):
        net.eval()
    n = len(files)
    idx = rng.integers(0, n, size=batch)
    req = rng.integers(0, num_files, size=batch)
    onehot = torch.tensor(np.eye(num_files)[req], dtype=torch.float32)
    noise = torch.tensor(rng.standard_normal((batch, num_files)),
                         dtype=torch.float32)
    stored = torch.tensor(files[idx].reshape(batch, -1), dtype=torch.float32)
    truth = torch.tensor(
        files[idx, req], dtype=torch.float32
    )
    with torch.no_grad():
        q = query_net(noise, onehot)
        a = quantizer(answer_net(q, stored))
        xhat = decoder_net(a, noise, onehot)
        dist = float(((xhat - truth) ** 2).mean())
        guesses = adversary_net(q).argmax(dim=1).numpy()
    accuracy = float(np.mean(guesses == req))
    for net in (query_net, answer_net, decoder_net, adversary_net, quantizer):
        net.train()
    return accuracy, dist


def train(files, config):
    """Run the adversarial game on an (n, M, beta) sample array.

    Returns a :class:`TrainedScheme` whose history holds the evaluation
    iterations, adversary accuracies, distortions, and the eta path.  A
    non-finite distortion aborts the run early with ``diverged=True`` and
    the partial history retained.
    """
    files = np.asarray(files, dtype=np.float64)
    n, num_files, beta = files.shape
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed + 1)
    rng = np.random.default_rng(config.seed + 2)

    query_dim = config.query_dim or num_files
    query_net = QueryNet(num_files, config.query_widths, query_dim)
    answer_net = AnswerNet(num_files, beta, query_dim, config.answer_dim,
                           config.answer_widths)
    decoder_net = DecoderNet(num_files, beta, config.answer_dim,
                             config.decoder_widths)
    adversary_net = AdversaryNet(num_files, query_dim, config.adversary_widths)
    quantizer = QuantizedAnswer(config.quant_levels, generator=gen)
    for net in (query_net, answer_net, decoder_net, adversary_net, quantizer):
        net.train()

    user_params = (list(query_net.parameters())
                   + list(answer_net.parameters())
                   + list(decoder_net.parameters()))
    user_opt = torch.optim.RMSprop(user_params, lr=config.learning_rate)
    adv_opt = torch.optim.RMSprop(adversary_net.parameters(),
                                  lr=config.adversary_lr)

    b = config.minibatch
    eye = np.eye(num_files)
    onehot_all = torch.tensor(
        np.repeat(eye, b, axis=0), dtype=torch.float32
    )
    req_all = np.repeat(np.arange(num_files), b)
    eta = config.eta_initial
    history = {"iteration": [], "accuracy": [], "distortion": [], "eta": []}
    diverged = False

    files_t = torch.tensor(files.reshape(n, -1), dtype=torch.float32)
    files_by_req = torch.tensor(files, dtype=torch.float32)

    for t in range(config.iterations):
        # adversary phase: likelihood ascent on fresh queries
        noise = torch.randn(num_files * b, num_files, generator=gen)
        with torch.no_grad():
            q = query_net(noise, onehot_all)
        logp = adversary_net(q)
        adv_loss = -logp[np.arange(num_files * b), req_all].mean()
        adv_opt.zero_grad()
        adv_loss.backward()
        adv_opt.step()

        # user phase: descend adversary likelihood plus eta-weighted
        # distortion, through the quantized answer
        sample_idx = rng.integers(0, n, size=num_files * b)
        noise = torch.randn(num_files * b, num_files, generator=gen)
        stored = files_t[sample_idx]
        truth = files_by_req[sample_idx, req_all]
        q = query_net(noise, onehot_all)
        a = quantizer(answer_net(q, stored))
        xhat = decoder_net(a, noise, onehot_all)
        logp = adversary_net(q)
        xe = logp[np.arange(num_files * b), req_all].mean()
        dist = ((xhat - truth) ** 2).mean()
        user_loss = xe + eta * dist
        user_opt.zero_grad()
        user_loss.backward()
        user_opt.step()

        if (t + 1) % config.eval_every == 0 or t == config.iterations - 1:
            acc, d = _evaluate(
                (query_net, answer_net, decoder_net, adversary_net),
                quantizer, files, num_files, rng, config.eval_samples,
            )
            history["iteration"].append(t + 1)
            history["accuracy"].append(acc)
            history["distortion"].append(d)
            history["eta"].append(eta)
            if not math.isfinite(d):
                diverged = True
                break
            if config.target_accuracy is not None:
                # steer: more distortion pressure leaks more, so raise eta
                # below the window and lower it above
                if acc < config.target_accuracy - config.target_band:
                    eta *= 1.0 + config.controller_gain
                elif acc > config.target_accuracy + config.target_band:
                    eta /= 1.0 + config.controller_gain
                continue
        if config.target_accuracy is None:
            eta += config.eta_increment

    scheme = TrainedScheme(
        query_net=query_net, answer_net=answer_net, decoder_net=decoder_net,
        adversary_net=adversary_net, quantizer=quantizer,
        num_files=num_files, beta=beta, config=config, history=history,
        diverged=diverged,
    )
    scheme.eval_mode()
    return scheme
