"""The four fully connected networks of the retrieval game.

Defaults follow the benchmark layout for the four-file Gaussian source:
an 8-wide query generator with a skip connection from its first to its
fourth layer, 256-wide answer and decoder stacks, and a 64-wide adversary.
All hidden activations are SeLU; the answer head is a sigmoid (feeding the
quantizer) and the adversary head a softmax.
"""

from __future__ import annotations

import torch
from torch import nn


def _mlp(sizes, out_dim, head=None):
    layers = []
    for a, b in zip(sizes, sizes[1:]):
        layers += [nn.Linear(a, b), nn.SELU()]
    layers.append(nn.Linear(sizes[-1], out_dim))
    if head is not None:
        layers.append(head)
    return nn.Sequential(*layers)


class QueryNet(nn.Module):
    """(noise, one-hot request) -> query vector, with a first-to-fourth
    layer skip connection to help gradients through the narrow stack."""

    def __init__(self, num_files, widths=(8, 8, 8, 8), query_dim=None):
        super().__init__()
        if len(widths) < 4:
            raise ValueError("query net needs at least four hidden layers")
        in_dim = 2 * num_files
        self.query_dim = query_dim or num_files
        self.act = nn.SELU()
        self.fc1 = nn.Linear(in_dim, widths[0])
        self.mid = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:])
        )
        if widths[0] != widths[-1]:
            raise ValueError("skip connection needs equal first/last widths")
        self.out = nn.Linear(widths[-1], self.query_dim)

    def forward(self, noise, onehot):
        h1 = self.act(self.fc1(torch.cat([noise, onehot], dim=1)))
        h = h1
        for i, layer in enumerate(self.mid):
            z = layer(h)
            if i == len(self.mid) - 1:
                z = z + h1  # skip: first layer feeds the fourth
            h = self.act(z)
        return self.act(self.out(h))


class AnswerNet(nn.Module):
    """(query, all stored files) -> sigmoid answer in [0, 1]^answer_dim."""

    def __init__(self, num_files, beta, query_dim, answer_dim,
                 widths=(256,) * 9):
        super().__init__()
        in_dim = query_dim + num_files * beta
        self.net = _mlp((in_dim,) + tuple(widths), answer_dim, nn.Sigmoid())

    def forward(self, query, files_flat):
        return self.net(torch.cat([query, files_flat], dim=1))


class DecoderNet(nn.Module):
    """(quantized answer, noise, one-hot request) -> file estimate."""

    def __init__(self, num_files, beta, answer_dim, widths=(256,) * 8):
        super().__init__()
        in_dim = answer_dim + 2 * num_files
        self.net = _mlp((in_dim,) + tuple(widths), beta)

    def forward(self, answer, noise, onehot):
        return self.net(torch.cat([answer, noise, onehot], dim=1))


class AdversaryNet(nn.Module):
    """query -> posterior over file indices (softmax head)."""

    def __init__(self, num_files, query_dim, widths=(64,) * 6):
        super().__init__()
        self.net = _mlp((query_dim,) + tuple(widths), num_files)

    def forward(self, query):
        return torch.log_softmax(self.net(query), dim=1)
