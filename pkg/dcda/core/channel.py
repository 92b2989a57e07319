# dcda/core/channel.py
"""Link models for transmitted dual coordinates.

Noise and dither are drawn from keyed streams: the noise on link (i, j)
at time t comes from the stream (seed, i, j, t) and coordinate k takes its
k-th draw; the dither of sender j at time t comes from (seed, j, t) the
same way. Every receiver of a broadcast therefore sees the same symbol.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from dcda.core.exceptions import ConfigurationError
from dcda.models.domain import NoisyChannel, QuantizedChannel, ZoomSchedule
from dcda.utils.seeding import keyed_rng


def transmit_perfect(z):
    return z


def link_noise(model: NoisyChannel, link: Tuple[int, int], t: int, d: int) -> np.ndarray:
    """Gaussian noise vector of the (receiver i, sender j) link at time t"""
    i, j = link
    if model.gamma2 == 0:
        return np.zeros(d)
    std = np.sqrt(model.gamma2 / d)
    return keyed_rng(model.seed, i, j, t).normal(0.0, std, size=d)


def transmit_noisy(z, link: Tuple[int, int], t: int, model: NoisyChannel) -> np.ndarray:
    """u_ij(t) = z_j(t) + n_ij(t) with per-component variance gamma2 / d"""
    if not isinstance(model, NoisyChannel):
        raise ConfigurationError("transmit_noisy needs a noisy channel model")
    z = np.asarray(z, dtype=float)
    return z + link_noise(model, link, t, z.shape[-1])


def dither_vector(seed: int, sender: int, t: int, d: int) -> np.ndarray:
    """Dither of every coordinate a sender quantizes at time t, uniform on [-1/2, 1/2)"""
    return keyed_rng(seed, sender, t).random(d) - 0.5


def dither_at(seed: int, sender: int, k: int, t: int) -> float:
    """Dither of one (sender, coordinate, time) key; equals dither_vector(...)[k]"""
    return float(dither_vector(seed, sender, t, k + 1)[k])


def quantize_delta(delta, t: int, dither, zoom: ZoomSchedule):
    """Dithered quantizer floor(delta / s(t) + dither).

    The dither is not subtracted on decode, so s(t) * symbol lies within
    s(t) below delta + s(t) * dither. Symbols are unbounded integers (no
    overload clipping).
    """
    scaled = np.floor(np.asarray(delta, dtype=float) / zoom(t) + np.asarray(dither, dtype=float))
    if np.ndim(scaled) == 0:
        return int(scaled)
    return scaled.astype(np.int64)


@dataclass
class QuantizerState:
    """Sender-side bookkeeping of the quantized link.

    ``records`` holds (t, sender, coordinate, symbol, delta, scale) for every
    symbol put on a link when auditing is on; ``links`` holds the receivers
    of each record for the message log.
    """
    model: QuantizedChannel
    audit: bool = False
    records: List[Tuple[int, int, int, int, float, float]] = field(default_factory=list)
    links: List[Tuple[int, ...]] = field(default_factory=list)

    def encode(self, deltas: np.ndarray, t: int) -> np.ndarray:
        """Symbols u_j(t) for every node (rows) and coordinate (columns)"""
        n, d = deltas.shape
        dithers = np.stack([dither_vector(self.model.seed, j, t, d) for j in range(n)])
        return quantize_delta(deltas, t, dithers, self.model.zoom)

    def decode(self, symbols: np.ndarray, t: int) -> np.ndarray:
        return self.model.zoom(t) * symbols

    def log(self, t: int, symbols: np.ndarray, deltas: np.ndarray, coords: np.ndarray, receivers) -> None:
        if not self.audit:
            return
        scale = float(self.model.zoom(t))
        for j, recv in enumerate(receivers):
            if not recv:
                continue
            for k in coords:
                self.records.append((t, j, int(k), int(symbols[j, k]), float(deltas[j, k]), scale))
                self.links.append(tuple(recv))
