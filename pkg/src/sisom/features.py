"""Coverage feature vectors and their gradient-weighted sigmoid enhancement."""
from dataclasses import dataclass

import numpy as np

from .nn import forward, grad_wrt_captured


@dataclass(frozen=True)
class SteepnessConfig:
    alpha: tuple

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if not alpha or any(not (a > 0 and np.isfinite(a)) for a in alpha):
            raise ValueError(f"steepness values must be finite and positive: {self.alpha}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def uniform(cls, n_layers, value=1.0):
        return cls((value,) * n_layers)


@dataclass
class EnhancedFeatures:
    """Batch of enhanced vectors (n, sum of captured widths) with pseudo-classes."""

    values: np.ndarray
    pseudo_class: np.ndarray
    source_id: np.ndarray

    def __len__(self):
        return len(self.values)

    def __getitem__(self, idx):
        idx = np.atleast_1d(idx)
        return EnhancedFeatures(self.values[idx], self.pseudo_class[idx], self.source_id[idx])


_TINY = np.finfo(np.float64).tiny
_ONE_MINUS = np.nextafter(1.0, 0.0)


def stable_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    # keep saturated values strictly inside (0, 1)
    return np.clip(out, _TINY, _ONE_MINUS)


def concat_features(trace):
    return np.concatenate(trace.captured, axis=1)


def pseudo_classes(logits):
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(logits, axis=1)


def enhance(trace, grads, steepness, source_id=None):
    if len(grads) != len(trace.capture) or len(steepness.alpha) != len(trace.capture):
        raise ValueError(f"need one gradient block and one steepness per captured layer "
                         f"({len(trace.capture)}), got {len(grads)} and {len(steepness.alpha)}")
    blocks = [stable_sigmoid(a * (h * g)) for a, h, g in zip(steepness.alpha, trace.captured, grads)]
    if source_id is None:
        source_id = np.arange(len(trace))
    return EnhancedFeatures(np.concatenate(blocks, axis=1), pseudo_classes(trace.logits),
                            np.asarray(source_id))


@dataclass
class Saliency:
    """Steepness-independent pieces: products h*g per layer, logits.

    Gradients do not depend on steepness, so steepness searches compute
    this once and call ``enhance`` repeatedly.
    """

    products: list
    logits: np.ndarray
    source_id: np.ndarray

    def enhance(self, steepness):
        if len(steepness.alpha) != len(self.products):
            raise ValueError(f"need {len(self.products)} steepness values, got {len(steepness.alpha)}")
        blocks = [stable_sigmoid(a * p) for a, p in zip(steepness.alpha, self.products)]
        return EnhancedFeatures(np.concatenate(blocks, axis=1), pseudo_classes(self.logits),
                                self.source_id)


def saliency(model, x, source_id=None):
    trace = forward(model, x)
    grads = grad_wrt_captured(model, trace)
    if source_id is None:
        source_id = np.arange(len(trace))
    return Saliency([h * g for h, g in zip(trace.captured, grads)], trace.logits, np.asarray(source_id))


def embed(model, x, steepness, source_id=None):
    """forward -> gradient -> enhance for a batch of raw inputs."""
    return saliency(model, x, source_id).enhance(steepness)
