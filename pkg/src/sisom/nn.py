"""Small ReLU MLP with activation capture and KL-to-uniform saliency gradients."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, EmptyPoolError, ModelParseError, ModelSchemaError, ShapeError
from .rng import fork

FORMAT_TAG = "sisom-mlp 1"


@dataclass
class MlpModel:
    """Feed-forward classifier; ReLU on hidden layers, raw logits on output.

    ``weights[l]`` has shape ``(dims[l+1], dims[l])``. ``capture`` indexes
    hidden layers (0 is the first hidden layer).
    """

    dims: tuple
    weights: list
    biases: list
    capture: tuple
    loss_history: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.capture = tuple(int(c) for c in self.capture)
        validate_layout(self.dims, self.capture)
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.dims) - 1:
            raise ModelSchemaError("need one weight matrix and bias per layer transition")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[l + 1], self.dims[l]) or b.shape != (self.dims[l + 1],):
                raise ModelSchemaError(f"layer {l}: got W{w.shape} b{b.shape}, dims say "
                                       f"({self.dims[l + 1]}, {self.dims[l]})")

    @property
    def n_classes(self):
        return self.dims[-1]

    @property
    def n_hidden(self):
        return len(self.dims) - 2

    @property
    def capture_widths(self):
        return [self.dims[j + 1] for j in self.capture]

    def copy(self):
        return MlpModel(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.capture, list(self.loss_history))


def validate_layout(dims, capture):
    if len(dims) < 3:
        raise ModelSchemaError("need input, at least one hidden layer and output")
    if any(d < 1 for d in dims):
        raise ModelSchemaError(f"layer widths must be positive: {dims}")
    if dims[-1] < 2:
        raise ModelSchemaError("need at least 2 classes")
    if not capture:
        raise ModelSchemaError("capture set is empty")
    n_hidden = len(dims) - 2
    for c in capture:
        if not 0 <= c < n_hidden:
            raise ModelSchemaError(f"capture layer {c} out of range [0, {n_hidden})")
    if any(b <= a for a, b in zip(capture, capture[1:])):
        raise ModelSchemaError(f"capture layers must be strictly increasing: {capture}")


def init_model(dims, capture, seed, label="init"):
    """He-uniform weights, zero biases, drawn from ``fork(seed, label)``."""
    rng = fork(seed, label)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(dims), weights, biases, tuple(capture))


def zero_model(dims, capture):
    return MlpModel(tuple(dims), [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])],
                    [np.zeros(o) for o in dims[1:]], tuple(capture))


@dataclass
class ForwardTrace:
    """Activations of one forward pass. Arrays are 2-D ``(n, width)``."""

    input: np.ndarray
    pre: list
    hidden: list
    logits: np.ndarray
    softmax: np.ndarray
    capture: tuple

    @property
    def captured(self):
        return [self.hidden[j] for j in self.capture]

    def __len__(self):
        return self.input.shape[0]


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.dims[0]:
        raise ShapeError(f"expected input width {model.dims[0]}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ShapeError("input contains non-finite values")
    pre, hidden = [], []
    a = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        hidden.append(a)
    logits = a @ model.weights[-1].T + model.biases[-1]
    return ForwardTrace(x, pre, hidden, logits, softmax(logits), model.capture)


def kl_to_uniform(probs):
    """D_KL(u || p) with natural log, per row."""
    c = probs.shape[-1]
    return -np.log(c) - np.log(probs).mean(axis=-1)


def grad_wrt_captured(model, trace):
    """Gradient of D_KL(u || softmax) at each captured layer.

    At the logits this is ``softmax - 1/C``; it is carried back through the
    layer Jacobians and gated by the layer's own ReLU mask, so a dead unit
    (pre-activation <= 0) gets exactly zero. For live units this equals the
    derivative with respect to the activation value.
    """
    if trace.capture != model.capture or trace.logits.shape[1] != model.n_classes:
        raise ShapeError("trace was not produced by this model")
    delta = trace.softmax - 1.0 / model.n_classes
    grads = {}
    upstream = delta @ model.weights[-1]
    for j in range(model.n_hidden - 1, -1, -1):
        gated = upstream * (trace.pre[j] > 0.0)
        if j in model.capture:
            grads[j] = gated
        if j <= model.capture[0]:
            break
        upstream = gated @ model.weights[j]
    return [grads[j] for j in model.capture]


def cross_entropy(model, x, y):
    logits = forward(model, x).logits
    shift = logits.max(axis=1, keepdims=True)
    logp = logits - shift - np.log(np.exp(logits - shift).sum(axis=1, keepdims=True))
    return float(-np.mean(logp[np.arange(len(y)), y]))


def train(model, x, y, lr=0.05, epochs=100, batch_size=32, seed=0, label="shuffle"):
    """Plain minibatch SGD on mean cross-entropy; returns a new model.

    Stable for standardized inputs with ``lr <= 0.1``; with full batches and
    ``lr <= 0.02`` the epoch loss is monotone on the bundled generators.
    Per-epoch full-data loss is kept in ``loss_history``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise EmptyPoolError("no training samples")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ShapeError(f"labels must lie in [0, {model.n_classes})")
    out = model.copy()
    out.loss_history = []
    rng = fork(seed, label)
    n = len(x)
    n_layers = len(out.weights)
    for epoch in range(epochs):
        order = rng.permutation(n)
        # overflow is reported as a DivergenceError below, not as warnings
        with np.errstate(over="ignore", invalid="ignore"):
            for lo in range(0, n, batch_size):
                idx = order[lo:lo + batch_size]
                tr = forward(out, x[idx])
                delta = tr.softmax.copy()
                delta[np.arange(len(idx)), y[idx]] -= 1.0
                delta /= len(idx)
                acts = [tr.input] + tr.hidden
                for l in range(n_layers - 1, -1, -1):
                    gw = delta.T @ acts[l]
                    gb = delta.sum(axis=0)
                    if l > 0:
                        delta = (delta @ out.weights[l]) * (tr.pre[l - 1] > 0.0)
                    out.weights[l] -= lr * gw
                    out.biases[l] -= lr * gb
            loss = cross_entropy(out, x, y)
        if not np.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at epoch {epoch}", epoch=epoch)
        out.loss_history.append(loss)
    return out


def predict(model, x):
    return np.argmax(forward(model, x).logits, axis=1)


def accuracy(model, x, y):
    return float(np.mean(predict(model, x) == np.asarray(y)))


def save_model(model, path):
    lines = [FORMAT_TAG,
             "dims " + " ".join(str(d) for d in model.dims),
             "capture " + " ".join(str(c) for c in model.capture)]
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"W {l} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in w)
        lines.append(f"b {l} {b.shape[0]}")
        lines.append(" ".join(f"{v:.17g}" for v in b))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ModelParseError(f"line {lineno}: expected integers, got {' '.join(tokens)!r}", lineno)


def _floats(line, expected, lineno):
    try:
        vals = [float(t) for t in line.split()]
    except ValueError:
        raise ModelParseError(f"line {lineno}: non-numeric value", lineno)
    if len(vals) != expected:
        raise ModelParseError(f"line {lineno}: expected {expected} values, got {len(vals)}", lineno)
    return vals


def load_model(path):
    """Parse a model file written by ``save_model``.

    Layout: a ``sisom-mlp 1`` header, ``dims``/``capture`` lines, then per
    layer ``W l rows cols`` followed by one line per row and ``b l n``
    followed by one line, and a closing ``end``.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise ModelParseError(f"line {pos + 1}: unexpected end of file, expected {what}", pos + 1)
        pos += 1
        return lines[pos - 1], pos

    header, ln = take("header")
    if header.strip() != FORMAT_TAG:
        raise ModelParseError(f"line {ln}: bad header {header!r}", ln)
    line, ln = take("dims")
    tok = line.split()
    if not tok or tok[0] != "dims":
        raise ModelParseError(f"line {ln}: expected 'dims'", ln)
    dims = _ints(tok[1:], ln)
    line, ln = take("capture")
    tok = line.split()
    if not tok or tok[0] != "capture":
        raise ModelParseError(f"line {ln}: expected 'capture'", ln)
    capture = _ints(tok[1:], ln)
    validate_layout(dims, capture)
    weights, biases = [], []
    for l in range(len(dims) - 1):
        line, ln = take(f"W {l}")
        tok = line.split()
        if len(tok) != 4 or tok[0] != "W":
            raise ModelParseError(f"line {ln}: expected 'W {l} rows cols'", ln)
        idx, rows, cols = _ints(tok[1:], ln)
        if idx != l or (rows, cols) != (dims[l + 1], dims[l]):
            raise ModelSchemaError(f"line {ln}: W block {idx} is {rows}x{cols}, dims need "
                                   f"{dims[l + 1]}x{dims[l]}")
        rows_data = []
        for _ in range(rows):
            row, rln = take(f"row of W {l}")
            rows_data.append(_floats(row, cols, rln))
        w = np.array(rows_data, dtype=np.float64).reshape(rows, cols)
        line, ln = take(f"b {l}")
        tok = line.split()
        if len(tok) != 3 or tok[0] != "b":
            raise ModelParseError(f"line {ln}: expected 'b {l} n'", ln)
        idx, n = _ints(tok[1:], ln)
        if idx != l or n != dims[l + 1]:
            raise ModelSchemaError(f"line {ln}: b block {idx} has {n} entries, dims need {dims[l + 1]}")
        row, rln = take(f"values of b {l}")
        b = np.array(_floats(row, n, rln), dtype=np.float64)
        weights.append(w)
        biases.append(b)
    line, ln = take("end")
    if line.strip() != "end":
        raise ModelParseError(f"line {ln}: expected 'end'", ln)
    return MlpModel(tuple(dims), weights, biases, tuple(capture))
