"""
Attentive-probe aggregator and MLP prediction head over precomputed clip embeddings.

Forward:
    A = softmax(Q Xᵀ / √D)            (M×P, rows sum to 1)
    f = vec(A X W)                     (M·d, rows concatenated)
    hidden layer: affine → layer norm → GELU → inverted dropout   (×2)
    logit = affine(last hidden), p = sigmoid(logit)

In linear mode the probe is replaced by the mean over patches and the MLP by a single
affine layer. Gradients are derived by hand in reverse order and checked against
central finite differences by ``gradient_check``.

All arithmetic runs in float64.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit, ndtr

from src.errors import RngStreamMismatchError, ShapeError

LN_EPS = 1e-5
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class HeadMode(str, Enum):
    LINEAR = "linear"
    PROBE_LINEAR = "probe_linear"
    PROBE_MLP = "probe_mlp"

    @property
    def probe_enabled(self) -> bool:
        return self is not HeadMode.LINEAR

    @property
    def mlp_enabled(self) -> bool:
        return self is HeadMode.PROBE_MLP


@dataclass(frozen=True)
class HeadConfig:
    mode: str = HeadMode.PROBE_MLP.value
    n_queries: int = 12
    proj_dim: int = 64
    hidden: int = 768
    n_hidden_layers: int = 2
    dropout: float = 0.1

    def __post_init__(self):
        HeadMode(self.mode)
        if self.n_queries < 1 or self.proj_dim < 1 or self.hidden < 1:
            raise ShapeError("head dimensions must be positive")
        if self.n_hidden_layers < 0:
            raise ShapeError("n_hidden_layers must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ShapeError(f"dropout {self.dropout} outside [0, 1)")


@dataclass(frozen=True, eq=False)
class ProbeParams:
    Q: np.ndarray  # M×D learned queries
    W: np.ndarray  # D×d projection

    def __post_init__(self):
        if self.Q.ndim != 2 or self.W.ndim != 2 or self.Q.shape[1] != self.W.shape[0]:
            raise ShapeError(f"probe shapes do not chain: Q{self.Q.shape}, W{self.W.shape}")

    @property
    def output_dim(self) -> int:
        return self.Q.shape[0] * self.W.shape[1]


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    weight: np.ndarray  # in×H
    bias: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray


@dataclass(frozen=True, eq=False)
class MLPParams:
    hidden: Tuple[HiddenLayer, ...]
    out_weight: np.ndarray
    out_bias: np.ndarray  # shape (1,)
    dropout: float = 0.1

    def __post_init__(self):
        width = None
        for i, layer in enumerate(self.hidden):
            if width is not None and layer.weight.shape[0] != width:
                raise ShapeError(f"hidden layer {i} expects {layer.weight.shape[0]} inputs, previous gives {width}")
            width = layer.weight.shape[1]
            for name in ("bias", "ln_gain", "ln_bias"):
                if getattr(layer, name).shape != (width,):
                    raise ShapeError(f"hidden layer {i} {name} has shape {getattr(layer, name).shape}")
        if width is not None and self.out_weight.shape != (width,):
            raise ShapeError(f"output layer expects {self.out_weight.shape}, last hidden gives {width}")
        if self.out_bias.shape != (1,):
            raise ShapeError("output bias must have shape (1,)")
        if not 0.0 <= self.dropout < 1.0:
            raise ShapeError(f"dropout {self.dropout} outside [0, 1)")

    @property
    def input_dim(self) -> int:
        return self.hidden[0].weight.shape[0] if self.hidden else self.out_weight.shape[0]


@dataclass(frozen=True, eq=False)
class HeadParams:
    probe: Optional[ProbeParams]
    mlp: MLPParams

    def __post_init__(self):
        if self.probe is None and self.mlp.hidden:
            raise ShapeError("without the probe the head is a single affine layer")
        expected = self.probe.output_dim if self.probe is not None else None
        if expected is not None and self.mlp.input_dim != expected:
            raise ShapeError(f"MLP expects {self.mlp.input_dim} features, probe gives {expected}")

    @property
    def probe_enabled(self) -> bool:
        return self.probe is not None

    @property
    def mlp_enabled(self) -> bool:
        return bool(self.mlp.hidden)

    @property
    def mode(self) -> HeadMode:
        if not self.probe_enabled:
            return HeadMode.LINEAR
        return HeadMode.PROBE_MLP if self.mlp_enabled else HeadMode.PROBE_LINEAR

    @property
    def input_dim(self) -> int:
        return self.probe.Q.shape[1] if self.probe is not None else self.mlp.input_dim

    def named_tensors(self) -> Dict[str, np.ndarray]:
        """Every tensor in declaration order."""
        tensors: Dict[str, np.ndarray] = {}
        if self.probe is not None:
            tensors["probe.Q"] = self.probe.Q
            tensors["probe.W"] = self.probe.W
        for i, layer in enumerate(self.mlp.hidden):
            tensors[f"mlp.{i}.weight"] = layer.weight
            tensors[f"mlp.{i}.bias"] = layer.bias
            tensors[f"mlp.{i}.ln_gain"] = layer.ln_gain
            tensors[f"mlp.{i}.ln_bias"] = layer.ln_bias
        tensors["out.weight"] = self.mlp.out_weight
        tensors["out.bias"] = self.mlp.out_bias
        return tensors

    def with_tensors(self, tensors: Dict[str, np.ndarray]) -> "HeadParams":
        current = self.named_tensors()
        unknown = set(tensors) - set(current)
        if unknown:
            raise ShapeError(f"unknown parameter tensors: {sorted(unknown)}")
        merged = {}
        for name, value in current.items():
            new = np.asarray(tensors.get(name, value), dtype=np.float64)
            if new.shape != value.shape:
                raise ShapeError(f"{name}: shape {new.shape} does not match {value.shape}")
            merged[name] = new
        probe = None
        if self.probe is not None:
            probe = ProbeParams(Q=merged["probe.Q"], W=merged["probe.W"])
        hidden = tuple(
            HiddenLayer(
                weight=merged[f"mlp.{i}.weight"],
                bias=merged[f"mlp.{i}.bias"],
                ln_gain=merged[f"mlp.{i}.ln_gain"],
                ln_bias=merged[f"mlp.{i}.ln_bias"],
            )
            for i in range(len(self.mlp.hidden))
        )
        mlp = replace(self.mlp, hidden=hidden, out_weight=merged["out.weight"], out_bias=merged["out.bias"])
        return HeadParams(probe=probe, mlp=mlp)


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_head(input_dim: int, config: HeadConfig = HeadConfig(), seed: int = 0) -> HeadParams:
    """Fan-in uniform initialization; layer-norm gain 1 and bias 0."""
    rng = np.random.default_rng(seed)
    mode = HeadMode(config.mode)
    probe = None
    features = input_dim
    if mode.probe_enabled:
        probe = ProbeParams(
            Q=_uniform(rng, input_dim, (config.n_queries, input_dim)),
            W=_uniform(rng, input_dim, (input_dim, config.proj_dim)),
        )
        features = config.n_queries * config.proj_dim
    hidden = []
    if mode.mlp_enabled:
        width = features
        for _ in range(config.n_hidden_layers):
            hidden.append(
                HiddenLayer(
                    weight=_uniform(rng, width, (width, config.hidden)),
                    bias=_uniform(rng, width, (config.hidden,)),
                    ln_gain=np.ones(config.hidden),
                    ln_bias=np.zeros(config.hidden),
                )
            )
            width = config.hidden
        features = width
    mlp = MLPParams(
        hidden=tuple(hidden),
        out_weight=_uniform(rng, features, (features,)),
        out_bias=_uniform(rng, features, (1,)),
        dropout=config.dropout,
    )
    return HeadParams(probe=probe, mlp=mlp)


def gelu(x):
    """Exact GELU, x·Φ(x)."""
    return x * ndtr(x)


def gelu_grad(x):
    return ndtr(x) + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def _check_input(X: np.ndarray, input_dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeError(f"expected a P×D patch matrix, got shape {X.shape}")
    if X.shape[1] != input_dim:
        raise ShapeError(f"patch dimension {X.shape[1]} does not match head input {input_dim}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("non-finite patch values")
    return X


def _pool_parts(X: np.ndarray, probe: ProbeParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    A = softmax_rows(probe.Q @ X.T / math.sqrt(X.shape[1]))
    Z = A @ X
    return A, Z, (Z @ probe.W).reshape(-1)


def attentive_pool(X: np.ndarray, probe: ProbeParams) -> np.ndarray:
    """
    Pool P patch features into M·d features with learned-query attention.

    Args:
        X: P×D patch matrix
        probe: Queries Q (M×D) and projection W (D×d)

    Returns:
        Concatenated rows of A·X·W, length M·d
    """
    X = _check_input(X, probe.Q.shape[1])
    return _pool_parts(X, probe)[2]


def _layer_norm(h: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    centered = h - h.mean()
    inv_std = 1.0 / math.sqrt(float((centered * centered).mean()) + LN_EPS)
    xhat = centered * inv_std
    return xhat * gain + bias, xhat, inv_std


def _layer_norm_backward(dy: np.ndarray, xhat: np.ndarray, inv_std: float, gain: np.ndarray):
    dxhat = dy * gain
    dh = inv_std * (dxhat - dxhat.mean() - xhat * (dxhat * xhat).mean())
    return dh, dy * xhat, dy


@dataclass
class ForwardCache:
    X: np.ndarray
    features: np.ndarray
    logit: float
    p: float
    A: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    layers: Optional[List[dict]] = None
    final_input: Optional[np.ndarray] = None


def _dropout_mask(rng: Optional[np.random.Generator], size: int, rate: float, train_mode: bool) -> np.ndarray:
    if not train_mode or rate == 0.0:
        return np.ones(size)
    if rng is None:
        raise RngStreamMismatchError("train-mode dropout needs a random generator")
    keep = rng.random(size) >= rate
    return keep / (1.0 - rate)


def forward_with_cache(
    X: np.ndarray,
    params: HeadParams,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ForwardCache:
    X = _check_input(X, params.input_dim)
    A = Z = None
    if params.probe is not None:
        A, Z, features = _pool_parts(X, params.probe)
    else:
        features = X.mean(axis=0)

    layers = []
    current = features
    for layer in params.mlp.hidden:
        h = current @ layer.weight + layer.bias
        n, xhat, inv_std = _layer_norm(h, layer.ln_gain, layer.ln_bias)
        a = gelu(n)
        mask = _dropout_mask(rng, a.shape[0], params.mlp.dropout, train_mode)
        layers.append({"input": current, "n": n, "xhat": xhat, "inv_std": inv_std, "mask": mask})
        current = a * mask

    logit = float(current @ params.mlp.out_weight + params.mlp.out_bias[0])
    return ForwardCache(
        X=X, features=features, logit=logit, p=float(expit(logit)), A=A, Z=Z, layers=layers, final_input=current
    )


def head_forward(
    X: np.ndarray,
    params: HeadParams,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Collision probability for one clip; eval mode is deterministic."""
    return forward_with_cache(X, params, train_mode, rng).p


def _backward(cache: ForwardCache, params: HeadParams, label: int, loss_scale: float) -> Dict[str, np.ndarray]:
    grads: Dict[str, np.ndarray] = {}
    dlogit = loss_scale * (cache.p - label)
    grads["out.weight"] = dlogit * cache.final_input
    grads["out.bias"] = np.array([dlogit])
    upstream = dlogit * params.mlp.out_weight

    for i in reversed(range(len(params.mlp.hidden))):
        layer = params.mlp.hidden[i]
        saved = cache.layers[i]
        dn = upstream * saved["mask"] * gelu_grad(saved["n"])
        dh, dgain, dbias = _layer_norm_backward(dn, saved["xhat"], saved["inv_std"], layer.ln_gain)
        grads[f"mlp.{i}.weight"] = np.outer(saved["input"], dh)
        grads[f"mlp.{i}.bias"] = dh
        grads[f"mlp.{i}.ln_gain"] = dgain
        grads[f"mlp.{i}.ln_bias"] = dbias
        upstream = layer.weight @ dh

    if params.probe is not None:
        probe = params.probe
        M, d = probe.Q.shape[0], probe.W.shape[1]
        dF = upstream.reshape(M, d)
        grads["probe.W"] = cache.Z.T @ dF
        dZ = dF @ probe.W.T
        dA = dZ @ cache.X.T
        dS = cache.A * (dA - (dA * cache.A).sum(axis=1, keepdims=True))
        grads["probe.Q"] = dS @ cache.X / math.sqrt(cache.X.shape[1])

    order = list(params.named_tensors())
    return {name: grads[name] for name in order}


def head_backward(
    X: np.ndarray,
    params: HeadParams,
    label: int,
    rng: Optional[np.random.Generator] = None,
    cache: Optional[ForwardCache] = None,
    train_mode: bool = True,
    loss_scale: float = 1.0,
) -> Dict[str, np.ndarray]:
    """
    Gradients of the binary cross-entropy loss for every enabled parameter tensor.

    The forward pass is replayed with ``rng``, which must be in the state it had before
    the original forward; when that forward's ``cache`` is given its dropout masks must
    match the replay.
    """
    replay = forward_with_cache(X, params, train_mode, rng)
    if cache is not None:
        for i, (old, new) in enumerate(zip(cache.layers or [], replay.layers or [])):
            if not np.array_equal(old["mask"], new["mask"]):
                raise RngStreamMismatchError(f"dropout mask of hidden layer {i} differs on replay")
    return _backward(replay, params, label, loss_scale)


def loss_and_gradients(
    X: np.ndarray,
    params: HeadParams,
    label: int,
    rng: Optional[np.random.Generator] = None,
    train_mode: bool = True,
) -> Tuple[float, float, Dict[str, np.ndarray]]:
    """Single forward/backward: (loss, probability, gradients)."""
    cache = forward_with_cache(X, params, train_mode, rng)
    return bce_from_logit(cache.logit, label), cache.p, _backward(cache, params, label, 1.0)


def bce_from_logit(logit: float, label: int) -> float:
    """Binary cross-entropy written on the logit, stable for large |logit|."""
    return float(np.logaddexp(0.0, logit) - label * logit)


def gradient_check(
    X: np.ndarray,
    params: HeadParams,
    label: int,
    seed: int = 0,
    step: float = 1e-5,
    train_mode: bool = True,
) -> Dict[str, float]:
    """
    Relative error between analytic and central finite-difference gradients, per tensor.

    Dropout masks are replayed from a fresh generator seeded with ``seed`` for every
    evaluation, so perturbed and unperturbed passes see identical masks.
    """

    def loss_at(candidate: HeadParams) -> float:
        cache = forward_with_cache(X, candidate, train_mode, np.random.default_rng(seed))
        return bce_from_logit(cache.logit, label)

    analytic = head_backward(X, params, label, np.random.default_rng(seed), train_mode=train_mode)
    errors = {}
    for name, tensor in params.named_tensors().items():
        numeric = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        for index in range(flat.size):
            plus = flat.copy()
            minus = flat.copy()
            plus[index] += step
            minus[index] -= step
            up = loss_at(params.with_tensors({name: plus.reshape(tensor.shape)}))
            down = loss_at(params.with_tensors({name: minus.reshape(tensor.shape)}))
            numeric.reshape(-1)[index] = (up - down) / (2.0 * step)
        diff = float(np.linalg.norm(analytic[name] - numeric))
        scale = max(float(np.linalg.norm(analytic[name])), float(np.linalg.norm(numeric)))
        errors[name] = diff / scale if scale > 1e-10 else diff
    return errors
