"""Codeword-conditioned scalar-to-pose network with analytic gradients.

The pose head maps a path parameter x in [-1, 1] to a raw 6-vector
(position plus unnormalized orientation). A codeword conditions the head
either through multiplicative modulation vectors produced by a ReLU
branch (one vector per block, elementwise product with the block
activation), or by concatenating the codeword onto every block input.
A separate two-layer ReLU network with a sigmoid readout maps the same
codeword to a confidence score.

Everything is plain float64 numpy. Backward passes are exact
reverse-mode differentiation of the forward graph; the test suite checks
them against central finite differences.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

ACTIVATIONS = ("relu", "siren", "finer")
CONDITIONING = ("modulation", "concat")
DEFAULT_OMEGA0 = 30.0

__all__ = [
    "ACTIVATIONS",
    "CONDITIONING",
    "HeadConfig",
    "HeadParams",
    "Gradients",
    "init_head",
    "activation",
    "modulator_forward",
    "head_forward",
    "head_forward_batch",
    "confidence_forward",
    "head_backward",
    "confidence_backward",
    "named_parameters",
    "gradient_arrays",
    "parameter_count",
    "zero_gradients",
    "accumulate_gradients",
    "head_to_document",
    "head_from_document",
    "save_head",
    "load_head",
]


@dataclass(frozen=True)
class HeadConfig:
    """Shape and behaviour of one pose head.

    depth:  number of conditioned blocks.
    width:  hidden units per block.
    code_dim: codeword length (0 collapses concat mode to a plain MLP).
    omega0: frequency scale of the sinusoidal activations.
    use_bias: disable to evaluate the bias-free strict form.
    finer_bias_scale: range of the first-layer bias draw under finer.
    conf_hidden: hidden width of the confidence branch; None means code_dim.
    """

    depth: int = 4
    width: int = 512
    code_dim: int = 384
    activation: str = "relu"
    conditioning: str = "modulation"
    omega0: float = DEFAULT_OMEGA0
    use_bias: bool = True
    finer_bias_scale: float = 1.0
    conf_hidden: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be >= 1")
        if self.code_dim < 0:
            raise ValueError("code_dim must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.conditioning not in CONDITIONING:
            raise ValueError(f"unknown conditioning {self.conditioning!r}")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")

    @property
    def conf_width(self) -> int:
        if self.conf_hidden is not None:
            return self.conf_hidden
        return max(self.code_dim, 1)


@dataclass
class HeadParams:
    """All learnable arrays of one head, shapes fixed by the config."""

    config: HeadConfig
    block_w: list[np.ndarray]
    block_b: list[np.ndarray]
    out_w: np.ndarray
    out_b: np.ndarray
    mod_w: list[np.ndarray]
    mod_b: list[np.ndarray]
    conf_w1: np.ndarray
    conf_b1: np.ndarray
    conf_w2: np.ndarray
    conf_b2: np.ndarray


@dataclass
class Gradients:
    """Same layout as HeadParams plus the codeword gradient."""

    block_w: list[np.ndarray]
    block_b: list[np.ndarray]
    out_w: np.ndarray
    out_b: np.ndarray
    mod_w: list[np.ndarray]
    mod_b: list[np.ndarray]
    conf_w1: np.ndarray
    conf_b1: np.ndarray
    conf_w2: np.ndarray
    conf_b2: np.ndarray
    codeword: np.ndarray


def _block_in_dim(config: HeadConfig, layer: int) -> int:
    if config.conditioning == "modulation":
        return 1 if layer == 0 else config.width
    return (1 if layer == 0 else config.width) + config.code_dim


def _allocate(config: HeadConfig) -> HeadParams:
    width, code = config.width, config.code_dim
    block_w = [np.zeros((width, _block_in_dim(config, l))) for l in range(config.depth)]
    block_b = [np.zeros(width) for _ in range(config.depth)]
    mod_w: list[np.ndarray] = []
    mod_b: list[np.ndarray] = []
    if config.conditioning == "modulation":
        mod_w = [np.zeros((width, code if l == 0 else width + code)) for l in range(config.depth)]
        mod_b = [np.zeros(width) for _ in range(config.depth)]
    hc = config.conf_width
    return HeadParams(
        config=config,
        block_w=block_w,
        block_b=block_b,
        out_w=np.zeros((6, width)),
        out_b=np.zeros(6),
        mod_w=mod_w,
        mod_b=mod_b,
        conf_w1=np.zeros((hc, code)),
        conf_b1=np.zeros(hc),
        conf_w2=np.zeros(hc),
        conf_b2=np.zeros(()),
    )


def init_head(config: HeadConfig) -> HeadParams:
    """Draw fresh parameters, deterministic given the config seed.

    ReLU heads use uniform fan-in scaling; sine-family heads use the
    usual sinusoidal-network scheme (first layer 1/fan_in, later layers
    sqrt(6/fan_in)/omega0). Finer additionally widens the first-layer
    bias range. The modulation and confidence branches are always ReLU
    and always use fan-in scaling.
    """
    params = _allocate(config)
    rng = np.random.default_rng(config.seed)
    sinusoidal = config.activation in ("siren", "finer")

    def draw(arr: np.ndarray, bound: float) -> np.ndarray:
        return rng.uniform(-bound, bound, size=arr.shape)

    for layer in range(config.depth):
        fan_in = params.block_w[layer].shape[1]
        if sinusoidal:
            w_bound = 1.0 / fan_in if layer == 0 else np.sqrt(6.0 / fan_in) / config.omega0
        else:
            w_bound = 1.0 / np.sqrt(fan_in)
        params.block_w[layer][...] = draw(params.block_w[layer], w_bound)
        if config.use_bias:
            if config.activation == "finer" and layer == 0:
                b_bound = config.finer_bias_scale
            else:
                b_bound = 1.0 / np.sqrt(fan_in)
            params.block_b[layer][...] = draw(params.block_b[layer], b_bound)

    out_bound = np.sqrt(6.0 / config.width) / config.omega0 if sinusoidal else 1.0 / np.sqrt(config.width)
    params.out_w[...] = draw(params.out_w, out_bound)
    if config.use_bias:
        params.out_b[...] = draw(params.out_b, 1.0 / np.sqrt(config.width))

    for layer in range(len(params.mod_w)):
        fan_in = max(params.mod_w[layer].shape[1], 1)
        params.mod_w[layer][...] = draw(params.mod_w[layer], 1.0 / np.sqrt(fan_in))
        if config.use_bias:
            params.mod_b[layer][...] = draw(params.mod_b[layer], 1.0 / np.sqrt(fan_in))

    conf_fan = max(config.code_dim, 1)
    params.conf_w1[...] = draw(params.conf_w1, 1.0 / np.sqrt(conf_fan))
    hc = config.conf_width
    if config.use_bias:
        params.conf_b1[...] = draw(params.conf_b1, 1.0 / np.sqrt(conf_fan))
    params.conf_w2[...] = draw(params.conf_w2, 1.0 / np.sqrt(hc))
    if config.use_bias:
        params.conf_b2[...] = draw(params.conf_b2, 1.0 / np.sqrt(hc))
    return params


def activation(z, kind: str, omega0: float = DEFAULT_OMEGA0):
    """Activation value and derivative, elementwise.

    relu: max(0, z). siren: sin(omega0 z). finer: sin(omega0 (|z|+1) z),
    whose derivative is omega0 (2|z|+1) cos(omega0 (|z|+1) z); the |z|
    subgradient at zero is taken as 0.
    """
    arr = np.asarray(z, dtype=float)
    if kind == "relu":
        value = np.maximum(arr, 0.0)
        deriv = (arr > 0).astype(float)
    elif kind == "siren":
        value = np.sin(omega0 * arr)
        deriv = omega0 * np.cos(omega0 * arr)
    elif kind == "finer":
        scaled = (np.abs(arr) + 1.0) * arr
        value = np.sin(omega0 * scaled)
        deriv = omega0 * (2.0 * np.abs(arr) + 1.0) * np.cos(omega0 * scaled)
    else:
        raise ValueError(f"unknown activation {kind!r}")
    if arr.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def _as_codeword(params: HeadParams, codeword) -> np.ndarray:
    code = np.asarray(codeword, dtype=float).reshape(-1)
    if code.shape[0] != params.config.code_dim:
        raise ValueError(
            f"codeword length {code.shape[0]} != configured code_dim {params.config.code_dim}"
        )
    return code


def _modulator_with_cache(params: HeadParams, code: np.ndarray):
    pres: list[np.ndarray] = []
    hs: list[np.ndarray] = []
    for layer in range(params.config.depth):
        inp = code if layer == 0 else np.concatenate([hs[-1], code])
        pre = params.mod_w[layer] @ inp + params.mod_b[layer]
        pres.append(pre)
        hs.append(np.maximum(pre, 0.0))
    return hs, pres


def modulator_forward(params: HeadParams, codeword) -> list[np.ndarray]:
    """Hidden modulation vectors h_0 .. h_{depth-1} (always ReLU)."""
    if params.config.conditioning != "modulation":
        raise ValueError("head is configured for concat conditioning; no modulator")
    code = _as_codeword(params, codeword)
    hs, _ = _modulator_with_cache(params, code)
    return hs


@dataclass
class _ForwardCache:
    xs: np.ndarray
    code: np.ndarray
    inputs: list[np.ndarray]  # matrix fed to each block, (in_dim, T)
    zs: list[np.ndarray]  # block pre-activations, (width, T)
    acts: list[np.ndarray]  # block activation outputs, (width, T)
    mod_pres: list[np.ndarray]
    mod_hs: list[np.ndarray]
    x_last: np.ndarray  # final block output, (width, T)
    raw: np.ndarray  # (T, 6)


def _forward_with_cache(params: HeadParams, codeword, xs) -> _ForwardCache:
    cfg = params.config
    code = _as_codeword(params, codeword)
    x_arr = np.asarray(xs, dtype=float).reshape(-1)
    if x_arr.size == 0:
        raise ValueError("need at least one sample parameter")
    if not np.all((x_arr >= -1.0) & (x_arr <= 1.0)):
        raise ValueError("sample parameters must lie in [-1, 1]")
    count = x_arr.size

    mod_hs: list[np.ndarray] = []
    mod_pres: list[np.ndarray] = []
    if cfg.conditioning == "modulation":
        mod_hs, mod_pres = _modulator_with_cache(params, code)
        code_tile = None
    else:
        code_tile = np.repeat(code[:, None], count, axis=1)

    x = x_arr[None, :]
    inputs: list[np.ndarray] = []
    zs: list[np.ndarray] = []
    acts: list[np.ndarray] = []
    for layer in range(cfg.depth):
        inp = x if cfg.conditioning == "modulation" else np.concatenate([x, code_tile])
        z = params.block_w[layer] @ inp + params.block_b[layer][:, None]
        act, _ = activation(z, cfg.activation, cfg.omega0)
        inputs.append(inp)
        zs.append(z)
        acts.append(act)
        x = mod_hs[layer][:, None] * act if cfg.conditioning == "modulation" else act
    raw = (params.out_w @ x + params.out_b[:, None]).T
    return _ForwardCache(x_arr, code, inputs, zs, acts, mod_pres, mod_hs, x, raw)


def head_forward_batch(params: HeadParams, codeword, xs) -> np.ndarray:
    """Raw (T, 6) outputs for a batch of sample parameters."""
    return _forward_with_cache(params, codeword, xs).raw


def head_forward(params: HeadParams, codeword, x: float):
    """Raw 6-vector at parameter x plus its pose view.

    The pose view keeps the first three components as the position and
    normalizes the last three to unit length; it is None when the raw
    orientation is too small to normalize.
    """
    from .paths import Pose6D

    raw = head_forward_batch(params, codeword, [x])[0]
    norm = float(np.linalg.norm(raw[3:]))
    pose = Pose6D(raw[:3].copy(), raw[3:] / norm) if norm >= 1e-12 else None
    return raw, pose


@dataclass
class _ConfCache:
    code: np.ndarray
    pre1: np.ndarray
    hidden: np.ndarray
    prob: float


def _confidence_with_cache(params: HeadParams, code: np.ndarray) -> _ConfCache:
    pre1 = params.conf_w1 @ code + params.conf_b1
    hidden = np.maximum(pre1, 0.0)
    logit = float(params.conf_w2 @ hidden + params.conf_b2)
    if logit >= 0:
        prob = 1.0 / (1.0 + np.exp(-logit))
    else:
        e = np.exp(logit)
        prob = e / (1.0 + e)
    return _ConfCache(code, pre1, hidden, float(prob))


def confidence_forward(params: HeadParams, codeword) -> float:
    """Confidence in (0, 1) for the path encoded by the codeword."""
    return _confidence_with_cache(params, _as_codeword(params, codeword)).prob


def zero_gradients(params: HeadParams) -> Gradients:
    return Gradients(
        block_w=[np.zeros_like(w) for w in params.block_w],
        block_b=[np.zeros_like(b) for b in params.block_b],
        out_w=np.zeros_like(params.out_w),
        out_b=np.zeros_like(params.out_b),
        mod_w=[np.zeros_like(w) for w in params.mod_w],
        mod_b=[np.zeros_like(b) for b in params.mod_b],
        conf_w1=np.zeros_like(params.conf_w1),
        conf_b1=np.zeros_like(params.conf_b1),
        conf_w2=np.zeros_like(params.conf_w2),
        conf_b2=np.zeros_like(params.conf_b2),
        codeword=np.zeros(params.config.code_dim),
    )


def accumulate_gradients(total: Gradients, extra: Gradients) -> None:
    """Add `extra` into `total` in place (codeword slot included)."""
    for layer in range(len(total.block_w)):
        total.block_w[layer] += extra.block_w[layer]
        total.block_b[layer] += extra.block_b[layer]
    total.out_w += extra.out_w
    total.out_b += extra.out_b
    for layer in range(len(total.mod_w)):
        total.mod_w[layer] += extra.mod_w[layer]
        total.mod_b[layer] += extra.mod_b[layer]
    total.conf_w1 += extra.conf_w1
    total.conf_b1 += extra.conf_b1
    total.conf_w2 += extra.conf_w2
    total.conf_b2 += extra.conf_b2
    total.codeword += extra.codeword


def _backward_from_cache(params: HeadParams, cache: _ForwardCache, upstream: np.ndarray) -> Gradients:
    cfg = params.config
    grads = zero_gradients(params)
    d_raw = np.asarray(upstream, dtype=float)
    if d_raw.shape != cache.raw.shape:
        raise ValueError(f"upstream gradient shape {d_raw.shape} != output shape {cache.raw.shape}")
    if not np.all(np.isfinite(d_raw)):
        raise ValueError("upstream gradients must be finite")

    d_y = d_raw.T  # (6, T)
    grads.out_w[...] = d_y @ cache.x_last.T
    grads.out_b[...] = d_y.sum(axis=1)
    d_x = params.out_w.T @ d_y

    d_mod_h = [np.zeros(cfg.width) for _ in range(cfg.depth)]
    for layer in reversed(range(cfg.depth)):
        _, act_deriv = activation(cache.zs[layer], cfg.activation, cfg.omega0)
        if cfg.conditioning == "modulation":
            d_mod_h[layer] = (cache.acts[layer] * d_x).sum(axis=1)
            d_z = cache.mod_hs[layer][:, None] * d_x * act_deriv
        else:
            d_z = d_x * act_deriv
        grads.block_w[layer][...] = d_z @ cache.inputs[layer].T
        grads.block_b[layer][...] = d_z.sum(axis=1)
        d_inp = params.block_w[layer].T @ d_z
        if cfg.conditioning == "modulation":
            d_x = d_inp
        else:
            split = cache.inputs[layer].shape[0] - cfg.code_dim
            d_x = d_inp[:split]
            grads.codeword += d_inp[split:].sum(axis=1)

    if cfg.conditioning == "modulation":
        carry = d_mod_h[cfg.depth - 1]
        for layer in reversed(range(cfg.depth)):
            d_pre = carry * (cache.mod_pres[layer] > 0)
            grads.mod_b[layer][...] = d_pre
            if layer == 0:
                grads.mod_w[0][...] = np.outer(d_pre, cache.code)
                grads.codeword += params.mod_w[0].T @ d_pre
            else:
                cat = np.concatenate([cache.mod_hs[layer - 1], cache.code])
                grads.mod_w[layer][...] = np.outer(d_pre, cat)
                d_cat = params.mod_w[layer].T @ d_pre
                carry = d_mod_h[layer - 1] + d_cat[: cfg.width]
                grads.codeword += d_cat[cfg.width :]

    if not cfg.use_bias:
        for layer in range(cfg.depth):
            grads.block_b[layer][...] = 0.0
        grads.out_b[...] = 0.0
        for layer in range(len(grads.mod_b)):
            grads.mod_b[layer][...] = 0.0
    return grads


def head_backward(params: HeadParams, codeword, xs, upstream) -> Gradients:
    """Exact gradients of the batched pose forward pass.

    `upstream` holds d(loss)/d(raw output) per sample, shape (T, 6).
    Gradients are accumulated over the batch; the modulation product
    routes them into both the block branch and the modulator branch.
    The confidence fields of the result stay zero.
    """
    cache = _forward_with_cache(params, codeword, xs)
    return _backward_from_cache(params, cache, upstream)


def _conf_backward_from_cache(params: HeadParams, cache: _ConfCache, d_prob: float) -> Gradients:
    grads = zero_gradients(params)
    d_logit = float(d_prob) * cache.prob * (1.0 - cache.prob)
    grads.conf_w2[...] = d_logit * cache.hidden
    grads.conf_b2[...] = d_logit
    d_hidden = params.conf_w2 * d_logit
    d_pre = d_hidden * (cache.pre1 > 0)
    grads.conf_w1[...] = np.outer(d_pre, cache.code)
    grads.conf_b1[...] = d_pre
    grads.codeword += params.conf_w1.T @ d_pre
    if not params.config.use_bias:
        grads.conf_b1[...] = 0.0
        grads.conf_b2[...] = 0.0
    return grads


def confidence_backward(params: HeadParams, codeword, d_prob: float) -> Gradients:
    """Gradients of the confidence output w.r.t. its branch and the codeword."""
    code = _as_codeword(params, codeword)
    cache = _confidence_with_cache(params, code)
    return _conf_backward_from_cache(params, cache, d_prob)


def named_parameters(params: HeadParams) -> dict[str, np.ndarray]:
    """Stable name -> array view of every learnable tensor."""
    named: dict[str, np.ndarray] = {}
    for layer, (w, b) in enumerate(zip(params.block_w, params.block_b)):
        named[f"block_w{layer}"] = w
        named[f"block_b{layer}"] = b
    named["out_w"] = params.out_w
    named["out_b"] = params.out_b
    for layer, (w, b) in enumerate(zip(params.mod_w, params.mod_b)):
        named[f"mod_w{layer}"] = w
        named[f"mod_b{layer}"] = b
    named["conf_w1"] = params.conf_w1
    named["conf_b1"] = params.conf_b1
    named["conf_w2"] = params.conf_w2
    named["conf_b2"] = params.conf_b2
    return named


def gradient_arrays(grads: Gradients) -> dict[str, np.ndarray]:
    """Name -> gradient array, matching named_parameters keys plus 'codeword'."""
    named: dict[str, np.ndarray] = {}
    for layer, (w, b) in enumerate(zip(grads.block_w, grads.block_b)):
        named[f"block_w{layer}"] = w
        named[f"block_b{layer}"] = b
    named["out_w"] = grads.out_w
    named["out_b"] = grads.out_b
    for layer, (w, b) in enumerate(zip(grads.mod_w, grads.mod_b)):
        named[f"mod_w{layer}"] = w
        named[f"mod_b{layer}"] = b
    named["conf_w1"] = grads.conf_w1
    named["conf_b1"] = grads.conf_b1
    named["conf_w2"] = grads.conf_w2
    named["conf_b2"] = grads.conf_b2
    named["codeword"] = grads.codeword
    return named


def parameter_count(params: HeadParams) -> int:
    return sum(arr.size for arr in named_parameters(params).values())


def head_to_document(params: HeadParams) -> dict:
    """Self-describing dict with the config and every weight array."""
    return {
        "config": asdict(params.config),
        "weights": {name: arr.tolist() for name, arr in named_parameters(params).items()},
    }


def head_from_document(doc: dict) -> HeadParams:
    config = HeadConfig(**doc["config"])
    params = _allocate(config)
    named = named_parameters(params)
    weights = doc["weights"]
    missing = set(named) - set(weights)
    if missing:
        raise ValueError(f"head document is missing arrays: {sorted(missing)}")
    for name, arr in named.items():
        loaded = np.asarray(weights[name], dtype=float)
        if loaded.shape != arr.shape:
            raise ValueError(f"array {name} has shape {loaded.shape}, expected {arr.shape}")
        arr[...] = loaded
    return params


def save_head(params: HeadParams, path) -> None:
    with open(path, "w") as fh:
        json.dump(head_to_document(params), fh, sort_keys=True)
        fh.write("\n")


def load_head(path) -> HeadParams:
    with open(path) as fh:
        return head_from_document(json.load(fh))
