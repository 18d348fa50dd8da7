"""Channel-separated convolutional autoencoder for visual features.

One small autoencoder per colour channel: two stride-2 3x3 convolutions
(8 then 16 maps), a linear 10-unit fully connected bottleneck, and the mirrored
transposed convolutions back to a sigmoid image. The three bottlenecks,
concatenated R|G|B, form the 30-wide visual feature vector.
"""

from __future__ import annotations

import numpy as np

from .numerics import AdamState, RngStream, ShapeError, adam_step, init_uniform, sigmoid

CHANNELS = ("R", "G", "B")
CONV1, CONV2, BOTTLENECK = 8, 16, 10
STRIDE, PAD, K = 2, 1, 3


def _out(n: int) -> int:
    return (n + 2 * PAD - K) // STRIDE + 1


def im2col(x: np.ndarray):
    """(N, C, H, W) -> (N, C*9, OH*OW) patches for a 3x3 stride-2 window."""
    N, C, H, W = x.shape
    OH, OW = _out(H), _out(W)
    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    cols = np.empty((N, C, K, K, OH, OW), dtype=x.dtype)
    for i in range(K):
        for j in range(K):
            cols[:, :, i, j] = xp[:, :, i : i + STRIDE * (OH - 1) + 1 : STRIDE, j : j + STRIDE * (OW - 1) + 1 : STRIDE]
    return cols.reshape(N, C * K * K, OH * OW), (OH, OW)


def col2im(cols: np.ndarray, shape) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patches back into (N, C, H, W)."""
    N, C, H, W = shape
    OH, OW = _out(H), _out(W)
    cols = cols.reshape(N, C, K, K, OH, OW)
    xp = np.zeros((N, C, H + 2 * PAD, W + 2 * PAD), dtype=cols.dtype)
    for i in range(K):
        for j in range(K):
            xp[:, :, i : i + STRIDE * (OH - 1) + 1 : STRIDE, j : j + STRIDE * (OW - 1) + 1 : STRIDE] += cols[:, :, i, j]
    return xp[:, :, PAD : PAD + H, PAD : PAD + W]


def conv(x, W, b):
    cols, (OH, OW) = im2col(x)
    out = np.matmul(W.reshape(W.shape[0], -1), cols) + b[:, None]
    return out.reshape(x.shape[0], W.shape[0], OH, OW), cols


def conv_backward(dout, cols, x_shape, W):
    N, F = dout.shape[:2]
    d2 = dout.reshape(N, F, -1)
    dW = np.einsum("nfp,nkp->fk", d2, cols).reshape(W.shape)
    db = d2.sum(axis=(0, 2))
    dx = col2im(np.matmul(W.reshape(F, -1).T, d2), x_shape)
    return dx, dW, db


def deconv(x, W, b, out_hw):
    """Transposed convolution: the adjoint of ``conv`` with weights ``W``
    of shape (C_in_here, C_out_here, 3, 3)."""
    N, Cin = x.shape[:2]
    shape = (N, W.shape[1], out_hw[0], out_hw[1])
    if (_out(out_hw[0]), _out(out_hw[1])) != x.shape[2:]:
        raise ShapeError(f"deconv output {out_hw} does not map back onto input {x.shape[2:]}")
    y = col2im(np.matmul(W.reshape(Cin, -1).T, x.reshape(N, Cin, -1)), shape)
    return y + b[None, :, None, None]


def deconv_backward(dy, x, W):
    N, Cin = x.shape[:2]
    cols, _ = im2col(dy)
    x2 = x.reshape(N, Cin, -1)
    dW = np.einsum("nfp,nkp->fk", x2, cols).reshape(W.shape)
    db = dy.sum(axis=(0, 2, 3))
    dx = np.matmul(W.reshape(Cin, -1), cols).reshape(x.shape)
    return dx, dW, db


def init_cae(size, rng: RngStream, dtype=np.float64) -> dict[str, np.ndarray]:
    H, W = size
    h2, w2 = _out(_out(H)), _out(_out(W))
    flat = CONV2 * h2 * w2
    return {
        "conv1.W": init_uniform(rng, 9, 9 * CONV1, shape=(CONV1, 1, K, K), dtype=dtype),
        "conv1.b": np.zeros(CONV1, dtype=dtype),
        "conv2.W": init_uniform(rng, 9 * CONV1, 9 * CONV2, shape=(CONV2, CONV1, K, K), dtype=dtype),
        "conv2.b": np.zeros(CONV2, dtype=dtype),
        "enc.W": init_uniform(rng, flat, BOTTLENECK, dtype=dtype),
        "enc.b": np.zeros(BOTTLENECK, dtype=dtype),
        "dec.W": init_uniform(rng, BOTTLENECK, flat, dtype=dtype),
        "dec.b": np.zeros(flat, dtype=dtype),
        "deconv1.W": init_uniform(rng, 9 * CONV2, 9 * CONV1, shape=(CONV2, CONV1, K, K), dtype=dtype),
        "deconv1.b": np.zeros(CONV1, dtype=dtype),
        "deconv2.W": init_uniform(rng, 9 * CONV1, 9, shape=(CONV1, 1, K, K), dtype=dtype),
        "deconv2.b": np.zeros(1, dtype=dtype),
    }


def _check(p, x):
    H, W = x.shape[-2:]
    if CONV2 * _out(_out(H)) * _out(_out(W)) != p["enc.W"].shape[1]:
        raise ShapeError(f"image {H}x{W} does not match this autoencoder's dense layer")


def encode(p: dict, x: np.ndarray):
    """(N, H, W) single-channel images in [0, 1] -> (N, 10) bottleneck."""
    x = x[:, None]
    _check(p, x)
    a1, c1 = conv(x, p["conv1.W"], p["conv1.b"])
    h1 = np.tanh(a1)
    a2, c2 = conv(h1, p["conv2.W"], p["conv2.b"])
    h2 = np.tanh(a2)
    z = h2.reshape(len(x), -1) @ p["enc.W"].T + p["enc.b"]
    return z, (x, c1, h1, c2, h2)


def cae_forward(p: dict, img: np.ndarray):
    """Bottleneck and reconstruction for one channel image (H, W) or a stack (N, H, W)."""
    single = img.ndim == 2
    x = img[None] if single else img
    z, rec, _ = _forward(p, x)
    return (z[0], rec[0]) if single else (z, rec)


def _forward(p, x):
    z, enc_cache = encode(p, x)
    _, _, h1, _, h2 = enc_cache
    d = np.tanh(z @ p["dec.W"].T + p["dec.b"]).reshape(h2.shape)
    g1 = np.tanh(deconv(d, p["deconv1.W"], p["deconv1.b"], h1.shape[2:]))
    rec = sigmoid(deconv(g1, p["deconv2.W"], p["deconv2.b"], x.shape[1:]))[:, 0]
    return z, rec, (enc_cache, d, g1)


def recon_loss_and_grads(p: dict, x: np.ndarray, grad: bool = True):
    """Mean squared reconstruction error over all pixels, and its gradient."""
    z, rec, ((xx, c1, h1, c2, h2), d, g1) = _forward(p, x)
    diff = rec - x
    loss = float(np.mean(diff * diff))
    if not grad:
        return loss, None
    g = {}
    da = (2.0 / diff.size) * diff * rec * (1.0 - rec)
    dg1, g["deconv2.W"], g["deconv2.b"] = deconv_backward(da[:, None], g1, p["deconv2.W"])
    dg1 = dg1 * (1.0 - g1 * g1)
    dd, g["deconv1.W"], g["deconv1.b"] = deconv_backward(dg1, d, p["deconv1.W"])
    dd = (dd * (1.0 - d * d)).reshape(len(x), -1)
    g["dec.W"] = dd.T @ z
    g["dec.b"] = dd.sum(axis=0)
    dz = dd @ p["dec.W"]
    g["enc.W"] = dz.T @ h2.reshape(len(x), -1)
    g["enc.b"] = dz.sum(axis=0)
    dh2 = (dz @ p["enc.W"]).reshape(h2.shape) * (1.0 - h2 * h2)
    dh1, g["conv2.W"], g["conv2.b"] = conv_backward(dh2, c2, h1.shape, p["conv2.W"])
    dh1 = dh1 * (1.0 - h1 * h1)
    _, g["conv1.W"], g["conv1.b"] = conv_backward(dh1, c1, xx.shape, p["conv1.W"])
    return loss, g


def subsample(frames: np.ndarray, stride: int = 5) -> np.ndarray:
    return frames[::stride]


def cae_train(
    frames: np.ndarray,
    channel: int,
    epochs: int = 20,
    lr: float = 1e-3,
    seed: int = 0,
    batch: int = 32,
    params: dict | None = None,
    log=None,
) -> dict[str, np.ndarray]:
    """Fit one channel's autoencoder to (N, H, W, 3) uint8 or [0, 1] frames.

    The caller picks the frame subsample; training is deterministic per seed.
    """
    x = np.asarray(frames)
    x = x[..., channel].astype(np.float64)
    if frames.dtype == np.uint8:
        x /= 255.0
    if len(x) == 0:
        raise ValueError("need at least one frame")
    rng = RngStream(seed)
    p = params if params is not None else init_cae(x.shape[1:], rng)
    state = AdamState(p)
    for ep in range(epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for s in range(0, len(x), batch):
            idx = order[s : s + batch]
            loss, g = recon_loss_and_grads(p, x[idx])
            adam_step(p, g, state, lr=lr)
            total += loss * len(idx)
        if log is not None:
            log(ep, total / len(x))
    z = np.concatenate([encode(p, x[s : s + 256])[0] for s in range(0, len(x), 256)])
    p["feat.mean"] = z.mean(axis=0)
    p["feat.std"] = np.maximum(z.std(axis=0), 1e-6)
    return p


def reconstruction_mse(p: dict, frames: np.ndarray, channel: int, batch: int = 64) -> float:
    x = frames[..., channel].astype(np.float64)
    if frames.dtype == np.uint8:
        x /= 255.0
    total = 0.0
    for s in range(0, len(x), batch):
        loss, _ = recon_loss_and_grads(p, x[s : s + batch], grad=False)
        total += loss * len(x[s : s + batch])
    return total / len(x)


def standardized(p: dict, x: np.ndarray) -> np.ndarray:
    """Bottleneck codes scaled by the statistics of the training frames."""
    z = encode(p, x)[0]
    if "feat.mean" in p:
        z = (z - p["feat.mean"]) / p["feat.std"]
    return z


def extract_features(cae: list[dict], frames: np.ndarray, batch: int = 128) -> np.ndarray:
    """(N, H, W, 3) frames -> (N, 30) standardized bottleneck features,
    channel blocks ordered R|G|B."""
    single = frames.ndim == 3
    f = frames[None] if single else frames
    x = f.astype(np.float64)
    if f.dtype == np.uint8:
        x /= 255.0
    out = []
    for s in range(0, len(x), batch):
        out.append(np.concatenate([standardized(cae[c], x[s : s + batch, :, :, c]) for c in range(3)], axis=1))
    feats = np.concatenate(out)
    return feats[0] if single else feats
