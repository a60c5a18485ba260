"""Forward and backward implementations of every layer operation.

All convolutions use cross-correlation semantics (no kernel flip) with
symmetric zero padding, so odd kernel sizes keep the output grid aligned
with the input grid. Heavy lifting is an im2col reshape followed by one
matrix product; backward passes rebuild the column matrix instead of
caching it, which keeps peak memory low at the cost of one cheap reshape.

Ops take an optional ``tape``; when given and any input participates in
differentiation, the op records a closure that maps the output gradient to
input gradients.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import DataError, ShapeError
from .tensor import GradTape, Tensor

__all__ = [
    "add", "batch_norm", "concat", "conv1d", "conv2d", "global_avg_pool",
    "linear", "max_pool1d", "mul", "relu", "scale", "softmax_cross_entropy",
    "sum_all",
]


def _same_pad(k: int) -> int:
    if k % 2 != 1:
        raise ShapeError(f"same padding requires an odd kernel size, got {k}")
    return (k - 1) // 2


# ---------------------------------------------------------------------------
# convolutions


def _conv1d_cols(x: np.ndarray, k: int) -> np.ndarray:
    """im2col for [B,C,L] with same padding: returns [C*k, B*L].

    Channel-major layout so the matching weight matrix is
    weight.reshape(F, C*k). The input is transposed to [C,B,L] once so
    each per-offset copy walks both arrays in memory order.
    """
    b, c, length = x.shape
    pad = _same_pad(k)
    xp = np.zeros((c, b, length + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + length] = x.transpose(1, 0, 2)
    cols = np.empty((c, k, b, length), dtype=x.dtype)
    for j in range(k):
        cols[:, j] = xp[:, :, j:j + length]
    return cols.reshape(c * k, b * length)


def conv1d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           *, tape: Optional[GradTape] = None) -> Tensor:
    """Same-padded 1D cross-correlation: [B,C,L] x [F,C,K] -> [B,F,L]."""
    if x.data.ndim != 3 or weight.data.ndim != 3:
        raise ShapeError(
            f"conv1d expects input [B,C,L] and kernel [F,C,K], got "
            f"{x.data.shape} and {weight.data.shape}")
    b, c, length = x.data.shape
    f, ck, k = weight.data.shape
    if ck != c:
        raise ShapeError(
            f"conv1d channel mismatch: input {x.data.shape} has {c} channels, "
            f"kernel {weight.data.shape} expects {ck}")
    if bias is not None and bias.data.shape != (f,):
        raise ShapeError(
            f"conv1d bias shape {bias.data.shape} does not match {f} filters")

    cols = _conv1d_cols(x.data, k)
    out2 = weight.data.reshape(f, c * k) @ cols       # [F, B*L]
    if bias is not None:
        out2 += bias.data[:, None]
    result = Tensor(np.ascontiguousarray(
        out2.reshape(f, b, length).transpose(1, 0, 2)))

    if tape is not None:
        xd, wd = x.data, weight.data
        need_gx = tape.is_tracked(x)

        def grad_fn(g: np.ndarray):
            g2 = np.ascontiguousarray(
                g.transpose(1, 0, 2).reshape(f, b * length))
            gw = (_conv1d_cols(xd, k) @ g2.T).T.reshape(f, c, k)
            gx = None
            if need_gx:
                # input gradient = same-padded correlation of g with the
                # kernel flipped along K and transposed across (F, C)
                gcols = _conv1d_cols(g, k)
                wflip = wd[:, :, ::-1].transpose(1, 0, 2).reshape(c, f * k)
                gx = (wflip @ gcols).reshape(c, b, length)
                gx = np.ascontiguousarray(gx.transpose(1, 0, 2))
            gb = g.sum(axis=(0, 2)) if bias is not None else None
            return gx, np.ascontiguousarray(gw), gb

        tape.record(result, (x, weight, bias), grad_fn)
    return result


def _conv2d_stripe(h: int, w: int, kh: int, kw: int) -> tuple[int, int]:
    """Padded row width and per-image stripe length for the slab layout."""
    wp = w + 2 * _same_pad(kw)
    hp = h + 2 * _same_pad(kh)
    return wp, hp * wp + (kw - 1)


def _conv2d_slab(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Zero-embed [B,C,H,W] into the flat stripe grid: [C, B*S].

    Each image becomes one row-major stripe of S = Hp*Wp + kw - 1, so
    the padded pixel (y, x) of image b sits at flat position
    b*S + y*Wp + x and a kernel offset (i, j) is a pure shift of
    i*Wp + j. Stripe positions outside the valid output window (padding
    columns and the tail) are scratch that callers slice away.
    """
    b, c, h, w = x.shape
    ph, pw = _same_pad(kh), _same_pad(kw)
    wp, s = _conv2d_stripe(h, w, kh, kw)
    slab = np.zeros((c, b, s), dtype=x.dtype)
    core = slab[:, :, :s - (kw - 1)].reshape(c, b, h + 2 * ph, wp)
    core[:, :, ph:ph + h, pw:pw + w] = x.transpose(1, 0, 2, 3)
    return slab.reshape(c, b * s)


def _embed2d(g: np.ndarray, wp: int, s: int) -> np.ndarray:
    """Place [B,F,Ho,Wo] on the [F, B*S] stripe grid, zero on scratch."""
    b, f, h, w = g.shape
    buf = np.zeros((f, b, s), dtype=g.dtype)
    view = buf[:, :, :h * wp].reshape(f, b, h, wp)
    view[:, :, :, :w] = g.transpose(1, 0, 2, 3)
    return buf.reshape(f, b * s)


def _extract2d(out2: np.ndarray, b: int, h: int, w: int,
               wp: int, s: int, off: int = 0) -> np.ndarray:
    """Read a valid [B,F,H,W] window off the stripe grid at ``off``."""
    f = out2.shape[0]
    lead = out2.reshape(f, b, s)[:, :, off:off + h * wp]
    view = lead.reshape(f, b, h, wp)
    return np.ascontiguousarray(view[:, :, :, :w].transpose(1, 0, 2, 3))


def _conv2d_cols_strided(x: np.ndarray, kh: int, kw: int,
                         stride: int) -> np.ndarray:
    """Stride-s im2col on the dense output grid: [C*kh*kw, B*Ho*Wo]."""
    b, c, h, w = x.shape
    ph, pw = _same_pad(kh), _same_pad(kw)
    ho = -(-h // stride)
    wo = -(-w // stride)
    xp = np.zeros((c, b, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
    xp[:, :, ph:ph + h, pw:pw + w] = x.transpose(1, 0, 2, 3)
    cols = np.empty((c, kh, kw, b, ho, wo), dtype=x.dtype)
    for i in range(kh):
        rows = xp[:, :, i:i + stride * (ho - 1) + 1:stride]
        for j in range(kw):
            cols[:, i, j] = rows[:, :, :, j:j + stride * (wo - 1) + 1:stride]
    return cols.reshape(c * kh * kw, b * ho * wo)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, *, tape: Optional[GradTape] = None) -> Tensor:
    """Same-padded 2D cross-correlation with stride 1 or 2.

    [B,C,H,W] x [F,C,Kh,Kw] -> [B,F,ceil(H/s),ceil(W/s)].

    Backward avoids materializing the column matrix: the forward pass
    caches the padded slab (a [C, B*S] view of the input) and both
    weight and input gradients reduce to one small matrix product per
    kernel offset against shifted views of it.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError(
            f"conv2d expects input [B,C,H,W] and kernel [F,C,Kh,Kw], got "
            f"{x.data.shape} and {weight.data.shape}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d stride must be 1 or 2, got {stride}")
    b, c, h, w = x.data.shape
    f, ck, kh, kw = weight.data.shape
    if ck != c:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.data.shape} has {c} channels, "
            f"kernel {weight.data.shape} expects {ck}")
    if bias is not None and bias.data.shape != (f,):
        raise ShapeError(
            f"conv2d bias shape {bias.data.shape} does not match {f} filters")

    ho = -(-h // stride)
    wo = -(-w // stride)
    wp, s = _conv2d_stripe(h, w, kh, kw)
    flat = None
    if stride == 1:
        flat = _conv2d_slab(x.data, kh, kw)
        n = b * s
        wf = np.ascontiguousarray(weight.data.transpose(2, 3, 0, 1))
        out2 = np.zeros((f, n), dtype=x.data.dtype)     # [F, B*S]
        for i in range(kh):
            for j in range(kw):
                off = i * wp + j
                out2[:, :n - off] += wf[i, j] @ flat[:, off:]
        if bias is not None:
            out2 += bias.data[:, None]
        result = Tensor(_extract2d(out2, b, h, w, wp, s))
    else:
        wmat = weight.data.reshape(f, c * kh * kw)
        cols = _conv2d_cols_strided(x.data, kh, kw, stride)
        out2 = wmat @ cols                              # [F, B*Ho*Wo]
        if bias is not None:
            out2 += bias.data[:, None]
        result = Tensor(np.ascontiguousarray(
            out2.reshape(f, b, ho, wo).transpose(1, 0, 2, 3)))

    if tape is not None:
        xd, wd = x.data, weight.data
        need_gx = tape.is_tracked(x)

        def grad_fn(g: np.ndarray):
            n = b * s
            if stride == 1:
                g2 = _embed2d(g, wp, s)                 # [F, B*S]
                gw = np.empty((f, c, kh, kw), dtype=g.dtype)
                for i in range(kh):
                    for j in range(kw):
                        off = i * wp + j
                        gw[:, :, i, j] = g2[:, :n - off] @ flat[:, off:].T
            else:
                g2d = np.ascontiguousarray(
                    g.transpose(1, 0, 2, 3).reshape(f, b * ho * wo))
                cols_b = _conv2d_cols_strided(xd, kh, kw, stride)
                gw = (cols_b @ g2d.T).T.reshape(f, c, kh, kw)
                gw = np.ascontiguousarray(gw)
            gx = None
            if need_gx:
                if stride == 1:
                    gd2 = g2
                else:
                    # scatter the strided gradient onto the stride-1 grid,
                    # then onto that grid's stripe slab
                    gd = np.zeros((b, f, h, w), dtype=g.dtype)
                    gd[:, :, ::stride, ::stride] = g
                    gd2 = _embed2d(gd, wp, s)
                # input gradient: each offset scatters w[:, :, i, j]^T @ g
                # onto the padded grid shifted by that offset
                wt = np.ascontiguousarray(wd.transpose(2, 3, 1, 0))
                gxs = np.zeros((c, n), dtype=g.dtype)
                for i in range(kh):
                    for j in range(kw):
                        off = i * wp + j
                        gxs[:, off:] += wt[i, j] @ gd2[:, :n - off]
                # the valid window starts at padded coordinate (ph, pw)
                gx = _extract2d(gxs, b, h, w, wp, s,
                                off=_same_pad(kh) * wp + _same_pad(kw))
            gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
            return gx, gw, gb

        tape.record(result, (x, weight, bias), grad_fn)
    return result


# ---------------------------------------------------------------------------
# normalization


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               running_mean: np.ndarray, running_var: np.ndarray,
               eps: float = 1e-5, momentum: float = 0.1, mode: str = "train",
               *, tape: Optional[GradTape] = None) -> Tensor:
    """Per-channel batch normalization over batch and spatial axes.

    Train mode normalizes with the biased batch variance and updates the
    running statistics in place as ``r <- (1-momentum)*r + momentum*stat``.
    Eval mode uses the running statistics unchanged; before any train step
    those are the init values (mean 0, var 1), which is valid, not an error.
    """
    if mode not in ("train", "eval"):
        raise ShapeError(f"batch_norm mode must be 'train' or 'eval', got {mode!r}")
    nc = x.data.shape[1] if x.data.ndim >= 2 else 0
    if gamma.data.shape != (nc,) or beta.data.shape != (nc,):
        raise ShapeError(
            f"batch_norm parameter shapes {gamma.data.shape}/{beta.data.shape} "
            f"do not match {nc} channels of input {x.data.shape}")
    axes = (0,) + tuple(range(2, x.data.ndim))
    bshape = (1, nc) + (1,) * (x.data.ndim - 2)
    m = int(np.prod([x.data.shape[a] for a in axes]))

    if mode == "train":
        if m < 2:
            raise ShapeError(
                f"batch_norm train mode needs at least 2 values per channel, "
                f"got {m} for input {x.data.shape}")
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mean
        running_var *= (1.0 - momentum)
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var

    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.reshape(bshape)) * ivar.reshape(bshape)
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)
    result = Tensor(np.ascontiguousarray(out))

    if tape is not None:
        train = mode == "train"

        def grad_fn(g: np.ndarray):
            ggamma = (g * xhat).sum(axis=axes)
            gbeta = g.sum(axis=axes)
            giv = (gamma.data * ivar).reshape(bshape)
            if train:
                gx = giv * (g - gbeta.reshape(bshape) / m
                            - xhat * ggamma.reshape(bshape) / m)
            else:
                gx = giv * g
            return np.ascontiguousarray(gx), ggamma, gbeta

        tape.record(result, (x, gamma, beta), grad_fn)
    return result


# ---------------------------------------------------------------------------
# elementwise and pooling


def relu(x: Tensor, *, tape: Optional[GradTape] = None) -> Tensor:
    result = Tensor(np.maximum(x.data, 0))
    if tape is not None:
        mask = x.data > 0

        def grad_fn(g: np.ndarray):
            return (g * mask,)

        tape.record(result, (x,), grad_fn)
    return result


def max_pool1d(x: Tensor, k: int = 3, *, tape: Optional[GradTape] = None) -> Tensor:
    """Stride-1 windowed max over [B,C,L] with -inf same padding."""
    if x.data.ndim != 3:
        raise ShapeError(f"max_pool1d expects [B,C,L], got {x.data.shape}")
    pad = _same_pad(k)
    b, c, length = x.data.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)),
                constant_values=-np.inf)
    # elementwise max of k shifted slices beats a strided-view reduction
    out = xp[:, :, 0:length].copy()
    for j in range(1, k):
        np.maximum(out, xp[:, :, j:j + length], out=out)
    result = Tensor(out)

    if tape is not None:
        def grad_fn(g: np.ndarray):
            gxp = np.zeros((b, c, length + 2 * pad), dtype=g.dtype)
            taken = np.zeros(g.shape, dtype=bool)
            for j in range(k):   # first max wins ties, matching argmax
                hit = (xp[:, :, j:j + length] == out) & ~taken
                gxp[:, :, j:j + length] += g * hit
                taken |= hit
            return (np.ascontiguousarray(gxp[:, :, pad:pad + length]),)

        tape.record(result, (x,), grad_fn)
    return result


def global_avg_pool(x: Tensor, *, tape: Optional[GradTape] = None) -> Tensor:
    """Mean over all trailing spatial axes: [B,C,...] -> [B,C]."""
    if x.data.ndim < 3:
        raise ShapeError(f"global_avg_pool expects [B,C,spatial...], got {x.data.shape}")
    axes = tuple(range(2, x.data.ndim))
    n = int(np.prod([x.data.shape[a] for a in axes]))
    result = Tensor(np.ascontiguousarray(x.data.mean(axis=axes)))

    if tape is not None:
        shape = x.data.shape

        def grad_fn(g: np.ndarray):
            gx = np.broadcast_to(g.reshape(g.shape + (1,) * len(axes)),
                                 shape) / n
            return (np.ascontiguousarray(gx),)

        tape.record(result, (x,), grad_fn)
    return result


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           *, tape: Optional[GradTape] = None) -> Tensor:
    """Affine map [B,N] x [M,N] -> [B,M]."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ShapeError(
            f"linear expects input [B,N] and weight [M,N], got "
            f"{x.data.shape} and {weight.data.shape}")
    if x.data.shape[1] != weight.data.shape[1]:
        raise ShapeError(
            f"linear feature mismatch: input {x.data.shape} vs weight "
            f"{weight.data.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        if bias.data.shape != (weight.data.shape[0],):
            raise ShapeError(
                f"linear bias shape {bias.data.shape} does not match "
                f"{weight.data.shape[0]} outputs")
        out = out + bias.data
    result = Tensor(np.ascontiguousarray(out))

    if tape is not None:
        xd, wd = x.data, weight.data

        def grad_fn(g: np.ndarray):
            gb = g.sum(axis=0) if bias is not None else None
            return g @ wd, g.T @ xd, gb

        tape.record(result, (x, weight, bias), grad_fn)
    return result


# ---------------------------------------------------------------------------
# combining ops


def add(a: Tensor, b: Tensor, *, tape: Optional[GradTape] = None) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    result = Tensor(a.data + b.data)
    if tape is not None:
        def grad_fn(g: np.ndarray):
            return g, g

        tape.record(result, (a, b), grad_fn)
    return result


def mul(a: Tensor, b: Tensor, *, tape: Optional[GradTape] = None) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    result = Tensor(a.data * b.data)
    if tape is not None:
        ad, bd = a.data, b.data

        def grad_fn(g: np.ndarray):
            return g * bd, g * ad

        tape.record(result, (a, b), grad_fn)
    return result


def scale(x: Tensor, alpha: float, *, tape: Optional[GradTape] = None) -> Tensor:
    result = Tensor(x.data * alpha)
    if tape is not None:
        def grad_fn(g: np.ndarray):
            return (g * alpha,)

        tape.record(result, (x,), grad_fn)
    return result


def sum_all(x: Tensor, *, tape: Optional[GradTape] = None) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    result = Tensor(np.asarray(x.data.sum()))
    if tape is not None:
        shape, dtype = x.data.shape, x.data.dtype

        def grad_fn(g: np.ndarray):
            return (np.full(shape, g, dtype=dtype),)

        tape.record(result, (x,), grad_fn)
    return result


def concat(parts: Sequence[Tensor], axis: int = 1,
           *, tape: Optional[GradTape] = None) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    result = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    if tape is not None:
        sizes = [p.data.shape[axis] for p in parts]
        bounds = np.cumsum(sizes)[:-1]

        def grad_fn(g: np.ndarray):
            return tuple(np.ascontiguousarray(piece)
                         for piece in np.split(g, bounds, axis=axis))

        tape.record(result, tuple(parts), grad_fn)
    return result


# ---------------------------------------------------------------------------
# loss


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray,
                          *, tape: Optional[GradTape] = None
                          ) -> tuple[Tensor, Tensor]:
    """Mean negative log-likelihood over the batch, plus the probabilities.

    Softmax is computed max-subtracted for stability. Returns
    ``(loss, probs)`` where ``loss`` is a scalar tensor on the tape and
    ``probs`` is a detached [B,K] tensor.
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects logits [B,K], got "
                         f"{logits.data.shape}")
    labels = np.asarray(labels)
    b, k = logits.data.shape
    if labels.shape != (b,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {b}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise DataError(f"label {bad} out of range [0, {k})")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    probs = np.exp(logp)
    nll = -logp[np.arange(b), labels]
    loss = Tensor(np.asarray(nll.mean()))

    if tape is not None:
        def grad_fn(g: np.ndarray):
            gl = probs.copy()
            gl[np.arange(b), labels] -= 1.0
            gl *= float(g) / b
            return (gl,)

        tape.record(loss, (logits,), grad_fn)
    return loss, Tensor(probs)
