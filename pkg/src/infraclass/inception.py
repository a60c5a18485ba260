"""Multi-scale 1D convolutional classifier for fixed-length signals.

The network stacks `depth` inception-style modules. Each module runs three
parallel same-padded convolutions (kernel sizes 39/19/9 by default, odd so
padding is exactly symmetric) next to a max-pool branch, concatenates the
four branches into a 128-wide feature map, then batch-normalizes and
applies ReLU. Every third module is joined to the stack input through a
1x1-conv + batch-norm shortcut. A global average pool and a small linear
head map the 128 features to the 8 class logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .nn import BatchNorm, Conv1d, Layer, Linear, Model, ParamGroup
from .tensor import GradTape, Tensor

__all__ = ["InceptionConfig", "InceptionModule", "InceptionTimeNet",
           "build_inception_time"]


@dataclass(frozen=True)
class InceptionConfig:
    in_channels: int = 1
    n_classes: int = 8
    depth: int = 6
    nf: int = 32
    bottleneck_channels: int = 32
    kernel_sizes: tuple[int, ...] = (39, 19, 9)
    residual_every: int = 3
    input_length: int = 94

    def validate(self) -> None:
        for name in ("in_channels", "n_classes", "depth", "nf",
                     "bottleneck_channels", "residual_every", "input_length"):
            if getattr(self, name) < 1:
                raise ConfigError(f"InceptionConfig.{name} must be >= 1")
        ks = tuple(self.kernel_sizes)
        if not ks:
            raise ConfigError("InceptionConfig.kernel_sizes must be non-empty")
        if any(k % 2 == 0 for k in ks):
            raise ConfigError(
                f"InceptionConfig.kernel_sizes must all be odd, got {ks}")
        if any(a <= b for a, b in zip(ks, ks[1:])):
            raise ConfigError(
                f"InceptionConfig.kernel_sizes must be strictly decreasing, got {ks}")

    @property
    def feature_width(self) -> int:
        """Channels after branch concatenation: (branches + pool) * nf."""
        return (len(self.kernel_sizes) + 1) * self.nf


class InceptionModule(Layer):
    """One inception block: bottleneck, parallel convs, pool branch, BN, ReLU.

    The bottleneck is skipped when the input has a single channel; a 1x1
    convolution from one channel could only rescale it.
    """

    def __init__(self, in_channels: int, cfg: InceptionConfig,
                 *, rng: np.random.Generator, dtype=np.float32):
        width = cfg.feature_width
        self.bottleneck = (
            Conv1d(in_channels, cfg.bottleneck_channels, 1, rng=rng, dtype=dtype)
            if in_channels > 1 else None)
        conv_in = cfg.bottleneck_channels if self.bottleneck else in_channels
        self.branches = [Conv1d(conv_in, cfg.nf, k, rng=rng, dtype=dtype)
                         for k in cfg.kernel_sizes]
        self.pool_conv = Conv1d(in_channels, cfg.nf, 1, rng=rng, dtype=dtype)
        self.bn = BatchNorm(width, dtype=dtype)

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        base = self.bottleneck.forward(x, tape) if self.bottleneck else x
        parts = [conv.forward(base, tape) for conv in self.branches]
        pooled = ops.max_pool1d(x, 3, tape=tape)
        parts.append(self.pool_conv.forward(pooled, tape))
        out = ops.concat(parts, axis=1, tape=tape)
        out = self.bn.forward(out, mode, tape)
        return ops.relu(out, tape=tape)


class _Shortcut(Layer):
    """Residual path: 1x1 conv to the block width, then batch norm."""

    def __init__(self, in_channels: int, out_channels: int,
                 *, rng: np.random.Generator, dtype=np.float32):
        self.conv = Conv1d(in_channels, out_channels, 1, rng=rng, dtype=dtype)
        self.bn = BatchNorm(out_channels, dtype=dtype)

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        return self.bn.forward(self.conv.forward(x, tape), mode, tape)


class InceptionTimeNet(Model):
    def __init__(self, cfg: InceptionConfig, seed: int = 0, dtype=np.float32):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.Generator(np.random.PCG64(seed))
        width = cfg.feature_width

        self.blocks: list[InceptionModule] = []
        self.shortcuts: list[_Shortcut] = []
        in_ch = cfg.in_channels
        res_ch = cfg.in_channels
        for d in range(cfg.depth):
            self.blocks.append(InceptionModule(in_ch, cfg, rng=rng, dtype=dtype))
            in_ch = width
            if (d + 1) % cfg.residual_every == 0:
                self.shortcuts.append(
                    _Shortcut(res_ch, width, rng=rng, dtype=dtype))
                res_ch = width
        self.head = Linear(width, cfg.n_classes, bias=True, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        cfg = self.cfg
        if x.data.ndim != 3 or x.data.shape[1] != cfg.in_channels:
            raise ShapeError(
                f"expected input [B,{cfg.in_channels},{cfg.input_length}], "
                f"got {x.data.shape}")
        if x.data.shape[2] != cfg.input_length:
            raise ShapeError(
                f"signal length mismatch: model was built for "
                f"{cfg.input_length}, got {x.data.shape[2]}")
        res = x
        s = 0
        for d, block in enumerate(self.blocks):
            x = block.forward(x, mode, tape)
            if (d + 1) % cfg.residual_every == 0:
                x = ops.add(x, self.shortcuts[s].forward(res, mode, tape),
                            tape=tape)
                x = ops.relu(x, tape=tape)
                res = x
                s += 1
        feats = ops.global_avg_pool(x, tape=tape)
        return self.head.forward(feats, tape)

    def parameter_groups(self) -> list[ParamGroup]:
        """One group per inception block (its shortcut included), plus the head."""
        groups = []
        s = 0
        for d, block in enumerate(self.blocks):
            named = list(block.named_parameters(f"blocks.{d}."))
            if (d + 1) % self.cfg.residual_every == 0:
                named += list(
                    self.shortcuts[s].named_parameters(f"shortcuts.{s}."))
                s += 1
            groups.append(ParamGroup(f"block{d}", named))
        groups.append(ParamGroup("head", list(self.head.named_parameters("head."))))
        return groups


def build_inception_time(cfg: InceptionConfig = InceptionConfig(),
                         seed: int = 0, dtype=np.float32) -> InceptionTimeNet:
    """Build the 1D classifier; raises ConfigError naming any bad field."""
    return InceptionTimeNet(cfg, seed=seed, dtype=dtype)
