"""Compact residual 2D classifier for scalogram heatmap images.

Three stages of two basic blocks each (two 3x3 convs + batch norm per
block) over widths 16/32/64. The first stage keeps the input resolution;
each later stage opens with a stride-2 block, so 94x94 inputs shrink to
47x47 and then 24x24 before the global average pool and the 64->8 head.
Stage-boundary shortcuts are 1x1 stride-2 convolutions with batch norm;
all other shortcuts are identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .nn import BatchNorm, Conv2d, Layer, Linear, Model, ParamGroup
from .tensor import GradTape, Tensor

__all__ = ["ResNet2DConfig", "BasicBlock", "SmallResNet", "build_small_resnet"]


@dataclass(frozen=True)
class ResNet2DConfig:
    in_channels: int = 3
    n_classes: int = 8
    stage_widths: tuple[int, ...] = (16, 32, 64)
    blocks_per_stage: int = 2
    input_size: tuple[int, int] = (94, 94)

    def validate(self) -> None:
        if self.in_channels < 1:
            raise ConfigError("ResNet2DConfig.in_channels must be >= 1")
        if self.n_classes < 1:
            raise ConfigError("ResNet2DConfig.n_classes must be >= 1")
        if self.blocks_per_stage < 1:
            raise ConfigError("ResNet2DConfig.blocks_per_stage must be >= 1")
        if not self.stage_widths or any(w < 1 for w in self.stage_widths):
            raise ConfigError(
                f"ResNet2DConfig.stage_widths must be positive, got "
                f"{self.stage_widths}")
        if len(self.input_size) != 2 or any(s < 4 for s in self.input_size):
            raise ConfigError(
                f"ResNet2DConfig.input_size must be two extents >= 4, got "
                f"{self.input_size}")


class BasicBlock(Layer):
    def __init__(self, in_channels: int, out_channels: int, stride: int,
                 *, rng: np.random.Generator, dtype=np.float32):
        self.conv1 = Conv2d(in_channels, out_channels, 3, stride, rng=rng,
                            dtype=dtype)
        self.bn1 = BatchNorm(out_channels, dtype=dtype)
        self.conv2 = Conv2d(out_channels, out_channels, 3, 1, rng=rng,
                            dtype=dtype)
        self.bn2 = BatchNorm(out_channels, dtype=dtype)
        if stride != 1 or in_channels != out_channels:
            self.short_conv = Conv2d(in_channels, out_channels, 1, stride,
                                     rng=rng, dtype=dtype)
            self.short_bn = BatchNorm(out_channels, dtype=dtype)
        else:
            self.short_conv = None
            self.short_bn = None

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        out = self.conv1.forward(x, tape)
        out = self.bn1.forward(out, mode, tape)
        out = ops.relu(out, tape=tape)
        out = self.conv2.forward(out, tape)
        out = self.bn2.forward(out, mode, tape)
        if self.short_conv is not None:
            sc = self.short_bn.forward(self.short_conv.forward(x, tape),
                                       mode, tape)
        else:
            sc = x
        out = ops.add(out, sc, tape=tape)
        return ops.relu(out, tape=tape)


class SmallResNet(Model):
    def __init__(self, cfg: ResNet2DConfig, seed: int = 0, dtype=np.float32):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.Generator(np.random.PCG64(seed))

        first = cfg.stage_widths[0]
        self.stem_conv = Conv2d(cfg.in_channels, first, 3, 1, rng=rng,
                                dtype=dtype)
        self.stem_bn = BatchNorm(first, dtype=dtype)
        self.stages: list[list[BasicBlock]] = []
        in_ch = first
        for si, width in enumerate(cfg.stage_widths):
            blocks = []
            for b in range(cfg.blocks_per_stage):
                stride = 2 if (si > 0 and b == 0) else 1
                blocks.append(BasicBlock(in_ch, width, stride, rng=rng,
                                         dtype=dtype))
                in_ch = width
            self.stages.append(blocks)
        self.head = Linear(cfg.stage_widths[-1], cfg.n_classes, bias=True,
                           rng=rng, dtype=dtype)

    def _children(self):
        yield "stem_conv", self.stem_conv
        yield "stem_bn", self.stem_bn
        for si, blocks in enumerate(self.stages):
            for bi, block in enumerate(blocks):
                yield f"stages.{si}.{bi}", block
        yield "head", self.head

    def forward(self, x: Tensor, mode: str = "train",
                tape: Optional[GradTape] = None) -> Tensor:
        cfg = self.cfg
        if x.data.ndim != 4 or x.data.shape[1] != cfg.in_channels:
            raise ShapeError(
                f"expected input [B,{cfg.in_channels},{cfg.input_size[0]},"
                f"{cfg.input_size[1]}], got {x.data.shape}")
        if tuple(x.data.shape[2:]) != tuple(cfg.input_size):
            raise ShapeError(
                f"image size mismatch: model was built for {cfg.input_size}, "
                f"got {tuple(x.data.shape[2:])}")
        out = ops.relu(self.stem_bn.forward(self.stem_conv.forward(x, tape),
                                            mode, tape), tape=tape)
        for blocks in self.stages:
            for block in blocks:
                out = block.forward(out, mode, tape)
        feats = ops.global_avg_pool(out, tape=tape)
        return self.head.forward(feats, tape)

    def parameter_groups(self) -> list[ParamGroup]:
        groups = [ParamGroup("stem",
                             list(self.stem_conv.named_parameters("stem_conv."))
                             + list(self.stem_bn.named_parameters("stem_bn.")))]
        for si, blocks in enumerate(self.stages):
            named = []
            for bi, block in enumerate(blocks):
                named += list(block.named_parameters(f"stages.{si}.{bi}."))
            groups.append(ParamGroup(f"stage{si}", named))
        groups.append(ParamGroup("head", list(self.head.named_parameters("head."))))
        return groups


def build_small_resnet(cfg: ResNet2DConfig = ResNet2DConfig(),
                       seed: int = 0, dtype=np.float32) -> SmallResNet:
    """Build the residual image classifier; raises ConfigError on bad fields."""
    return SmallResNet(cfg, seed=seed, dtype=dtype)
