"""End-to-end assembly of the two classification pipelines.

The direct pipeline feeds standardized raw signals [B, 1, L] to the
1-D inception network; the wavelet pipeline first renders each signal's
Morlet scalogram into a viridis RGB image and feeds [B, 3, S, L] to the
small residual network. Everything downstream (split, batching,
standardization, optimizer, evaluation) is shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SignalDataset, SplitIndices, split
from .inception import InceptionConfig, build_inception_time
from .resnet import ResNet2DConfig, build_small_resnet
from .training import TrainConfig, TrainResult, train
from .wavelet import WaveletConfig, cwt_batch, default_scales, scalograms_to_images

__all__ = ["wavelet_images", "build_model", "PipelineResult", "run_training"]


def wavelet_images(signals: np.ndarray, wcfg: WaveletConfig = WaveletConfig(),
                   colormap: str = "viridis") -> np.ndarray:
    """Signals [N, L] -> rendered scalogram images [N, 3, S, L] in [0, 1]."""
    signals = np.asarray(signals, dtype=np.float64)
    scales = default_scales(signals.shape[1], wcfg)
    mags = cwt_batch(signals, scales, wcfg)
    return scalograms_to_images(mags, colormap)


def build_model(approach: str, length: int, seed: int = 0,
                dtype=np.float32, n_classes: int = 8):
    """Fresh network for an approach and signal length."""
    if approach == "direct":
        cfg = InceptionConfig(input_length=length, n_classes=n_classes)
        return build_inception_time(cfg, seed=seed, dtype=dtype)
    if approach == "wavelet":
        cfg = ResNet2DConfig(input_size=(length, length), n_classes=n_classes)
        return build_small_resnet(cfg, seed=seed, dtype=dtype)
    raise ValueError(f"unknown approach {approach!r}")


@dataclass
class PipelineResult:
    train: TrainResult
    split: SplitIndices
    inputs: np.ndarray     # what the network consumed (signals or images)


def run_training(ds: SignalDataset, cfg: TrainConfig, valid_frac: float = 0.2,
                 wcfg: WaveletConfig = WaveletConfig(), log=None) -> PipelineResult:
    """Split, transform (for the wavelet approach), build, and train.

    The run seed drives the split, the weight init, and every epoch's
    batch order, so one (config, platform) pair fixes the whole run.
    """
    cfg.validate()
    split_idx = split(ds, valid_frac, cfg.seed)
    if cfg.approach == "wavelet":
        if log is not None:
            log("rendering scalogram images")
        inputs = wavelet_images(ds.signals, wcfg)
    else:
        inputs = ds.signals
    model = build_model(cfg.approach, ds.length, seed=cfg.seed, dtype=cfg.dtype)
    result = train(model, inputs, ds.labels, split_idx, cfg, log=log)
    return PipelineResult(train=result, split=split_idx, inputs=inputs)
