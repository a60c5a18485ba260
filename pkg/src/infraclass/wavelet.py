"""Continuous wavelet transform with a Morlet mother wavelet.

The mother wavelet is psi(t) = pi^(-1/4) * exp(i*w0*t) * exp(-t^2/2) with
center frequency w0 (default 6, where the admissibility correction term is
negligible). A scale s concentrates on f = w0 / (2*pi*s) cycles per sample.

Transform values are computed by direct summation,

    W(s, tau) = s^(-1/2) * sum_t x[t] * conj(psi((t - tau) / s)),

with the wavelet truncated where |(t - tau) / s| >= 8 (envelope below
exp(-32)). At the signal lengths this package targets that is faster to
verify and plenty fast to run; no FFT shortcut is taken.

Scale grids are geometric, which gives constant-Q coverage: the default
grid has one scale per sample, spanning frequencies from just inside
Nyquist (0.5 * 0.95 cycles/sample) down to one cycle per signal length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .colormap import apply_colormap
from .errors import ConfigError, DataError

__all__ = ["WaveletConfig", "Scalogram", "morlet", "default_scales", "cwt",
           "cwt_batch", "render_heatmap", "scalograms_to_images",
           "write_heatmap_png", "export_heatmaps"]

_TRUNCATION = 8.0          # wavelet support in units of scale
_NYQUIST_MARGIN = 0.95     # top frequency = 0.5 * margin cycles/sample


@dataclass(frozen=True)
class WaveletConfig:
    omega0: float = 6.0
    n_scales: Optional[int] = None      # None: one scale per sample
    scale_min: Optional[float] = None   # None: from the Nyquist-adjacent freq
    scale_max: Optional[float] = None   # None: from freq = 1/L

    def validate(self) -> None:
        if self.omega0 < 5.0:
            raise ConfigError(
                f"omega0 must be >= 5 (got {self.omega0}); below that the "
                f"zero-mean correction of the Morlet wavelet is not negligible")
        if self.n_scales is not None and self.n_scales < 1:
            raise ConfigError(f"n_scales must be >= 1, got {self.n_scales}")
        if (self.scale_min, self.scale_max) != (None, None):
            lo = self.scale_min if self.scale_min is not None else 0.0
            hi = self.scale_max if self.scale_max is not None else math.inf
            if not 0.0 < lo < hi:
                raise ConfigError(
                    f"scales must satisfy 0 < scale_min < scale_max, got "
                    f"({self.scale_min}, {self.scale_max})")


@dataclass
class Scalogram:
    """Magnitude of a CWT plus its scale and frequency axes.

    Rows follow ``scales`` (ascending), so frequencies are strictly
    descending down the rows.
    """

    magnitude: np.ndarray     # [S, L], non-negative
    scales: np.ndarray        # [S], ascending, in samples
    frequencies: np.ndarray   # [S], cycles/sample, = omega0 / (2*pi*scales)


def morlet(t, omega0: float = 6.0):
    """Morlet wavelet value(s) at time t: pi^(-1/4) e^(i w0 t) e^(-t^2/2)."""
    t = np.asarray(t, dtype=np.float64)
    out = np.pi ** -0.25 * np.exp(1j * omega0 * t - t * t / 2.0)
    return out if out.shape else complex(out)


def default_scales(length: int, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Geometric scale grid covering the full usable frequency band.

    Returns ``cfg.n_scales`` scales (default: one per sample) whose
    frequencies run from 0.5 * 0.95 cycles/sample down to 1/length.
    """
    cfg.validate()
    if length < 2:
        raise ConfigError(f"signal length must be >= 2, got {length}")
    n = cfg.n_scales if cfg.n_scales is not None else length
    two_pi = 2.0 * math.pi
    lo = cfg.scale_min if cfg.scale_min is not None else \
        cfg.omega0 / (two_pi * (0.5 * _NYQUIST_MARGIN))
    hi = cfg.scale_max if cfg.scale_max is not None else \
        cfg.omega0 * length / two_pi
    if n == 1:
        return np.array([lo])
    return lo * (hi / lo) ** (np.arange(n) / (n - 1))


def _wavelet_kernel(scale: float, omega0: float, length: int
                    ) -> tuple[np.ndarray, int]:
    """conj(psi(d/s))/sqrt(s) sampled at integer offsets d in [-D, D]."""
    d_max = min(int(math.ceil(_TRUNCATION * scale)) - 1, length - 1)
    d = np.arange(-d_max, d_max + 1, dtype=np.float64)
    u = d / scale
    kern = np.conj(morlet(u, omega0)) / math.sqrt(scale)
    return kern, d_max


def cwt_batch(signals: np.ndarray, scales: np.ndarray,
              cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Magnitude scalograms for a stack of signals: [N, L] -> [N, S, L]."""
    cfg.validate()
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2 or signals.shape[1] < 2:
        raise DataError(f"expected signals [N, L>=2], got {signals.shape}")
    if not np.isfinite(signals).all():
        raise DataError("signals contain non-finite samples")
    scales = np.asarray(scales, dtype=np.float64)
    if scales.ndim != 1 or scales.size < 1 or (scales <= 0).any():
        raise ConfigError(f"scales must be positive and 1-D, got {scales.shape}")

    n, length = signals.shape
    out = np.empty((n, scales.size, length))
    for si, s in enumerate(scales):
        kern, d_max = _wavelet_kernel(float(s), cfg.omega0, length)
        padded = np.pad(signals, ((0, 0), (d_max, d_max)))
        win = sliding_window_view(padded, 2 * d_max + 1, axis=1)  # [N, L, 2D+1]
        # W[n, tau] = sum_d x[tau + d] * kern[d]; hypot collapses the phase
        out[:, si, :] = np.hypot(win @ kern.real, win @ kern.imag)
    return out


def cwt(signal: np.ndarray, scales: np.ndarray,
        cfg: WaveletConfig = WaveletConfig()) -> Scalogram:
    """Transform one real signal into a magnitude scalogram."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise DataError(f"expected a 1-D signal, got shape {signal.shape}")
    mag = cwt_batch(signal[None, :], scales, cfg)[0]
    scales = np.asarray(scales, dtype=np.float64)
    freqs = cfg.omega0 / (2.0 * math.pi * scales)
    return Scalogram(magnitude=mag, scales=scales, frequencies=freqs)


def render_heatmap(sc: Scalogram, colormap: str = "viridis") -> np.ndarray:
    """Render a scalogram as an 8-bit RGB array, [S, L, 3].

    The magnitude is min-max normalized per image and mapped through the
    interpolated 256-entry lookup table; a constant scalogram maps entirely
    to the colormap's zero entry. Row 0 of the result is the largest scale
    (lowest frequency); file writers put that row at the image bottom.
    """
    mag = np.asarray(sc.magnitude, dtype=np.float64)
    if not np.isfinite(mag).all():
        raise DataError("scalogram magnitude contains non-finite values")
    lo = mag.min()
    span = mag.max() - lo
    norm = np.zeros_like(mag) if span <= 0.0 else (mag - lo) / span
    return apply_colormap(norm[::-1], colormap)


def write_heatmap_png(sc: Scalogram, path, colormap: str = "viridis") -> None:
    """Write a rendered scalogram to an 8-bit RGB PNG.

    The file is flipped vertically relative to :func:`render_heatmap` so
    the largest scale (lowest frequency) sits at the image bottom.
    """
    from PIL import Image

    rgb = render_heatmap(sc, colormap)
    Image.fromarray(rgb[::-1]).save(path, format="PNG")


def export_heatmaps(signals: np.ndarray, labels: np.ndarray, out_dir,
                    dataset_name: str, cfg: WaveletConfig = WaveletConfig(),
                    colormap: str = "viridis") -> list:
    """Write one heatmap PNG per signal, named <dataset>_<index>_<label>.png.

    Returns the written paths in index order.
    """
    import os

    signals = np.asarray(signals, dtype=np.float64)
    scales = default_scales(signals.shape[1], cfg)
    mags = cwt_batch(signals, scales, cfg)
    freqs = cfg.omega0 / (2.0 * math.pi * scales)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in range(signals.shape[0]):
        sc = Scalogram(mags[i], scales=scales, frequencies=freqs)
        path = os.path.join(out_dir, f"{dataset_name}_{i}_{int(labels[i])}.png")
        write_heatmap_png(sc, path, colormap)
        paths.append(path)
    return paths


def scalograms_to_images(magnitudes: np.ndarray,
                         colormap: str = "viridis") -> np.ndarray:
    """Batch of scalogram magnitudes [N,S,L] -> float32 images [N,3,S,L].

    Each image is rendered exactly like :func:`render_heatmap` (per-image
    min-max normalization, interpolated lookup) and scaled to [0, 1] for
    network input.
    """
    n = magnitudes.shape[0]
    out = np.empty((n, 3) + magnitudes.shape[1:], dtype=np.float32)
    for i in range(n):
        sc = Scalogram(magnitudes[i], scales=np.empty(0), frequencies=np.empty(0))
        rgb = render_heatmap(sc, colormap)
        out[i] = rgb.transpose(2, 0, 1).astype(np.float32) / 255.0
    return out
