"""Deterministic synthetic dataset of eight waveform families.

Stands in for a non-public simulated infrasound corpus: 2400 signals of
94 samples across 8 balanced classes by default. The families loosely
evoke impulsive, tonal, chirping, and noisy atmospheric events but make
no claim of physical fidelity; they exist to be reproducible, mutually
distinguishable, and hard enough that accuracy stays informative.

Signal i belongs to class i mod 8 and is drawn from its own
PCG64(SeedSequence((seed, i))) stream, so generation order (or
parallelism) cannot change the output and any single signal can be
regenerated in isolation.

Families, on sample grid t = 0..L-1 (exact formulas, before unit-RMS
normalization, amplitude jitter a ~ U(0.7, 1.3), and additive white
noise with standard deviation noise * a):

  0 N-wave pulse         -(tau/w) * exp(-tau^2 / (2 w^2)), tau = t - c,
                          c ~ U(0.3, 0.7) L, w ~ U(1.5, 3)
  1 enveloped tone        exp(-tau^2 / (2 w^2)) * sin(2 pi f t + phi),
                          f ~ U(0.06, 0.08), w ~ U(10, 16)
  2 up-chirp              sin(2 pi (f0 t + (f1 - f0) t^2 / (2 L)) + phi),
                          f0 ~ U(0.03, 0.06), f1 ~ U(0.18, 0.30)
  3 down-chirp            family 2 with f0 ~ U(0.18, 0.30), f1 ~ U(0.03, 0.06)
  4 damped harmonic       step(t - t0) * exp(-(t - t0)/tau_d) *
                          sin(2 pi f (t - t0) + phi), t0 ~ U(0.05, 0.25) L,
                          tau_d ~ U(8, 16), f ~ U(0.12, 0.18)
  5 dual-tone beat        sin(2 pi f1 t + phi1) + sin(2 pi (f1 + d) t + phi2),
                          f1 ~ U(0.08, 0.12), d ~ U(0.02, 0.035)
  6 noise burst           white noise high-passed by a [1, -1]/sqrt(2)
                          difference kernel, windowed by
                          exp(-tau^2 / (2 w^2)), w ~ U(8, 14)
  7 AM oscillation        (1 + m sin(2 pi fm t + phi_m)) * sin(2 pi fc t + phi_c),
                          fc ~ U(0.20, 0.30), fm ~ U(0.02, 0.04), m ~ U(0.5, 0.9)

All phases phi ~ U(0, 2 pi); centers c default to U(0.3, 0.7) L. The
bands are chosen so every family is spectrally or temporally distinct;
the one deliberate near-degeneracy, up- vs down-chirp, shares a magnitude
spectrum and is separable only by temporal order, which keeps the task
honest for models that can exploit it.
"""

from __future__ import annotations

import math

import numpy as np

from .data import N_CLASSES, SignalDataset
from .errors import ConfigError

__all__ = ["generate", "prototype", "FAMILY_NAMES"]

FAMILY_NAMES = ("n_wave", "enveloped_tone", "up_chirp", "down_chirp",
                "damped_harmonic", "dual_tone_beat", "noise_burst",
                "am_oscillation")

_TWO_PI = 2.0 * math.pi


def _n_wave(t, length, rng):
    c = rng.uniform(0.3, 0.7) * length
    w = rng.uniform(1.5, 3.0)
    tau = t - c
    return -(tau / w) * np.exp(-tau * tau / (2.0 * w * w))


def _enveloped_tone(t, length, rng):
    c = rng.uniform(0.3, 0.7) * length
    w = rng.uniform(10.0, 16.0)
    f = rng.uniform(0.06, 0.08)
    phi = rng.uniform(0.0, _TWO_PI)
    tau = t - c
    return np.exp(-tau * tau / (2.0 * w * w)) * np.sin(_TWO_PI * f * t + phi)


def _chirp(t, length, rng, up: bool):
    if up:
        f0 = rng.uniform(0.03, 0.06)
        f1 = rng.uniform(0.18, 0.30)
    else:
        f0 = rng.uniform(0.18, 0.30)
        f1 = rng.uniform(0.03, 0.06)
    phi = rng.uniform(0.0, _TWO_PI)
    return np.sin(_TWO_PI * (f0 * t + (f1 - f0) * t * t / (2.0 * length)) + phi)


def _damped_harmonic(t, length, rng):
    t0 = rng.uniform(0.05, 0.25) * length
    tau_d = rng.uniform(8.0, 16.0)
    f = rng.uniform(0.12, 0.18)
    phi = rng.uniform(0.0, _TWO_PI)
    rel = t - t0
    live = rel >= 0.0
    return np.where(live, np.exp(np.where(live, -rel / tau_d, 0.0))
                    * np.sin(_TWO_PI * f * rel + phi), 0.0)


def _dual_tone_beat(t, length, rng):
    f1 = rng.uniform(0.08, 0.12)
    d = rng.uniform(0.02, 0.035)
    phi1 = rng.uniform(0.0, _TWO_PI)
    phi2 = rng.uniform(0.0, _TWO_PI)
    return np.sin(_TWO_PI * f1 * t + phi1) + np.sin(_TWO_PI * (f1 + d) * t + phi2)


_HIGHPASS = np.array([1.0, -1.0]) / math.sqrt(2.0)


def _noise_burst(t, length, rng):
    c = rng.uniform(0.3, 0.7) * length
    w = rng.uniform(8.0, 14.0)
    raw = np.convolve(rng.standard_normal(length), _HIGHPASS, mode="same")
    tau = t - c
    return raw * np.exp(-tau * tau / (2.0 * w * w))


def _am_oscillation(t, length, rng):
    fc = rng.uniform(0.20, 0.30)
    fm = rng.uniform(0.02, 0.04)
    m = rng.uniform(0.5, 0.9)
    phi_m = rng.uniform(0.0, _TWO_PI)
    phi_c = rng.uniform(0.0, _TWO_PI)
    return (1.0 + m * np.sin(_TWO_PI * fm * t + phi_m)) \
        * np.sin(_TWO_PI * fc * t + phi_c)


_FAMILIES = (
    _n_wave,
    _enveloped_tone,
    lambda t, length, rng: _chirp(t, length, rng, up=True),
    lambda t, length, rng: _chirp(t, length, rng, up=False),
    _damped_harmonic,
    _dual_tone_beat,
    _noise_burst,
    _am_oscillation,
)


class _MidpointDraws:
    """Generator stand-in for prototypes: uniform() yields the midpoint
    of its range; standard_normal() comes from a pinned stream so the
    noise-burst prototype is deterministic."""

    def __init__(self, cls: int):
        self._rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((cls, 0))))

    def uniform(self, lo: float, hi: float) -> float:
        return 0.5 * (lo + hi)

    def standard_normal(self, n: int):
        return self._rng.standard_normal(n)


def prototype(cls: int, length: int = 94) -> np.ndarray:
    """Noise-free unit-RMS representative of a class, with every jittered
    parameter held at the midpoint of its range."""
    if not 0 <= cls < N_CLASSES:
        raise ConfigError(f"class must lie in [0, {N_CLASSES}), got {cls}")
    t = np.arange(length, dtype=np.float64)
    clean = _FAMILIES[cls](t, length, _MidpointDraws(cls))
    return clean / math.sqrt(float(np.mean(clean * clean)))


def generate(n: int = 2400, length: int = 94, seed: int = 0,
             noise: float = 0.3) -> SignalDataset:
    """Generate n balanced signals of the 8 families; see module docstring.

    Each clean waveform is normalized to unit RMS, scaled by an amplitude
    jitter a ~ U(0.7, 1.3), then perturbed with white noise of standard
    deviation noise * a (i.e. relative to the signal's own RMS).
    """
    if n % N_CLASSES != 0:
        raise ConfigError(f"n must be divisible by {N_CLASSES}, got {n}")
    if length < 2:
        raise ConfigError(f"length must be >= 2, got {length}")
    if noise < 0:
        raise ConfigError(f"noise must be >= 0, got {noise}")

    t = np.arange(length, dtype=np.float64)
    signals = np.empty((n, length))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        cls = i % N_CLASSES
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, i))))
        clean = _FAMILIES[cls](t, length, rng)
        rms = math.sqrt(float(np.mean(clean * clean)))
        clean = clean / rms
        a = rng.uniform(0.7, 1.3)
        sig = a * clean
        if noise > 0:
            sig = sig + noise * a * rng.standard_normal(length)
        signals[i] = sig
        labels[i] = cls
    return SignalDataset(signals=signals, labels=labels, source="synthetic")
