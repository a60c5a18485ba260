"""The 256-entry viridis lookup table and interpolated color mapping.

The table is the standard public-domain viridis palette (by van der Walt
and Smith), quantized to 8-bit RGB. Entry 0 is (68, 1, 84) and entry 255
is (253, 231, 37); the test suite cross-checks every entry against the
matplotlib reference when matplotlib is importable.
"""

from __future__ import annotations

import base64

import numpy as np

from .errors import ConfigError

__all__ = ["VIRIDIS", "apply_colormap"]

_VIRIDIS_B64 = (
    "RAFURAJWRQRXRQVZRgdaRghcRgpdRgteRw1gRw5hRxBjRxFkRxNlSBRnSBZoSBdpSBhqSBpsSBtt"
    "SBxuSB1vSB9wSCBxSCFzSCN0SCR1SCV2SCZ3SCh4SCl5Ryp6Ryx6Ry17Ry58Ry99RjB+RjJ+RjN/"
    "RjSARTWBRTeBRTiCRDmDRDqDRDuEQz2EQz6FQj+FQkCGQkGGQUKHQUSHQEWIQEaIP0eIP0iJPkmJ"
    "PkqJPkyKPU2KPU6KPE+KPFCLO1GLO1KLOlOLOlSMOVWMOVaMOFiMOFmMN1qMN1uNNlyNNl2NNV6N"
    "NV+NNGCNNGGNM2KNM2ONMmSOMmWOMWaOMWeOMWiOMGmOMGqOL2uOL2yOLm2OLm6OLm+OLXCOLXGO"
    "LHGOLHKOLHOOK3SOK3WOKnaOKneOKniOKXmOKXqOKXuOKHyOKH2OJ36OJ3+OJ4COJoGOJoKOJoKO"
    "JYOOJYSOJYWOJIaOJIeOI4iOI4mOI4qNIouNIoyNIo2NIY6NIY+NIZCNIZGMIJKMIJKMIJOMH5SM"
    "H5WLH5aLH5eLH5iLH5mKH5qKHpuKHpyJHp2JH56JH5+IH6CIH6GIH6GHH6KHIKOGIKSGIaWFIaaF"
    "IqeFIqiEI6mDJKqDJauCJayCJq2BJ62BKK6AKa9/KrB/LLF+LbJ9LrN8L7R8MbV7MrZ6NLZ5Nbd5"
    "N7h4OLl3Orp2O7t1Pbx0P7xzQL1yQr5xRL9wRsBvSMFuSsFtTMJsTsNrUMRqUsVpVMVoVsZnWMdl"
    "WshkXMhjXsliYMpgY8tfZcteZ8xcac1bbM1abs5YcM9Xc9BWddBUd9FTetFRfNJQf9NOgdNNhNRL"
    "htVJidVIi9ZGjtZFkNdDk9dBldhAmNg+m9k8ndk7oNo5oto3pds2qNs0qtwyrdwwsN0vst0ttd4r"
    "uN4put4ovd8mwN8lwt8jxeAhyOAgyuEfzeEd0OEc0uIb1eIa2OIZ2uMZ3eMY3+MY4uQY5eQZ5+QZ"
    "6uUa7OUb7+Uc8eUd9OYe9uYg+OYh++cj/ecl"
)

VIRIDIS: np.ndarray = np.frombuffer(
    base64.b64decode(_VIRIDIS_B64), dtype=np.uint8).reshape(256, 3)
VIRIDIS.setflags(write=False)

_LUTS = {"viridis": VIRIDIS}


def apply_colormap(values: np.ndarray, colormap: str = "viridis") -> np.ndarray:
    """Map values in [0, 1] through a 256-entry lookup table.

    Values land between table entries; the color is the linear interpolation
    of the two neighbours, rounded to 8-bit. Monotone by construction:
    larger values never map to an earlier table position.
    """
    try:
        lut = _LUTS[colormap]
    except KeyError:
        raise ConfigError(
            f"unknown colormap {colormap!r}; available: {sorted(_LUTS)}")
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pos = v * 255.0
    i0 = np.minimum(pos.astype(np.int64), 254)
    frac = (pos - i0)[..., None]
    rgb = lut[i0] * (1.0 - frac) + lut[i0 + 1] * frac
    return np.round(rgb).astype(np.uint8)
