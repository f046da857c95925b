"""
Synthetic data of the denoising experiments.

The clean image is the indicator of the closed disk of radius 1/5 around
(1/2, 1/2). The noise is uniform on [-1/10, 1/10] at the nodes of T_3 and
is prolongated to finer meshes, so the datum of a given seed is the same
function on every level.
"""
import numbers
from typing import NamedTuple

import numpy as np
from django.core.exceptions import ValidationError

from apps.core.validators import MAX_LEVEL, validate_level
from apps.fem.mesh import build_mesh, prolongate
from apps.fem.spaces import interpolate

NOISE_LEVEL = 3
NOISE_AMPLITUDE = 0.1
DISK_CENTER = (0.5, 0.5)
DISK_RADIUS = 0.2


class RofData(NamedTuple):
    g: np.ndarray
    g_clean: np.ndarray
    noise: np.ndarray


def disk_indicator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    cx, cy = DISK_CENTER
    return ((x - cx) ** 2 + (y - cy) ** 2 <= DISK_RADIUS ** 2).astype(float)


def uniform_noise(size: int, seed: int, amplitude: float = NOISE_AMPLITUDE) -> np.ndarray:
    """
    i.i.d. uniform samples on [-amplitude, amplitude].

    The stream is Philox4x64-10 keyed by the seed with the counter starting at
    zero; every raw 64-bit word w yields (w >> 11) * 2^-53 in [0, 1).
    """
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValidationError(f"Seed must be a non-negative integer, got {seed!r}")
    raw = np.random.Philox(key=int(seed)).random_raw(size)
    unit = (raw >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return amplitude * (2.0 * unit - 1.0)


def make_rof_data(level: int, seed: int) -> RofData:
    """
    Noisy datum g = g_clean + noise on T_level.

    Raises:
        ValidationError: If level < 3 or the seed is invalid
    """
    validate_level(level, NOISE_LEVEL, MAX_LEVEL)
    mesh = build_mesh(level)
    coarse = uniform_noise(build_mesh(NOISE_LEVEL).num_nodes, seed)
    noise = prolongate(coarse, NOISE_LEVEL, level)
    g_clean = interpolate(mesh, disk_indicator)
    return RofData(g_clean + noise, g_clean, noise)
