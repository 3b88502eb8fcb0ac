"""Multi-scale structural similarity and the transport/identity cost.

The cost is ``1 - MS-SSIM`` with an analytic gradient with respect to the
first field.  Statistics use a Gaussian window in valid mode (no padding),
each scale halves dimensions by 2x2 mean pooling, coarse scales contribute
their contrast-structure term and the final scale the full luminance *
contrast-structure map, combined by a weighted geometric product.
Constants are the standard MS-SSIM defaults (11-tap window, sigma 1.5,
k1 = 0.01, k2 = 0.03, five-scale weights); the scale count auto-reduces
when the field is too small and the remaining weights are renormalised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .raster import ScalarField

STANDARD_SCALE_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
COMPONENT_FLOOR = 1e-6


@dataclass(frozen=True)
class MsssimConfig:
    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    scale_weights: tuple[float, ...] = STANDARD_SCALE_WEIGHTS

    def __post_init__(self):
        if self.window_size < 2 or self.window_size % 2 == 0:
            raise ValueError(f"window_size must be odd and >= 3, got {self.window_size}")
        if not self.scale_weights or any(w <= 0 for w in self.scale_weights):
            raise ValueError("scale_weights must be positive")


DEFAULT_CONFIG = MsssimConfig()


def effective_scales(cfg: MsssimConfig, height: int, width: int) -> int:
    """Largest usable scale count: ``min(h, w) >= window * 2**(s - 1)``."""
    side = min(height, width)
    if side < cfg.window_size:
        raise ValueError(
            f"field {height}x{width} smaller than the {cfg.window_size}-tap window"
        )
    s = 1
    while (
        s < len(cfg.scale_weights)
        and side >= cfg.window_size * 2 ** s
    ):
        s += 1
    return s


def _gaussian_taps(size: int, sigma: float) -> np.ndarray:
    c = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(c * c) / (2.0 * sigma * sigma))
    return g / g.sum()


def _win_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size // 2
    y = ndimage.correlate1d(x, g, axis=1, mode="constant")
    y = ndimage.correlate1d(y, g, axis=0, mode="constant")
    return y[k:-k, k:-k]


def _win_adjoint(gmap: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Adjoint of the valid-mode window: full correlation, realised as a
    # same-mode pass over the zero-padded map (the window is symmetric).
    k = g.size // 2
    y = np.pad(gmap, k)
    y = ndimage.correlate1d(y, g, axis=1, mode="constant")
    return ndimage.correlate1d(y, g, axis=0, mode="constant")


def _pool(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    return x[: h - h % 2, : w - w % 2].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _pool_adjoint(gmap: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    out = np.zeros((h, w))
    out[: 2 * (h // 2), : 2 * (w // 2)] = (
        np.repeat(np.repeat(gmap, 2, axis=0), 2, axis=1) * 0.25
    )
    return out


def _check_pair(a: ScalarField, b: ScalarField, cfg: MsssimConfig) -> int:
    if a.shape != b.shape:
        raise ValueError(f"field dimensions differ: {a.shape} vs {b.shape}")
    return effective_scales(cfg, a.height, a.width)


def _forward(a: ScalarField, b: ScalarField, cfg: MsssimConfig):
    scales = _check_pair(a, b, cfg)
    weights = np.asarray(cfg.scale_weights[:scales], dtype=np.float64)
    weights = weights / weights.sum()
    g = _gaussian_taps(cfg.window_size, cfg.window_sigma)
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2

    u = a.values
    v = b.values
    caches = []
    means = []
    for s in range(scales):
        mu_u = _win_valid(u, g)
        mu_v = _win_valid(v, g)
        suu = _win_valid(u * u, g)
        svv = _win_valid(v * v, g)
        suv = _win_valid(u * v, g)
        var_u = suu - mu_u * mu_u
        var_v = svv - mu_v * mu_v
        cov = suv - mu_u * mu_v
        a2 = 2.0 * cov + c2
        b2 = var_u + var_v + c2
        cs = a2 / b2
        final = s == scales - 1
        if final:
            a1 = 2.0 * mu_u * mu_v + c1
            b1 = mu_u * mu_u + mu_v * mu_v + c1
            lum = a1 / b1
            mean = float((lum * cs).mean())
        else:
            a1 = b1 = lum = None
            mean = float(cs.mean())
        caches.append(
            dict(u=u, v=v, mu_u=mu_u, mu_v=mu_v, a1=a1, b1=b1, lum=lum,
                 a2=a2, b2=b2, cs=cs)
        )
        means.append(mean)
        if not final:
            u = _pool(u)
            v = _pool(v)

    comps = np.maximum(means, COMPONENT_FLOOR)
    value = float(np.prod(comps ** weights))
    return value, means, comps, weights, caches, g


def msssim(a: ScalarField, b: ScalarField, cfg: MsssimConfig = DEFAULT_CONFIG) -> float:
    """MS-SSIM of two fields, in ``[-1, 1]`` (1.0 exactly for ``a == b``)."""
    value, _, _, _, _, _ = _forward(a, b, cfg)
    return float(min(1.0, max(-1.0, value)))


def ssim_cost(
    a: ScalarField, b: ScalarField, cfg: MsssimConfig = DEFAULT_CONFIG
) -> tuple[float, np.ndarray]:
    """``1 - MS-SSIM`` and its analytic gradient w.r.t. ``a``.

    Identical inputs short-circuit to ``(0.0, 0)``: equality is an exact
    stationary point and the closed form avoids last-ulp residue there.
    """
    if np.array_equal(a.values, b.values):
        _check_pair(a, b, cfg)
        return 0.0, np.zeros(a.shape)
    value, means, comps, weights, caches, g = _forward(a, b, cfg)
    scales = len(means)

    grad: Optional[np.ndarray] = None
    for s in range(scales - 1, -1, -1):
        c = caches[s]
        if grad is not None:
            grad = _pool_adjoint(grad, c["u"].shape)
        else:
            grad = np.zeros(c["u"].shape)
        # d msssim / d mean_s; zero where the component floor clipped.
        if means[s] <= COMPONENT_FLOOR:
            continue
        factor = value * weights[s] / comps[s]
        n = c["cs"].size
        if s == scales - 1:
            g_lum = factor * c["cs"] / n
            g_cs = factor * c["lum"] / n
        else:
            g_lum = None
            g_cs = np.full_like(c["cs"], factor / n)
        b2 = c["b2"]
        t_suv = g_cs * (2.0 / b2)
        t_suu = g_cs * (-c["a2"] / (b2 * b2))
        dmu = t_suv * (-c["mu_v"]) + t_suu * (-2.0 * c["mu_u"])
        if g_lum is not None:
            b1 = c["b1"]
            dmu = dmu + g_lum * 2.0 * (c["mu_v"] * b1 - c["mu_u"] * c["a1"]) / (b1 * b1)
        grad += (
            _win_adjoint(dmu, g)
            + 2.0 * c["u"] * _win_adjoint(t_suu, g)
            + c["v"] * _win_adjoint(t_suv, g)
        )

    cost = 1.0 - float(min(1.0, max(-1.0, value)))
    return cost, -grad
