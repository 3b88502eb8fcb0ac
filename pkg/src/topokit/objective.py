"""Composed training objective: weighted transport + identity costs plus a
step-gated topology regulariser, with an externally supplied adversarial
scalar slot.

``total = lambda_ssim * ssim_cost(gen, x) + lambda_idt * ssim_cost(gen, y)
+ gate * lambda_topo * topo_loss(gen, reference) + external_w1`` where the
gate is 1 iff ``step >= gate_step``.  The gradient is with respect to the
generated field and excludes the external term (its gradient lives in an
out-of-scope discriminator, so the slot is a plain scalar).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .msssim import DEFAULT_CONFIG, MsssimConfig, ssim_cost
from .raster import ScalarField
from .topo_loss import topo_loss_full


@dataclass(frozen=True)
class ObjectiveConfig:
    """Weights and knobs; defaults are the published training settings."""

    lambda_ssim: float = 30.0
    lambda_idt: float = 15.0
    lambda_topo: float = 1.0
    gate_step: int = 100
    patch_size: int = 65
    dims: tuple[int, ...] = (0, 1)
    eps_min: float = 0.0
    msssim: MsssimConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.lambda_ssim < 0 or self.lambda_idt < 0 or self.lambda_topo < 0:
            raise ValueError("lambda weights must be >= 0")
        if self.gate_step < 0:
            raise ValueError("gate_step must be >= 0")


@dataclass(frozen=True)
class ObjectiveReport:
    step: int
    transport_cost: float
    identity_cost: float
    topo_cost: float
    external_w1: float
    gate_active: bool
    total: float
    gradient: np.ndarray


def evaluate(
    gen: ScalarField,
    x: ScalarField,
    y: Optional[ScalarField] = None,
    step: int = 0,
    cfg: ObjectiveConfig = ObjectiveConfig(),
    external_w1: float = 0.0,
    topo_reference: Optional[ScalarField] = None,
    threads: int = 1,
) -> ObjectiveReport:
    """Evaluate the composed objective and its gradient w.r.t. ``gen``.

    ``x`` anchors the transport cost and, by default, the topology
    reference; pass ``topo_reference`` to diff diagrams against another
    field (the descent demo anchors pixels to the degraded input while
    aligning topology to the clean reference).  ``y`` is the optional
    identity anchor.
    """
    if gen.shape != x.shape:
        raise ValueError(f"field dimensions differ: {gen.shape} vs {x.shape}")
    if y is not None and y.shape != gen.shape:
        raise ValueError(f"identity field dimensions differ: {y.shape} vs {gen.shape}")

    transport_cost, transport_grad = ssim_cost(gen, x, cfg.msssim)
    if y is not None:
        identity_cost, identity_grad = ssim_cost(gen, y, cfg.msssim)
    else:
        identity_cost, identity_grad = 0.0, None

    reference = x if topo_reference is None else topo_reference
    topo = topo_loss_full(
        gen, reference, cfg.patch_size, cfg.dims, cfg.eps_min, threads
    )

    gate_active = step >= cfg.gate_step
    total = (
        cfg.lambda_ssim * transport_cost
        + cfg.lambda_idt * identity_cost
        + (cfg.lambda_topo * topo.total if gate_active else 0.0)
        + external_w1
    )
    gradient = cfg.lambda_ssim * transport_grad
    if identity_grad is not None:
        gradient = gradient + cfg.lambda_idt * identity_grad
    if gate_active:
        gradient = gradient + cfg.lambda_topo * topo.gradient

    return ObjectiveReport(
        step=step,
        transport_cost=transport_cost,
        identity_cost=identity_cost,
        topo_cost=topo.total,
        external_w1=external_w1,
        gate_active=gate_active,
        total=total,
        gradient=gradient,
    )


def normalize_dims(dims: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(set(int(d) for d in dims)))
    if not out or not set(out) <= {0, 1}:
        raise ValueError(f"dims must be a non-empty subset of {{0, 1}}, got {dims}")
    return out
