"""Squared-distance topology loss over matched diagrams, with gradients.

Per patch the loss is ``sum over matched generated points of
(b - target_b)^2 + (d - target_d)^2`` where the target is the matched
reference point or, for diagonal matches, the midpoint projection.  The
matching is held fixed during differentiation (envelope treatment), so the
gradient routes ``2 (b - target_b)`` to the birth pixel and
``2 (d - target_d)`` to the death pixel of each generated point,
accumulating when one pixel is critical for several points.  The full-field
loss tiles both fields with the same layout, sums patch losses, and
scatter-adds patch gradients (overlapping tail pixels accumulate).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .cubical import PersistenceDiagram, PersistencePoint, compute_diagram
from .matching import MatchedPair, diagonal_target, match
from .raster import PatchLayout, ScalarField, extract_patch, tile

Pixel = tuple[int, int]


@dataclass(frozen=True)
class PatchLoss:
    anchor: Pixel
    loss: float


@dataclass(frozen=True)
class PointContribution:
    anchor: Pixel
    point: PersistencePoint
    target: Optional[PersistencePoint]
    cost: float


@dataclass(frozen=True)
class TopoLossReport:
    total: float
    per_patch: tuple[PatchLoss, ...]
    per_point: tuple[PointContribution, ...]
    gradient: np.ndarray


@lru_cache(maxsize=512)
def _cached_diagram(buf: bytes, h: int, w: int, dims: tuple[int, ...]) -> PersistenceDiagram:
    arr = np.frombuffer(buf, dtype=np.float64).reshape(h, w)
    return compute_diagram(ScalarField(arr), dims)


def reference_diagram(field: ScalarField, dims: Iterable[int]) -> PersistenceDiagram:
    """Diagram of a reference field, cached by field bytes.

    References are fixed across optimisation steps while the generated
    field moves, so this cache turns the reference side into a lookup.
    """
    return _cached_diagram(field.tobytes(), field.height, field.width, tuple(sorted(set(dims))))


def _pair_terms(
    pairs: Iterable[MatchedPair], grad: np.ndarray, anchor: Pixel
) -> tuple[float, list[PointContribution]]:
    loss = 0.0
    contributions = []
    for pair in pairs:
        p = pair.gen
        if pair.target is None:
            tb, td = diagonal_target(p)
        else:
            tb, td = pair.target.birth, pair.target.death
        db = p.birth - tb
        dd = p.death - td
        cost = db * db + dd * dd
        loss += cost
        grad[p.birth_pixel] += 2.0 * db
        grad[p.death_pixel] += 2.0 * dd
        contributions.append(PointContribution(anchor, p, pair.target, cost))
    return loss, contributions


def _patch_terms(
    gen_field: ScalarField,
    ref_field: ScalarField,
    dims: tuple[int, ...],
    eps_min: float,
    anchor: Pixel,
) -> tuple[float, np.ndarray, list[PointContribution]]:
    if gen_field.shape != ref_field.shape:
        raise ValueError(
            f"patch dimensions differ: {gen_field.shape} vs {ref_field.shape}"
        )
    gen_dgm = compute_diagram(gen_field, dims, source=anchor)
    ref_dgm = reference_diagram(ref_field, dims)
    matching = match(gen_dgm, ref_dgm, eps_min)
    grad = np.zeros(gen_field.shape)
    loss, contributions = _pair_terms(matching.pairs, grad, anchor)
    return loss, grad, contributions


def topo_loss_patch(
    gen_field: ScalarField,
    ref_field: ScalarField,
    dims: Iterable[int] = (0, 1),
    eps_min: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Loss and gradient (w.r.t. the generated patch) for one patch pair."""
    loss, grad, _ = _patch_terms(
        gen_field, ref_field, tuple(sorted(set(dims))), eps_min, (0, 0)
    )
    return loss, grad


def topo_loss_full(
    gen: ScalarField,
    ref: ScalarField,
    patch_size: int = 65,
    dims: Iterable[int] = (0, 1),
    eps_min: float = 0.0,
    threads: int = 1,
) -> TopoLossReport:
    """Patch-aggregated loss: tile both fields, sum losses, scatter gradients.

    Patch computations are independent; with ``threads > 1`` they run on a
    thread pool and are merged in anchor order, so results are identical
    across thread counts.
    """
    if gen.shape != ref.shape:
        raise ValueError(f"field dimensions differ: {gen.shape} vs {ref.shape}")
    dims = tuple(sorted(set(dims)))
    layout: PatchLayout = tile(gen, patch_size)

    def one(anchor: Pixel):
        gp = extract_patch(gen, anchor, patch_size)
        rp = extract_patch(ref, anchor, patch_size)
        return _patch_terms(gp, rp, dims, eps_min, anchor)

    if threads > 1 and len(layout.anchors) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, layout.anchors))
    else:
        results = [one(a) for a in layout.anchors]

    total = 0.0
    per_patch = []
    per_point: list[PointContribution] = []
    gradient = np.zeros(gen.shape)
    for anchor, (loss, grad, contributions) in zip(layout.anchors, results):
        r, c = anchor
        ph, pw = grad.shape
        gradient[r : r + ph, c : c + pw] += grad
        total += loss
        per_patch.append(PatchLoss(anchor, loss))
        per_point.extend(contributions)
    return TopoLossReport(
        total=total,
        per_patch=tuple(per_patch),
        per_point=tuple(per_point),
        gradient=gradient,
    )
