"""Persistence diagrams of 2D fields under the superlevel-set filtration.

Conventions
-----------
The complex is the V-construction: pixels are vertices, 4-adjacent pixels
share an edge, and each 2x2 block fills a square.  The filtration sweeps a
threshold ``alpha`` downward; a pixel is foreground once its value is
``>= alpha``, and every higher cell enters at the minimum of its vertices.
Ties are resolved by row-major pixel index ascending (symbolic
perturbation), which makes diagrams and critical pixels deterministic.

Dimension 0 is computed with a union-find sweep over pixels in descending
``(value, index)`` order under the elder rule: at a merge the component
with the older (higher) birth survives, and the younger component dies at
the merging pixel.  The one class that never dies is reported as the
essential point, paired (global max pixel, global min pixel).

Dimension 1 uses Alexander duality: superlevel loops correspond to bounded
components of the background, so a sublevel union-find runs over pixels in
ascending order on the 8-connected dual graph extended by a virtual outer
region adjacent to every border pixel.  A background region that gets cut
off from the outer region at value ``b`` and is finally swallowed at its
minimum ``d`` is a loop born at ``b`` (the pixel completing the cycle) and
dead at ``d`` (the last pixel filling the enclosed area).  The outer class
itself is the essential complement and is not reported.

Every point carries the two critical pixels whose values equal its birth
and death exactly; those pixels are the sole gradient carriers downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np

from .raster import ScalarField

Pixel = tuple[int, int]


@dataclass(frozen=True)
class PersistencePoint:
    """One topological feature: birth/death thresholds plus their pixels."""

    dim: int
    birth: float
    death: float
    essential: bool
    birth_pixel: Pixel
    death_pixel: Pixel

    def __post_init__(self):
        if self.dim not in (0, 1):
            raise ValueError(f"dim must be 0 or 1, got {self.dim}")
        if self.birth < self.death:
            raise ValueError(
                f"superlevel point needs birth >= death, got "
                f"({self.birth}, {self.death})"
            )

    @property
    def persistence(self) -> float:
        return self.birth - self.death


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of points for one field or patch.

    ``source`` is the patch anchor ``(row, col)`` or ``"full"``.
    """

    points: tuple[PersistencePoint, ...]
    dims_computed: frozenset[int]
    source: Pixel | str = "full"

    def __post_init__(self):
        object.__setattr__(self, "dims_computed", frozenset(self.dims_computed))
        ess0 = sum(1 for p in self.points if p.essential and p.dim == 0)
        if 0 in self.dims_computed and ess0 != 1:
            raise ValueError(f"expected exactly one essential dim-0 point, got {ess0}")
        if any(p.essential and p.dim == 1 for p in self.points):
            raise ValueError("a rectangular field has no essential dim-1 class")

    def points_in_dim(self, dim: int) -> tuple[PersistencePoint, ...]:
        return tuple(p for p in self.points if p.dim == dim)


def _canonical_key(p: PersistencePoint):
    return (p.dim, -p.persistence, p.birth_pixel, p.death_pixel)


@numba.njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _sweep_primal(order, pos, h, w):
    # Union-find over pixels in descending order, 4-connectivity, elder
    # rule.  Emits (birth pixel of the dying class, merge pixel).
    n = h * w
    parent = np.full(n, -1, dtype=np.int64)
    comp_birth = np.zeros(n, dtype=np.int64)
    out_birth = np.empty(n, dtype=np.int64)
    out_death = np.empty(n, dtype=np.int64)
    roots = np.empty(4, dtype=np.int64)
    m = 0
    for k in range(n):
        p = order[k]
        parent[p] = p
        comp_birth[p] = p
        pr = p // w
        pc = p % w
        cnt = 0
        for t in range(4):
            if t == 0:
                if pr == 0:
                    continue
                q = p - w
            elif t == 1:
                if pr == h - 1:
                    continue
                q = p + w
            elif t == 2:
                if pc == 0:
                    continue
                q = p - 1
            else:
                if pc == w - 1:
                    continue
                q = p + 1
            if parent[q] == -1:
                continue
            rq = _find(parent, q)
            dup = False
            for i in range(cnt):
                if roots[i] == rq:
                    dup = True
                    break
            if not dup:
                roots[cnt] = rq
                cnt += 1
        if cnt == 0:
            continue
        eld = roots[0]
        for i in range(1, cnt):
            if pos[comp_birth[roots[i]]] < pos[comp_birth[eld]]:
                eld = roots[i]
        for i in range(cnt):
            r = roots[i]
            if r == eld:
                continue
            out_birth[m] = comp_birth[r]
            out_death[m] = p
            m += 1
            parent[r] = eld
        parent[p] = eld
    return out_birth[:m], out_death[:m]


@numba.njit(cache=True, nogil=True)
def _sweep_dual(order, pos, h, w):
    # Sublevel union-find on the 8-connected background plus a virtual
    # outer node (index n, always active, elder than everything).  Emits
    # (loop-closing pixel, region-creation pixel) per finite class.
    n = h * w
    parent = np.full(n + 1, -1, dtype=np.int64)
    parent[n] = n
    comp_birth = np.zeros(n + 1, dtype=np.int64)
    comp_birth[n] = -1
    out_close = np.empty(n, dtype=np.int64)
    out_create = np.empty(n, dtype=np.int64)
    roots = np.empty(9, dtype=np.int64)
    m = 0
    for k in range(n):
        p = order[k]
        parent[p] = p
        comp_birth[p] = p
        pr = p // w
        pc = p % w
        cnt = 0
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                qr = pr + dr
                qc = pc + dc
                if qr < 0 or qr >= h or qc < 0 or qc >= w:
                    continue
                q = qr * w + qc
                if parent[q] == -1:
                    continue
                rq = _find(parent, q)
                dup = False
                for i in range(cnt):
                    if roots[i] == rq:
                        dup = True
                        break
                if not dup:
                    roots[cnt] = rq
                    cnt += 1
        if pr == 0 or pr == h - 1 or pc == 0 or pc == w - 1:
            rq = _find(parent, n)
            dup = False
            for i in range(cnt):
                if roots[i] == rq:
                    dup = True
                    break
            if not dup:
                roots[cnt] = rq
                cnt += 1
        if cnt == 0:
            continue
        eld = roots[0]
        for i in range(1, cnt):
            r = roots[i]
            if comp_birth[r] == -1:
                eld = r
            elif comp_birth[eld] != -1 and pos[comp_birth[r]] < pos[comp_birth[eld]]:
                eld = r
        for i in range(cnt):
            r = roots[i]
            if r == eld:
                continue
            out_close[m] = p
            out_create[m] = comp_birth[r]
            m += 1
            parent[r] = eld
        parent[p] = eld
    return out_close[:m], out_create[:m]


def _normalize_dims(dims: Iterable[int]) -> frozenset[int]:
    out = frozenset(int(d) for d in dims)
    if not out or not out <= {0, 1}:
        raise ValueError(f"dims must be a non-empty subset of {{0, 1}}, got {set(dims)}")
    return out


def compute_diagram(
    field: ScalarField,
    dims: Iterable[int] = (0, 1),
    source: Pixel | str = "full",
) -> PersistenceDiagram:
    """Persistence diagram of ``field`` for the requested dimensions.

    Points are returned in canonical order: ``(dim, -persistence,
    birth_pixel, death_pixel)`` with pixels compared row-major.
    """
    dims = _normalize_dims(dims)
    h, w = field.height, field.width
    v = field.values.ravel()
    n = v.size
    idx = np.arange(n, dtype=np.int64)
    points: list[PersistencePoint] = []

    if 0 in dims:
        order = np.lexsort((idx, -v)).astype(np.int64)
        pos = np.empty(n, dtype=np.int64)
        pos[order] = idx
        births, deaths = _sweep_primal(order, pos, h, w)
        for bi, di in zip(births, deaths):
            points.append(
                PersistencePoint(
                    dim=0,
                    birth=float(v[bi]),
                    death=float(v[di]),
                    essential=False,
                    birth_pixel=(int(bi) // w, int(bi) % w),
                    death_pixel=(int(di) // w, int(di) % w),
                )
            )
        gmax = int(order[0])
        gmin = int(np.argmin(v))  # first occurrence: lowest index wins ties
        points.append(
            PersistencePoint(
                dim=0,
                birth=float(v[gmax]),
                death=float(v[gmin]),
                essential=True,
                birth_pixel=(gmax // w, gmax % w),
                death_pixel=(gmin // w, gmin % w),
            )
        )

    if 1 in dims:
        order = np.argsort(v, kind="stable").astype(np.int64)
        pos = np.empty(n, dtype=np.int64)
        pos[order] = idx
        closes, creates = _sweep_dual(order, pos, h, w)
        for ci, ri in zip(closes, creates):
            points.append(
                PersistencePoint(
                    dim=1,
                    birth=float(v[ci]),
                    death=float(v[ri]),
                    essential=False,
                    birth_pixel=(int(ci) // w, int(ci) % w),
                    death_pixel=(int(ri) // w, int(ri) % w),
                )
            )

    # Same-value merges pair a class with itself instantly; such
    # zero-persistence points are invisible to every Betti curve and are
    # dropped, leaving one point per feature with an actual lifetime.
    points = [p for p in points if p.essential or p.persistence > 0.0]
    points.sort(key=_canonical_key)
    return PersistenceDiagram(tuple(points), dims, source)


def betti_curve(
    diagram: PersistenceDiagram, dim: int, thresholds: Sequence[float]
) -> list[int]:
    """Count features alive at each threshold.

    A non-essential point is alive at ``alpha`` when
    ``birth >= alpha > death``; the essential point counts whenever
    ``birth >= alpha >= death`` (its death is the global minimum).
    """
    if dim not in diagram.dims_computed:
        raise ValueError(f"dim {dim} was not computed for this diagram")
    pts = diagram.points_in_dim(dim)
    out = []
    for a in thresholds:
        c = 0
        for p in pts:
            if p.essential:
                if p.birth >= a >= p.death:
                    c += 1
            elif p.birth >= a > p.death:
                c += 1
        out.append(c)
    return out


def critical_pixels(
    diagram: PersistenceDiagram,
) -> Mapping[PersistencePoint, tuple[Pixel, Pixel]]:
    """Map each point to its (birth_pixel, death_pixel) gradient carriers."""
    return {p: (p.birth_pixel, p.death_pixel) for p in diagram.points}


def point_to_json(p: PersistencePoint) -> dict:
    return {
        "dim": p.dim,
        "birth": p.birth,
        "death": p.death,
        "essential": p.essential,
        "birth_pixel": [p.birth_pixel[0], p.birth_pixel[1]],
        "death_pixel": [p.death_pixel[0], p.death_pixel[1]],
    }


def diagram_to_json(diagram: PersistenceDiagram) -> list[dict]:
    """Array of point objects in the canonical sort order."""
    return [point_to_json(p) for p in sorted(diagram.points, key=_canonical_key)]
