"""Correspondence between two persistence diagrams by persistence rank.

Within each dimension the k-th highest-persistence generated point is
paired with the k-th highest-persistence reference point (ties broken by
birth pixel, then death pixel, row-major).  Essential points only ever
pair with essential points.  Generated points ranked beyond the reference
count map to the diagonal; unmatched reference points carry no penalty
because the loss sums over generated points only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .cubical import PersistenceDiagram, PersistencePoint, point_to_json


@dataclass(frozen=True)
class MatchedPair:
    """A generated point and its target (``None`` means the diagonal)."""

    gen: PersistencePoint
    target: Optional[PersistencePoint]


@dataclass(frozen=True)
class Matching:
    pairs: tuple[MatchedPair, ...]
    dims: frozenset[int]
    eps_min: float

    def pairs_in_dim(self, dim: int) -> tuple[MatchedPair, ...]:
        return tuple(p for p in self.pairs if p.gen.dim == dim)


def _rank_key(p: PersistencePoint):
    return (-p.persistence, p.birth_pixel, p.death_pixel)


def match(
    gen: PersistenceDiagram, ref: PersistenceDiagram, eps_min: float = 0.0
) -> Matching:
    """Rank-match ``gen`` against ``ref`` per dimension.

    Non-essential points with persistence ``<= eps_min`` are treated as
    numerical noise below resolution and dropped from both diagrams before
    ranking; essential points always participate.
    """
    if gen.dims_computed != ref.dims_computed:
        raise ValueError(
            f"diagrams computed for different dims: "
            f"{sorted(gen.dims_computed)} vs {sorted(ref.dims_computed)}"
        )
    pairs: list[MatchedPair] = []
    for dim in sorted(gen.dims_computed):
        for essential in (True, False):
            g = [
                p
                for p in gen.points_in_dim(dim)
                if p.essential == essential
                and (essential or p.persistence > eps_min)
            ]
            r = [
                p
                for p in ref.points_in_dim(dim)
                if p.essential == essential
                and (essential or p.persistence > eps_min)
            ]
            g.sort(key=_rank_key)
            r.sort(key=_rank_key)
            for k, gp in enumerate(g):
                pairs.append(MatchedPair(gen=gp, target=r[k] if k < len(r) else None))
    return Matching(tuple(pairs), gen.dims_computed, float(eps_min))


def diagonal_target(p: PersistencePoint) -> tuple[float, float]:
    """Nearest diagonal point ``(m, m)`` with ``m = (birth + death) / 2``."""
    m = (p.birth + p.death) / 2.0
    return (m, m)


def matching_to_json(matching: Matching) -> list[dict]:
    out = []
    for pair in matching.pairs:
        out.append(
            {
                "gen": point_to_json(pair.gen),
                "target": "diagonal" if pair.target is None else point_to_json(pair.target),
            }
        )
    return out
