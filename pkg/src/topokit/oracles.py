"""Independent brute-force validators: threshold-sweep Betti numbers and
finite-difference gradients.

These deliberately share no machinery with the fast paths they check: the
Betti oracle rebuilds each superlevel mask and counts cells directly, and
the gradient oracle re-evaluates the loss per perturbed pixel.  Slowness is
accepted; a size guard keeps the budget sane.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .raster import ScalarField

ORACLE_MAX_SIDE = 64


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class BettiOracleResult:
    """Betti numbers at every unique field value, sweeping downward."""

    thresholds: tuple[float, ...]
    beta0: tuple[int, ...]
    beta1: tuple[int, ...]


def _euler_characteristic(mask: np.ndarray) -> int:
    # V-construction cell counts: vertices, 4-neighbour edges, 2x2 squares.
    v = int(mask.sum())
    e = int((mask[:, 1:] & mask[:, :-1]).sum()) + int((mask[1:, :] & mask[:-1, :]).sum())
    f = int(
        (mask[1:, 1:] & mask[1:, :-1] & mask[:-1, 1:] & mask[:-1, :-1]).sum()
    )
    return v - e + f


def betti_by_floodfill(field: ScalarField) -> BettiOracleResult:
    """beta0 by 4-connected flood fill and beta1 = beta0 - chi per threshold.

    The superlevel mask at alpha is ``value >= alpha`` (ties enter the
    foreground together, matching the filtration's entry convention).
    """
    if field.height > ORACLE_MAX_SIDE or field.width > ORACLE_MAX_SIDE:
        raise OracleBudgetError(
            f"oracle limited to {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE} fields, "
            f"got {field.height}x{field.width}"
        )
    values = field.values
    thresholds = np.unique(values)[::-1]  # descending
    beta0 = []
    beta1 = []
    for a in thresholds:
        mask = values >= a
        _, n0 = ndimage.label(mask)  # default structure = 4-connectivity
        chi = _euler_characteristic(mask)
        beta0.append(int(n0))
        beta1.append(int(n0) - chi)
    return BettiOracleResult(
        thresholds=tuple(float(a) for a in thresholds),
        beta0=tuple(beta0),
        beta1=tuple(beta1),
    )


def fd_gradient(
    loss_fn: Callable[[ScalarField], float],
    field: ScalarField,
    h: float = 1e-4,
) -> np.ndarray:
    """Central differences ``(loss(x + h e_i) - loss(x - h e_i)) / 2h``.

    ``loss_fn`` must be pure and finite on the perturbed fields; values
    need ``h`` of headroom inside ``[0, 1]`` so perturbations stay valid.
    """
    values = field.values
    if float(values.min()) < h or float(values.max()) > 1.0 - h:
        raise ValueError(
            f"field values need +/-{h} headroom inside [0, 1] for central "
            "differences"
        )
    grad = np.empty_like(values)
    for r in range(field.height):
        for c in range(field.width):
            plus = values.copy()
            plus[r, c] += h
            minus = values.copy()
            minus[r, c] -= h
            lp = loss_fn(ScalarField(plus))
            lm = loss_fn(ScalarField(minus))
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise ValueError(f"non-finite loss at perturbed pixel ({r}, {c})")
            grad[r, c] = (lp - lm) / (2.0 * h)
    return grad
