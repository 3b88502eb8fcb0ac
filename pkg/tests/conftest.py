import time

import numpy as np
import pytest
from scipy import ndimage

from topokit import (
    ObjectiveConfig,
    ScalarField,
    Scene,
    compute_diagram,
    msssim,
    run_demo,
)


def permuted_lattice_field(rng: np.random.Generator, h: int, w: int) -> ScalarField:
    """Field with all-distinct values: a permutation of an evenly spaced grid."""
    n = h * w
    vals = (rng.permutation(n) + 0.5) / n
    return ScalarField(vals.reshape(h, w))


def smooth_distinct_field(
    rng: np.random.Generator, n: int, sigma: float = 2.5
) -> ScalarField:
    """Smooth random field rank-remapped onto a jittered value lattice.

    The remap preserves the pixel order (hence the diagram combinatorics of
    the smooth field: few critical points) while guaranteeing all values
    distinct with gaps >= 0.4 * 0.96 / n^2, comfortably above the 2e-4
    reordering radius of the h = 1e-4 finite-difference probes.
    """
    raw = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma)
    m = raw.size
    ranks = np.argsort(raw.ravel(), kind="stable")
    lattice = 0.02 + 0.96 * (np.arange(m) + 0.2 + 0.6 * rng.random(m)) / m
    out = np.empty(m)
    out[ranks] = lattice
    return ScalarField(out.reshape(n, n))


def smooth_field(rng: np.random.Generator, n: int, sigma: float = 3.0) -> ScalarField:
    raw = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma)
    lo, hi = raw.min(), raw.max()
    return ScalarField(0.1 + 0.8 * (raw - lo) / (hi - lo))


def perturbed_partner(
    rng: np.random.Generator, base: ScalarField, amount: float = 0.15
) -> ScalarField:
    bump = ndimage.gaussian_filter(rng.standard_normal(base.shape), 2.0)
    return ScalarField(np.clip(base.values + amount * bump, 0.05, 0.95))


def ring_field(size: int = 5) -> ScalarField:
    arr = np.zeros((size, size))
    arr[1 : size - 1, 1 : size - 1] = 1.0
    arr[size // 2, size // 2] = 0.0
    return ScalarField(arr)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # First diagram/msssim call JIT-compiles the sweep kernels; do it once
    # up front so timed tests measure the algorithms, not compilation.
    f = ScalarField(np.linspace(0.1, 0.9, 144).reshape(12, 12))
    compute_diagram(f, (0, 1))
    g = ScalarField(np.linspace(0.2, 0.8, 144).reshape(12, 12))
    msssim(f, g)


DEMO_SCENE = Scene("broken-ring", 64, 7)
DEMO_CFG = ObjectiveConfig(
    lambda_ssim=30.0, lambda_idt=15.0, lambda_topo=1.0, gate_step=0, patch_size=65
)
DEMO_STEPS = 2000
DEMO_ETA = 0.05


@pytest.fixture(scope="session")
def demo_acceptance_run(warm_kernels):
    """The acceptance-configuration descent run, shared across tests."""
    t0 = time.perf_counter()
    trace = run_demo(DEMO_SCENE, DEMO_CFG, steps=DEMO_STEPS, eta=DEMO_ETA, threads=1)
    elapsed = time.perf_counter() - t0
    return {"trace": trace, "elapsed": elapsed}


@pytest.fixture(scope="session")
def demo_ablation_run(warm_kernels):
    """Same run with the topology term disabled."""
    cfg = ObjectiveConfig(
        lambda_ssim=30.0, lambda_idt=15.0, lambda_topo=0.0, gate_step=0, patch_size=65
    )
    trace = run_demo(DEMO_SCENE, cfg, steps=DEMO_STEPS, eta=DEMO_ETA, threads=1)
    return {"trace": trace}
