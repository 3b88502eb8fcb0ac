"""Topology-preserving loss toolkit for 2D likelihood maps."""

from .cubical import (
    PersistenceDiagram,
    PersistencePoint,
    betti_curve,
    compute_diagram,
    critical_pixels,
    diagram_to_json,
)
from .demo import DemoTrace, Scene, generate_scene, run_demo
from .matching import Matching, MatchedPair, diagonal_target, match, matching_to_json
from .msssim import MsssimConfig, msssim, ssim_cost
from .objective import ObjectiveConfig, ObjectiveReport, evaluate
from .oracles import BettiOracleResult, betti_by_floodfill, fd_gradient
from .raster import (
    PatchLayout,
    ScalarField,
    extract_patch,
    read_field,
    tile,
    write_field,
)
from .topo_loss import TopoLossReport, topo_loss_full, topo_loss_patch

__version__ = "0.1.0"

__all__ = [
    "BettiOracleResult",
    "DemoTrace",
    "MatchedPair",
    "Matching",
    "MsssimConfig",
    "ObjectiveConfig",
    "ObjectiveReport",
    "PatchLayout",
    "PersistenceDiagram",
    "PersistencePoint",
    "ScalarField",
    "Scene",
    "TopoLossReport",
    "betti_by_floodfill",
    "betti_curve",
    "compute_diagram",
    "critical_pixels",
    "diagonal_target",
    "diagram_to_json",
    "evaluate",
    "extract_patch",
    "fd_gradient",
    "generate_scene",
    "match",
    "matching_to_json",
    "msssim",
    "read_field",
    "run_demo",
    "ssim_cost",
    "tile",
    "topo_loss_full",
    "topo_loss_patch",
    "write_field",
]
