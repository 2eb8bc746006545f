"""Continuum objects: coded trees, stick-breaking, tree-indexed fields,
distorted metrics and diffusions in random potentials."""

from .brox import BroxChain, BroxPath, brox_chain, brox_law, brox_positions, brox_simulate
from .excursion import (
    CodedTree,
    Excursion,
    sample_excursion,
    sample_excursion_bessel,
    tent,
    tree_distance,
    write_grid_csv,
)
from .field import GaussianField, sample_field_path, sample_gaussian_field
from .potentials import (
    POTENTIAL_KINDS,
    ContinuumPotential,
    DistortedTree,
    distorted_contour,
    distorted_metric,
    make_potential,
    root_integral,
    tilted_excursion,
)
from .stickbreak import StickBreakTree, stick_breaking, write_segment_table

__all__ = [
    "BroxChain",
    "BroxPath",
    "brox_chain",
    "brox_law",
    "brox_positions",
    "brox_simulate",
    "CodedTree",
    "Excursion",
    "sample_excursion",
    "sample_excursion_bessel",
    "tent",
    "tree_distance",
    "write_grid_csv",
    "GaussianField",
    "sample_field_path",
    "sample_gaussian_field",
    "POTENTIAL_KINDS",
    "ContinuumPotential",
    "DistortedTree",
    "distorted_contour",
    "distorted_metric",
    "make_potential",
    "root_integral",
    "tilted_excursion",
    "StickBreakTree",
    "stick_breaking",
    "write_segment_table",
]
