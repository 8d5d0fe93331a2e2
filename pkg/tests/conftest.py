import json

import numpy as np
import pytest

from holehom.field import CoefficientField, CoefficientProfile, Grid, rasterize
from holehom.geometry import GeneratorTag, InclusionSet, LatticeIIDSampler, RadiusLaw


def plain_field(n: int, box_side: float = 1.0, dimension: int = 2, a0: float = 1.0) -> CoefficientField:
    """No holes, constant coefficient"""
    grid = Grid(dimension, n, box_side)
    return CoefficientField.from_cell_values(grid, np.ones(grid.shape, dtype=bool), np.full(grid.shape, a0), a0, a0)


def single_ball(radius: float = 0.25, center=(0.5, 0.5), box_side: float = 1.0) -> InclusionSet:
    return InclusionSet.from_arrays(
        [center], [radius], box_side=box_side, dimension=len(center), separation=1.0, diameter_cap=1.0,
        generator_tag=GeneratorTag.EXPLICIT,
    )


def lattice_set(box_side: int = 4, seed: int = 3, high: float = 0.2) -> InclusionSet:
    return LatticeIIDSampler(box_side, 2, RadiusLaw("uniform", 0.0, high)).sample(seed)


@pytest.fixture
def lattice_field():
    """Example-1 style geometry: L=4, radii uniform on [0, 0.2], h = 1/16"""
    return rasterize(lattice_set(), 64)


@pytest.fixture
def stripes_profile():
    return CoefficientProfile(kind="stripes", values=(1.0, 4.0), axis=0, width=64)


@pytest.fixture
def write_config(tmp_path):
    """Write a config document to tmp_path and return its path"""

    def write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(document if isinstance(document, str) else json.dumps(document), encoding="utf-8")
        return path

    return write
