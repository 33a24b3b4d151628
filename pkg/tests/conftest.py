import numpy as np
import pytest

from sgdmc import (
    Grid,
    MapFamily,
    bernoulli_pair,
    decompose,
    double_well,
    ulam_assemble,
)


@pytest.fixture(scope="session")
def dw038_setup():
    """Shared two-well setting: objective, decomposition, maps, grid, operator."""
    obj = double_well(0.38)
    eta = 0.33
    decomp = decompose(obj, eta)
    fam = MapFamily(obj, eta)
    grid = Grid.regular(decomp.intervals, 1000)
    op = ulam_assemble(fam, grid)
    return obj, eta, decomp, fam, grid, op


@pytest.fixture(scope="session")
def dw02_setup():
    obj = double_well(0.2)
    eta = 0.3
    decomp = decompose(obj, eta)
    fam = MapFamily(obj, eta)
    return obj, eta, decomp, fam


@pytest.fixture(scope="session")
def bernoulli_setup():
    obj = bernoulli_pair()
    eta = 0.25
    decomp = decompose(obj, eta)
    fam = MapFamily(obj, eta)
    return obj, eta, decomp, fam


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(20240817))
