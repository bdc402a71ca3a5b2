"""Shared fixtures: small circuits and cached reference states."""

from __future__ import annotations

import numpy as np
import pytest

from rqcsim import oracle
from rqcsim.circuits import Circuit, Lattice, generate_rqc


@pytest.fixture(scope="session")
def grid_2x2() -> Lattice:
    return Lattice.rectangle(2, 2)


@pytest.fixture(scope="session")
def grid_3x4() -> Lattice:
    return Lattice.rectangle(3, 4)


@pytest.fixture(scope="session")
def grid_4x4() -> Lattice:
    return Lattice.rectangle(4, 4)


@pytest.fixture(scope="session")
def bristlecone_24() -> Lattice:
    return Lattice.named("bristlecone-24")


@pytest.fixture(scope="session")
def circuit_4x4_t16(grid_4x4) -> Circuit:
    return generate_rqc(grid_4x4, "1+16+1", seed=3)


@pytest.fixture(scope="session")
def circuit_3x4_t16(grid_3x4) -> Circuit:
    return generate_rqc(grid_3x4, "1+16+1", seed=11)


@pytest.fixture(scope="session")
def state_4x4_t16(circuit_4x4_t16) -> np.ndarray:
    """Full state vector of the 4x4 reference circuit from |0...0>."""
    return oracle.evolve(circuit_4x4_t16)


@pytest.fixture(scope="session")
def state_3x4_t16(circuit_3x4_t16) -> np.ndarray:
    return oracle.evolve(circuit_3x4_t16)


def pass_line(tag: str, detail: str) -> None:
    """One-line PASS marker printed by each acceptance check."""
    print(f"PASS {tag}: {detail}")
