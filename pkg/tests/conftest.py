import numpy as np
import pytest

from faceunits import (BasisDictionary, LandmarkTopology, canonical_names,
                       ibug51_topology)


@pytest.fixture(scope="session")
def ibug():
    return ibug51_topology()


@pytest.fixture(scope="session")
def toy_topology():
    """Twelve landmarks, two per group: small enough for brute-force oracles."""
    return LandmarkTopology(
        landmark_count=12,
        groups=(
            ("LB", (0, 1)), ("RB", (2, 3)), ("LE", (4, 5)),
            ("RE", (6, 7)), ("NO", (8, 9)), ("MO", (10, 11)),
        ),
    )


def masked_dictionary(topology, atom_groups, seed=0, norm=1.0):
    """Random dictionary with exact zeros outside each atom's group rows."""
    rng = np.random.default_rng(seed)
    atoms = np.zeros((topology.coordinate_count, len(atom_groups)))
    for k, code in enumerate(atom_groups):
        rows = topology.rows(code)
        vec = rng.standard_normal(rows.size)
        atoms[rows, k] = norm * vec / np.linalg.norm(vec)
    return BasisDictionary(
        atoms=atoms, atom_groups=tuple(atom_groups), topology=topology,
        atom_names=canonical_names(atom_groups))


@pytest.fixture
def toy_dictionary(toy_topology):
    return masked_dictionary(
        toy_topology, ("LB", "RB", "LE", "RE", "NO", "MO"), seed=11)
