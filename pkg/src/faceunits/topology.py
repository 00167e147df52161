"""Landmark layout and the facial-feature grouping of deformation coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np

from .errors import InputError

#: The six facial-feature group codes, in canonical storage order.
GROUP_CODES = ("LB", "RB", "LE", "RE", "NO", "MO")


@dataclass(frozen=True)
class LandmarkTopology:
    """Partition of L landmarks into the six facial-feature groups.

    Deformation vectors use a landmark-major layout: entry ``3*j + c`` is
    coordinate ``c`` (0=x, 1=y, 2=z) of landmark ``j``.  Each group owns the
    coordinate rows of its landmarks; those rows are the only ones a basis
    atom assigned to that group may occupy.
    """

    landmark_count: int
    groups: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        if not isinstance(self.landmark_count, int) or self.landmark_count <= 0:
            raise InputError("landmark_count must be a positive integer")
        codes = [code for code, _ in self.groups]
        if sorted(codes) != sorted(GROUP_CODES):
            raise InputError(
                f"groups must contain each of {GROUP_CODES} exactly once, got {codes}")
        seen: set[int] = set()
        for code, indices in self.groups:
            if len(indices) == 0:
                raise InputError(f"group {code} has no landmarks")
            for j in indices:
                if not 0 <= j < self.landmark_count:
                    raise InputError(
                        f"group {code}: landmark {j} outside [0, {self.landmark_count})")
                if j in seen:
                    raise InputError(f"landmark {j} assigned to more than one group")
                seen.add(j)
        if len(seen) != self.landmark_count:
            missing = sorted(set(range(self.landmark_count)) - seen)
            raise InputError(f"landmarks not covered by any group: {missing}")

    @property
    def coordinate_count(self) -> int:
        """Rows of a deformation vector: three per landmark."""
        return 3 * self.landmark_count

    def group_codes(self) -> tuple[str, ...]:
        return tuple(code for code, _ in self.groups)

    def landmarks(self, code: str) -> tuple[int, ...]:
        for c, indices in self.groups:
            if c == code:
                return indices
        raise InputError(f"unknown group code {code!r}")

    def rows(self, code: str) -> np.ndarray:
        """Sorted coordinate-row indices owned by a group."""
        j = np.asarray(self.landmarks(code), dtype=int)
        return np.sort(np.concatenate([3 * j, 3 * j + 1, 3 * j + 2]))

    def row_mask(self, code: str) -> np.ndarray:
        mask = np.zeros(self.coordinate_count, dtype=bool)
        mask[self.rows(code)] = True
        return mask

    def group_sizes(self) -> dict[str, int]:
        return {code: len(indices) for code, indices in self.groups}


def ibug51_topology() -> LandmarkTopology:
    """Default 51-landmark template: 5+5 brow, 6+6 eye, 9 nose, 20 mouth."""
    return LandmarkTopology(
        landmark_count=51,
        groups=(
            ("LB", tuple(range(0, 5))),
            ("RB", tuple(range(5, 10))),
            ("LE", tuple(range(19, 25))),
            ("RE", tuple(range(25, 31))),
            ("NO", tuple(range(10, 19))),
            ("MO", tuple(range(31, 51))),
        ),
    )


def proportional_allocation(topology: LandmarkTopology, atom_count: int) -> dict[str, int]:
    """Split ``atom_count`` atoms across groups proportionally to landmark counts.

    Every non-mouth group gets round(count * share), at least 1; the mouth
    absorbs the remainder, reflecting its larger movement repertoire.
    """
    if atom_count < len(GROUP_CODES):
        raise InputError(
            f"atom_count {atom_count} cannot give every one of the "
            f"{len(GROUP_CODES)} groups at least one atom")
    sizes = topology.group_sizes()
    total = topology.landmark_count
    alloc: dict[str, int] = {}
    for code in topology.group_codes():
        if code == "MO":
            continue
        alloc[code] = max(1, floor(atom_count * sizes[code] / total + 0.5))
    rest = atom_count - sum(alloc.values())
    if rest < 1:
        raise InputError("allocation leaves no atoms for group MO; increase atom_count")
    alloc["MO"] = rest
    return alloc
