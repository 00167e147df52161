"""Domain types and the deterministic synthesis/validation operations.

All types are immutable after construction (array fields are copied and
marked read-only), and every operation here is a pure function, so values
can be shared freely across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .topology import GROUP_CODES, LandmarkTopology

#: Slack on the unit-norm constraint for basis atoms.
ATOM_NORM_SLACK = 1e-9

_NAME_PATTERN = re.compile(r"^(LB|RB|LE|RE|NO|MO)-([1-9][0-9]*)$")


def _readonly(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ExpressionModel:
    """Landmark-restricted linear expression model.

    ``basis`` maps expression coefficients to a deformation vector; column m
    is the m-th deformation mode sampled at the landmarks.  ``mean_landmarks``
    holds the neutral-face 3D landmark coordinates, in model units.
    """

    mean_landmarks: np.ndarray  # L x 3
    basis: np.ndarray           # 3L x M

    def __post_init__(self):
        mean = _readonly(self.mean_landmarks)
        basis = _readonly(self.basis)
        if mean.ndim != 2 or mean.shape[1] != 3:
            raise InputError(f"mean_landmarks must be L x 3, got shape {mean.shape}")
        if basis.ndim != 2 or basis.shape[1] < 1:
            raise InputError(f"basis must be 3L x M with M >= 1, got shape {basis.shape}")
        if basis.shape[0] != 3 * mean.shape[0]:
            raise InputError(
                f"basis has {basis.shape[0]} rows but {mean.shape[0]} landmarks need "
                f"{3 * mean.shape[0]}")
        if not np.isfinite(mean).all() or not np.isfinite(basis).all():
            raise InputError("expression model entries must be finite")
        object.__setattr__(self, "mean_landmarks", mean)
        object.__setattr__(self, "basis", basis)

    @property
    def landmark_count(self) -> int:
        return self.mean_landmarks.shape[0]

    @property
    def component_count(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True, eq=False)
class DeformationSample:
    """Per-landmark displacement from the neutral face, in model units.

    Layout: entry ``3*j + c`` is coordinate c (0=x, 1=y, 2=z) of landmark j.
    """

    deformation: np.ndarray

    def __post_init__(self):
        vec = _readonly(self.deformation)
        if vec.ndim != 1 or vec.size == 0 or vec.size % 3 != 0:
            raise InputError(
                f"deformation must be a 1-D vector of length 3L, got shape {vec.shape}")
        if not np.isfinite(vec).all():
            raise InputError("deformation entries must be finite")
        object.__setattr__(self, "deformation", vec)

    @property
    def coordinate_count(self) -> int:
        return self.deformation.size


@dataclass(frozen=True, eq=False)
class BasisDictionary:
    """A learned basis of localized deformation atoms.

    Each atom is assigned to one facial-feature group and may only occupy the
    coordinate rows of that group; its L2 norm may not exceed 1.  Names follow
    the two-letter group code plus the 1-based ordinal within the group in
    storage order ("LE-3" is the third left-eye atom).  Those three semantic
    invariants are reported (not enforced) by :func:`validate_dictionary`, so
    deliberately broken dictionaries can be constructed for testing.
    """

    atoms: np.ndarray                 # 3L x K
    atom_groups: tuple[str, ...]
    topology: LandmarkTopology
    atom_names: tuple[str, ...] | None = None
    lambda_used: float | None = None
    activation_rank: tuple[int, ...] | None = None

    def __post_init__(self):
        atoms = _readonly(self.atoms)
        if atoms.ndim != 2:
            raise InputError(f"atoms must be a 3L x K matrix, got shape {atoms.shape}")
        if atoms.shape[0] != self.topology.coordinate_count:
            raise InputError(
                f"atoms have {atoms.shape[0]} rows but the topology has "
                f"{self.topology.coordinate_count} coordinate rows")
        if not np.isfinite(atoms).all():
            raise InputError("atom entries must be finite")
        groups = tuple(self.atom_groups)
        if atoms.shape[1] != len(groups) or len(groups) == 0:
            raise InputError(
                f"{atoms.shape[1]} atoms but {len(groups)} group assignments")
        for code in groups:
            if code not in GROUP_CODES:
                raise InputError(f"unknown group code {code!r}")
        names = self.atom_names
        if names is not None:
            names = tuple(names)
            if len(names) != len(groups):
                raise InputError(f"{len(names)} names for {len(groups)} atoms")
        if self.lambda_used is not None:
            lam = float(self.lambda_used)
            if not (np.isfinite(lam) and lam > 0):
                raise InputError("lambda_used must be a positive finite real")
            object.__setattr__(self, "lambda_used", lam)
        rank = self.activation_rank
        if rank is not None:
            rank = tuple(int(r) for r in rank)
            if sorted(rank) != list(range(len(groups))):
                raise InputError("activation_rank must be a permutation of the atom indices")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "atom_groups", groups)
        object.__setattr__(self, "atom_names", names)
        object.__setattr__(self, "activation_rank", rank)

    @property
    def atom_count(self) -> int:
        return self.atoms.shape[1]

    def atom(self, k: int) -> np.ndarray:
        return self.atoms[:, k]


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    """Per-frame behavioral signals: K basis-unit activations plus the three
    head-rotation angles (pitch, yaw, roll, radians)."""

    frame_rate: float
    bu_coefficients: np.ndarray  # T x K
    head_rotation: np.ndarray    # T x 3

    def __post_init__(self):
        rate = float(self.frame_rate)
        if not (np.isfinite(rate) and rate > 0):
            raise InputError("frame_rate must be a positive finite real")
        bu = _readonly(self.bu_coefficients)
        head = _readonly(self.head_rotation)
        if bu.ndim != 2 or head.ndim != 2 or head.shape[1] != 3:
            raise InputError(
                f"expected T x K coefficients and T x 3 rotations, got "
                f"{bu.shape} and {head.shape}")
        if bu.shape[0] != head.shape[0] or bu.shape[0] < 1:
            raise InputError(
                f"coefficients and rotations must share T >= 1 rows, got "
                f"{bu.shape[0]} and {head.shape[0]}")
        if not np.isfinite(bu).all() or not np.isfinite(head).all():
            raise InputError("series entries must be finite")
        object.__setattr__(self, "frame_rate", rate)
        object.__setattr__(self, "bu_coefficients", bu)
        object.__setattr__(self, "head_rotation", head)

    @property
    def frame_count(self) -> int:
        return self.bu_coefficients.shape[0]

    @property
    def channel_count(self) -> int:
        return self.bu_coefficients.shape[1] + 3


def canonical_names(atom_groups) -> tuple[str, ...]:
    """Group code + "-" + 1-based ordinal within the group, in storage order."""
    counts: dict[str, int] = {}
    names = []
    for code in atom_groups:
        counts[code] = counts.get(code, 0) + 1
        names.append(f"{code}-{counts[code]}")
    return tuple(names)


def synthesize_deformation(model: ExpressionModel, epsilon) -> DeformationSample:
    """Deformation produced by expression coefficients: basis @ epsilon."""
    eps = np.asarray(epsilon, dtype=float)
    if eps.ndim != 1 or eps.size != model.component_count:
        raise InputError(
            f"epsilon must have length {model.component_count}, got shape {eps.shape}")
    if not np.isfinite(eps).all():
        raise InputError("epsilon entries must be finite")
    return DeformationSample(model.basis @ eps)


def synthesize_from_dictionary(dictionary: BasisDictionary, z) -> DeformationSample:
    """Deformation produced by basis-unit coefficients: atoms @ z.

    Rows belonging to groups whose atoms all have zero coefficients come out
    exactly zero, because masked atom entries are stored as exact zeros.
    """
    codes = np.asarray(z, dtype=float)
    if codes.ndim != 1 or codes.size != dictionary.atom_count:
        raise InputError(
            f"z must have length {dictionary.atom_count}, got shape {codes.shape}")
    if not np.isfinite(codes).all():
        raise InputError("z entries must be finite")
    return DeformationSample(dictionary.atoms @ codes)


@dataclass(frozen=True)
class ValidationIssue:
    kind: str                       # "locality" | "norm" | "name" | "names_missing"
    message: str
    atom_index: int | None = None
    rows: tuple[int, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def summary(self) -> str:
        if self.ok:
            return "dictionary valid"
        return "\n".join(issue.message for issue in self.issues)


def validate_dictionary(dictionary: BasisDictionary) -> ValidationReport:
    """Report every violated dictionary invariant; never raises.

    Checks locality (exact zeros outside each atom's group rows), the unit
    L2-norm bound, and the name scheme.  An empty report means valid.
    """
    issues: list[ValidationIssue] = []
    topo = dictionary.topology
    outside_rows = {code: np.flatnonzero(~topo.row_mask(code))
                    for code in topo.group_codes()}
    for k, code in enumerate(dictionary.atom_groups):
        column = dictionary.atoms[:, k]
        bad = outside_rows[code][column[outside_rows[code]] != 0.0]
        if bad.size:
            issues.append(ValidationIssue(
                kind="locality",
                atom_index=k,
                rows=tuple(int(r) for r in bad[:8]),
                message=(f"atom {k} ({code}) has {bad.size} nonzero entries outside its "
                         f"group, first at row {int(bad[0])}")))
        norm = float(np.linalg.norm(column))
        if norm > 1.0 + ATOM_NORM_SLACK:
            issues.append(ValidationIssue(
                kind="norm",
                atom_index=k,
                message=f"atom {k} ({code}) has L2 norm {norm!r} > 1"))
    if dictionary.atom_names is None:
        issues.append(ValidationIssue(
            kind="names_missing", message="atom names are not assigned"))
    else:
        expected = canonical_names(dictionary.atom_groups)
        for k, (name, want) in enumerate(zip(dictionary.atom_names, expected)):
            if name != want:
                detail = "" if _NAME_PATTERN.match(name) else " (malformed)"
                issues.append(ValidationIssue(
                    kind="name",
                    atom_index=k,
                    message=f"atom {k} is named {name!r}, expected {want!r}{detail}"))
    return ValidationReport(tuple(issues))
