"""Batch learning of the localized basis.

Alternates full-batch sparse coding with a block-coordinate dictionary
update (masked least-squares refit per atom, projected onto the unit L2
ball).  Both halves are exact descent steps and the coding step is
warm-started from the previous codes, so the logged objective is
non-increasing across iterations.  Locality is structural: an atom's rows
outside its group are never written, so they stay exact zeros.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, replace

import numpy as np

from .coding import lasso_cd_batch
from .core import BasisDictionary, CoefficientSeries, canonical_names
from .errors import DegenerateInputError, InputError, NumericalError
from .topology import LandmarkTopology, proportional_allocation

INIT_MODES = ("masked_data_samples", "masked_gaussian")

# Per-outer-iteration budget for the warm-started coding pass.
_CODING_SWEEPS = 200
_CODING_TOL = 1e-8
# Data-sample draws per atom at initialization; the largest masked norm wins.
_INIT_CANDIDATES = 25


@dataclass(frozen=True)
class LearnConfig:
    atom_count: int = 50
    lam: float = 0.2
    group_allocation: Mapping[str, int] | None = None
    outer_iterations: int = 100
    seed: int = 0
    init: str = "masked_data_samples"
    convergence_tol: float = 1e-5

    def __post_init__(self):
        if self.atom_count < 1:
            raise InputError("atom_count must be positive")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InputError("lam must be a positive finite real")
        if self.outer_iterations < 1:
            raise InputError("outer_iterations must be positive")
        if self.init not in INIT_MODES:
            raise InputError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if not (np.isfinite(self.convergence_tol) and self.convergence_tol > 0):
            raise InputError("convergence_tol must be a positive finite real")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    mean_nonzero_fraction: float
    max_atom_norm: float


@dataclass(frozen=True)
class TrainingLog:
    records: tuple[IterationRecord, ...]
    stop_reason: str  # "converged" | "max_iterations"

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective


def resolve_allocation(topology: LandmarkTopology,
                       cfg: LearnConfig) -> list[tuple[str, int]]:
    """Atom counts per group in topology order; defaults to the proportional
    split with the remainder on the mouth."""
    if cfg.group_allocation is None:
        alloc = proportional_allocation(topology, cfg.atom_count)
    else:
        alloc = dict(cfg.group_allocation)
        missing = [c for c in topology.group_codes() if c not in alloc]
        extra = [c for c in alloc if c not in topology.group_codes()]
        if missing or extra:
            raise InputError(
                f"group_allocation must cover exactly the topology groups; "
                f"missing {missing}, unknown {extra}")
    if any(count < 1 for count in alloc.values()):
        raise InputError("every group must be allocated at least one atom")
    if sum(alloc.values()) != cfg.atom_count:
        raise InputError(
            f"allocation sums to {sum(alloc.values())}, expected {cfg.atom_count}")
    return [(code, alloc[code]) for code in topology.group_codes()]


def _initial_atoms(data, topology, groups, init, rng) -> np.ndarray:
    rows_of = {code: topology.rows(code) for code in topology.group_codes()}
    atoms = np.zeros((topology.coordinate_count, len(groups)))
    count = data.shape[0]
    for k, code in enumerate(groups):
        rows = rows_of[code]
        if init == "masked_gaussian":
            vec = rng.standard_normal(rows.size)
            atoms[rows, k] = vec / np.linalg.norm(vec)
            continue
        draws = rng.choice(count, size=min(count, _INIT_CANDIDATES), replace=False)
        best = None
        best_norm = -1.0
        for idx in draws:
            vec = data[idx, rows]
            norm = float(np.linalg.norm(vec))
            if norm > best_norm:
                best, best_norm = vec, norm
        if best_norm <= 0.0:
            # corpus is zero on this group; fall back to a random direction
            vec = rng.standard_normal(rows.size)
            atoms[rows, k] = vec / np.linalg.norm(vec)
        else:
            atoms[rows, k] = best / max(1.0, best_norm)
    return atoms


def update_dictionary_step(atoms, samples, codes, topology: LandmarkTopology,
                           atom_groups) -> np.ndarray:
    """One block-coordinate pass over atoms.

    Each used atom is refit by least squares against its own residual,
    restricted to its group rows, then projected onto the unit L2 ball; both
    steps are exact minimizations, so the fit+penalty objective cannot
    increase.  Atoms with an all-zero code column are left unchanged.
    """
    basis = np.array(atoms, dtype=float)
    data = np.atleast_2d(np.asarray(samples, dtype=float))
    z = np.atleast_2d(np.asarray(codes, dtype=float))
    if basis.shape[0] != topology.coordinate_count:
        raise InputError("atom rows do not match the topology")
    if data.shape[1] != basis.shape[0] or z.shape != (data.shape[0], basis.shape[1]):
        raise InputError(
            f"dimension mismatch: samples {data.shape}, codes {z.shape}, "
            f"atoms {basis.shape}")
    if len(tuple(atom_groups)) != basis.shape[1]:
        raise InputError("one group assignment is required per atom")
    residual = data - z @ basis.T
    for k, code in enumerate(atom_groups):
        zk = z[:, k]
        weight = float(zk @ zk)
        if weight == 0.0:
            continue
        rows = topology.rows(code)
        local = residual[:, rows] + np.outer(zk, basis[rows, k])
        target = (local.T @ zk) / weight
        norm = float(np.linalg.norm(target))
        if norm > 1.0:
            target = target / norm
        basis[rows, k] = target
        residual[:, rows] = local - np.outer(zk, target)
    return basis


def _revive_dead_atoms(basis, data, z, topology, groups) -> np.ndarray:
    """Reinitialize atoms unused for a whole iteration from the masked
    residuals of the worst-reconstructed samples.  Their code columns are
    zero, so this leaves the objective value unchanged."""
    dead = np.flatnonzero(~(z != 0.0).any(axis=0))
    if dead.size == 0:
        return basis
    basis = basis.copy()
    residual = data - z @ basis.T
    order = np.argsort(-np.linalg.norm(residual, axis=1), kind="stable")
    for slot, k in enumerate(dead):
        sample = residual[order[slot % order.size]]
        rows = topology.rows(groups[k])
        vec = sample[rows]
        norm = float(np.linalg.norm(vec))
        if norm <= 1e-12:
            continue
        basis[rows, k] = vec / norm
    return basis


def _objective(basis, data, z, lam) -> float:
    residual = data - z @ basis.T
    return float(0.5 * np.einsum("ij,ij->", residual, residual) + lam * np.abs(z).sum())


def learn(samples, topology: LandmarkTopology,
          cfg: LearnConfig | None = None) -> tuple[BasisDictionary, TrainingLog]:
    """Learn a localized basis from a corpus of deformation rows.

    Returns the dictionary (unit-ball atoms, exact zeros outside each atom's
    group, canonical names, allocation exactly as configured) and the
    training log with one record per outer iteration.
    """
    cfg = cfg or LearnConfig()
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != topology.coordinate_count:
        raise InputError(
            f"samples must be N x {topology.coordinate_count}, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise InputError("sample entries must be finite")
    if data.shape[0] < cfg.atom_count:
        raise InputError(
            f"need at least {cfg.atom_count} samples to learn {cfg.atom_count} atoms, "
            f"got {data.shape[0]}")
    if not (data != 0.0).any():
        raise DegenerateInputError("corpus is identically zero; nothing to learn")

    allocation = resolve_allocation(topology, cfg)
    groups = tuple(code for code, count in allocation for _ in range(count))
    rng = np.random.default_rng(cfg.seed)
    basis = _initial_atoms(data, topology, groups, cfg.init, rng)
    codes = np.zeros((data.shape[0], cfg.atom_count))

    records: list[IterationRecord] = []
    previous = None
    stop_reason = "max_iterations"
    for iteration in range(1, cfg.outer_iterations + 1):
        codes, _, _ = lasso_cd_batch(
            basis, data, cfg.lam, initial=codes, max_sweeps=_CODING_SWEEPS,
            tolerance=_CODING_TOL, kkt_slack=None, raise_on_limit=False)
        basis = update_dictionary_step(basis, data, codes, topology, groups)
        basis = _revive_dead_atoms(basis, data, codes, topology, groups)
        objective = _objective(basis, data, codes, cfg.lam)
        if not np.isfinite(objective):
            raise NumericalError(
                f"objective became non-finite at iteration {iteration}",
                iteration=iteration)
        records.append(IterationRecord(
            iteration=iteration,
            objective=objective,
            mean_nonzero_fraction=float((codes != 0.0).mean()),
            max_atom_norm=float(np.linalg.norm(basis, axis=0).max())))
        if previous is not None and abs(previous - objective) <= (
                cfg.convergence_tol * max(1.0, abs(previous))):
            stop_reason = "converged"
            break
        previous = objective

    dictionary = BasisDictionary(
        atoms=basis, atom_groups=groups, topology=topology,
        atom_names=canonical_names(groups), lambda_used=cfg.lam)
    return dictionary, TrainingLog(tuple(records), stop_reason)


def mean_abs_activation(dictionary: BasisDictionary, series) -> np.ndarray:
    """Mean absolute coefficient per atom, pooled over all frames of all series."""
    series = list(series)
    if not series:
        raise InputError("at least one coefficient series is required")
    for i, s in enumerate(series):
        if not isinstance(s, CoefficientSeries):
            raise InputError(f"series {i} is not a CoefficientSeries")
        if s.bu_coefficients.shape[1] != dictionary.atom_count:
            raise InputError(
                f"series {i} has {s.bu_coefficients.shape[1]} channels, dictionary "
                f"has {dictionary.atom_count} atoms")
    pooled = np.concatenate([np.abs(s.bu_coefficients) for s in series], axis=0)
    return pooled.mean(axis=0)


def rank_by_activation(dictionary: BasisDictionary, series) -> BasisDictionary:
    """Set activation_rank: atom indices by descending pooled mean |z|,
    ties broken by ascending original index.  Storage order is unchanged."""
    means = mean_abs_activation(dictionary, series)
    order = np.argsort(-means, kind="stable")
    return replace(dictionary, activation_rank=tuple(int(i) for i in order))


def assign_names(dictionary: BasisDictionary) -> BasisDictionary:
    """Set canonical atom names (group code + within-group ordinal)."""
    return replace(dictionary, atom_names=canonical_names(dictionary.atom_groups))
