"""Seeded synthetic generators and matching oracles.

Everything here is a pure function of its spec and seed, so tests (and the
``synth`` CLI subcommand) get bit-identical data on every run.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BasisDictionary, CoefficientSeries, canonical_names
from .errors import GenerationError, InputError
from .topology import LandmarkTopology, proportional_allocation

_REJECTION_TRIES = 500


@dataclass(frozen=True)
class CoefficientDistribution:
    """Magnitudes are uniform in [min_magnitude, max_magnitude]; signs are
    either all positive or independently random."""

    min_magnitude: float = 0.5
    max_magnitude: float = 1.5
    signs: str = "random"  # "random" | "positive"

    def __post_init__(self):
        if not (np.isfinite(self.min_magnitude) and self.min_magnitude > 0):
            raise InputError("min_magnitude must be a positive finite real")
        if not (np.isfinite(self.max_magnitude)
                and self.max_magnitude >= self.min_magnitude):
            raise InputError("max_magnitude must be at least min_magnitude")
        if self.signs not in ("random", "positive"):
            raise InputError(f"signs must be 'random' or 'positive', got {self.signs!r}")


@dataclass(frozen=True)
class SynthSpec:
    topology: LandmarkTopology
    planted_atom_count: int = 12
    per_group_allocation: Mapping[str, int] | None = None
    samples: int = 2000
    active_atoms_per_sample: int = 3
    coefficients: CoefficientDistribution = field(default_factory=CoefficientDistribution)
    noise_sigma: float = 0.01
    seed: int = 0
    max_pairwise_coherence: float = 0.6

    def __post_init__(self):
        if self.planted_atom_count < 1 or self.samples < 1:
            raise InputError("planted_atom_count and samples must be positive")
        if not 1 <= self.active_atoms_per_sample <= self.planted_atom_count:
            raise InputError(
                "active_atoms_per_sample must lie in [1, planted_atom_count]")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InputError("noise_sigma must be a nonnegative finite real")
        if not 0.0 < self.max_pairwise_coherence <= 1.0:
            raise InputError("max_pairwise_coherence must lie in (0, 1]")


def _resolve_allocation(spec: SynthSpec) -> list[tuple[str, int]]:
    if spec.per_group_allocation is None:
        alloc = proportional_allocation(spec.topology, spec.planted_atom_count)
    else:
        alloc = dict(spec.per_group_allocation)
        codes = spec.topology.group_codes()
        if sorted(alloc) != sorted(codes):
            raise InputError("per_group_allocation must cover exactly the six groups")
    if any(v < 1 for v in alloc.values()):
        raise InputError("every group needs at least one planted atom")
    if sum(alloc.values()) != spec.planted_atom_count:
        raise InputError(
            f"allocation sums to {sum(alloc.values())}, expected "
            f"{spec.planted_atom_count}")
    return [(code, alloc[code]) for code in spec.topology.group_codes()]


def generate_planted_corpus(spec: SynthSpec):
    """Draw a ground-truth dictionary and a corpus synthesized from it.

    Atoms are unit-norm random directions on their group rows with pairwise
    |cos| at most ``max_pairwise_coherence`` within each group (atoms of
    different groups are orthogonal outright, having disjoint supports).
    Each sample activates ``active_atoms_per_sample`` distinct atoms and adds
    iid Gaussian noise.  Returns (samples N x 3L, truth, true_codes N x K).
    """
    allocation = _resolve_allocation(spec)
    groups = tuple(code for code, count in allocation for _ in range(count))
    rng = np.random.default_rng(spec.seed)
    topo = spec.topology
    atoms = np.zeros((topo.coordinate_count, len(groups)))
    accepted: dict[str, list[np.ndarray]] = {code: [] for code, _ in allocation}
    for k, code in enumerate(groups):
        rows = topo.rows(code)
        for _ in range(_REJECTION_TRIES):
            vec = rng.standard_normal(rows.size)
            vec /= np.linalg.norm(vec)
            if all(abs(float(vec @ other)) <= spec.max_pairwise_coherence
                   for other in accepted[code]):
                break
        else:
            raise GenerationError(
                f"could not draw atom {k} for group {code} with pairwise |cos| <= "
                f"{spec.max_pairwise_coherence} in {_REJECTION_TRIES} tries; the "
                f"group may be too small for the requested incoherence")
        accepted[code].append(vec)
        atoms[rows, k] = vec
    truth = BasisDictionary(
        atoms=atoms, atom_groups=groups, topology=topo,
        atom_names=canonical_names(groups))

    k_count = len(groups)
    codes = np.zeros((spec.samples, k_count))
    dist = spec.coefficients
    for n in range(spec.samples):
        active = rng.choice(k_count, size=spec.active_atoms_per_sample, replace=False)
        mags = rng.uniform(dist.min_magnitude, dist.max_magnitude,
                           size=active.size)
        if dist.signs == "random":
            mags = mags * rng.choice([-1.0, 1.0], size=active.size)
        codes[n, active] = mags
    data = codes @ atoms.T
    if spec.noise_sigma > 0:
        data = data + spec.noise_sigma * rng.standard_normal(data.shape)
    return data, truth, codes


@dataclass(frozen=True)
class AtomMatch:
    group: str
    truth_index: int
    learned_index: int
    abs_cosine: float


@dataclass(frozen=True)
class MatchReport:
    matches: tuple[AtomMatch, ...]
    group_count_mismatches: tuple[str, ...]

    @property
    def min_abs_cosine(self) -> float:
        return min(m.abs_cosine for m in self.matches)

    @property
    def mean_abs_cosine(self) -> float:
        return float(np.mean([m.abs_cosine for m in self.matches]))

    def permutation(self) -> dict[int, int]:
        return {m.truth_index: m.learned_index for m in self.matches}


def _unit_columns(matrix) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=0)
    return matrix / np.where(norms == 0.0, 1.0, norms)


def match_dictionaries(learned: BasisDictionary,
                       truth: BasisDictionary) -> MatchReport:
    """Optimal group-wise assignment maximizing total |cos| between atoms.

    Matching never crosses groups.  A group atom-count mismatch is reported
    and matching proceeds on the smaller count.
    """
    if learned.topology != truth.topology:
        raise InputError("dictionaries use different topologies")
    matches: list[AtomMatch] = []
    mismatched: list[str] = []
    for code in truth.topology.group_codes():
        learned_idx = [k for k, g in enumerate(learned.atom_groups) if g == code]
        truth_idx = [k for k, g in enumerate(truth.atom_groups) if g == code]
        if len(learned_idx) != len(truth_idx):
            mismatched.append(code)
        if not learned_idx or not truth_idx:
            continue
        cosines = np.abs(
            _unit_columns(truth.atoms[:, truth_idx]).T
            @ _unit_columns(learned.atoms[:, learned_idx]))
        rows, cols = linear_sum_assignment(-cosines)
        for r, c in zip(rows, cols):
            matches.append(AtomMatch(
                group=code, truth_index=truth_idx[r], learned_index=learned_idx[c],
                abs_cosine=float(cosines[r, c])))
    matches.sort(key=lambda m: m.truth_index)
    return MatchReport(tuple(matches), tuple(mismatched))


@dataclass(frozen=True)
class LabeledSeriesSpec:
    """Two-class behavioral series: class A embeds a lagged coupling between
    two channels, class B channels are independent (both independent when
    ``coupling`` is off, as a negative control)."""

    videos_per_class: int = 30
    bu_channel_count: int = 4
    frames: int = 240
    frame_rate: float = 30.0
    coupled_channels: tuple[int, int] = (0, 1)
    coupling_lag_frames: int = 3
    coupling_noise: float = 0.05
    coupling: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.videos_per_class < 1 or self.bu_channel_count < 1:
            raise InputError("videos_per_class and bu_channel_count must be positive")
        if self.frames < 2:
            raise InputError("frames must be at least 2")
        if not (np.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise InputError("frame_rate must be a positive finite real")
        total = self.bu_channel_count + 3
        i, j = self.coupled_channels
        if i == j or not (0 <= i < total and 0 <= j < total):
            raise InputError(
                f"coupled_channels must be two distinct indices in [0, {total})")
        if not 0 <= self.coupling_lag_frames < self.frames:
            raise InputError("coupling_lag_frames must lie in [0, frames)")
        if not (np.isfinite(self.coupling_noise) and self.coupling_noise >= 0):
            raise InputError("coupling_noise must be a nonnegative finite real")


def generate_labeled_series(spec: LabeledSeriesSpec) -> list[tuple[CoefficientSeries, str]]:
    """Class "A" videos first, then class "B"; fully seeded."""
    rng = np.random.default_rng(spec.seed)
    total = spec.bu_channel_count + 3
    out: list[tuple[CoefficientSeries, str]] = []
    for label in ("A", "B"):
        for _ in range(spec.videos_per_class):
            signals = rng.standard_normal((spec.frames, total))
            if label == "A" and spec.coupling:
                src, dst = spec.coupled_channels
                lag = spec.coupling_lag_frames
                span = spec.frames - lag
                coupled = signals[:span, src]
                if spec.coupling_noise > 0:
                    coupled = coupled + spec.coupling_noise * rng.standard_normal(span)
                signals[lag:, dst] = coupled
            out.append((CoefficientSeries(
                frame_rate=spec.frame_rate,
                bu_coefficients=signals[:, :spec.bu_channel_count],
                head_rotation=signals[:, spec.bu_channel_count:]), label))
    return out
