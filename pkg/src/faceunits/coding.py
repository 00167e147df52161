"""Sparse coding of deformations against a basis dictionary.

Solves the per-sample L1-regularized least squares problem

    min_z  0.5 * ||d - W z||_2^2  +  lam * ||z||_1

by cyclic coordinate descent with soft thresholding.  The update order is
fixed and nothing is randomized, so identical inputs give bit-identical
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BasisDictionary, DeformationSample
from .errors import ConvergenceError, InputError

#: Acceptance slack for the subgradient optimality check, relative to
#: max(1, ||d||_2).  Half the 1e-6 contract bound, so accepted solutions
#: satisfy the contract with margin.
_KKT_SLACK = 5e-7


@dataclass(frozen=True)
class CodingConfig:
    """Solver settings.  ``tolerance`` bounds the largest single-coordinate
    update within a sweep; iteration stops once it falls below tolerance and
    the subgradient optimality conditions hold."""

    lam: float = 0.2
    max_iterations: int = 1000
    tolerance: float = 1e-8

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InputError("lam must be a positive finite real")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be at least 1")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise InputError("tolerance must be a positive finite real")


def soft_threshold(x, threshold):
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def _kkt_violation(atoms, targets, codes, lam) -> np.ndarray:
    """Worst subgradient-condition violation per target row.

    For z_k = 0 the condition is |w_k . r| <= lam; for z_k != 0 it is
    w_k . r = lam * sign(z_k), with r the residual d - W z.
    """
    grad = (targets - codes @ atoms.T) @ atoms
    nonzero = codes != 0.0
    slack_zero = np.where(nonzero, -np.inf, np.abs(grad) - lam)
    slack_sign = np.where(nonzero, np.abs(grad - lam * np.sign(codes)), -np.inf)
    return np.maximum(slack_zero, slack_sign).max(axis=1)


def lasso_cd_batch(atoms, targets, lam, *, initial=None, max_sweeps=1000,
                   tolerance=1e-8, kkt_slack=_KKT_SLACK, raise_on_limit=True):
    """Cyclic coordinate descent for every row of ``targets`` at once.

    All rows are advanced in lockstep (coordinate k of every row, then
    coordinate k+1), which is arithmetically the same as running cyclic CD on
    each row independently.  Every update is an exact single-coordinate
    minimization, so the summed objective never increases; warm starts via
    ``initial`` preserve that guarantee.

    Returns (codes, sweeps_run, last_max_update).
    """
    basis = np.asarray(atoms, dtype=float)
    data = np.atleast_2d(np.asarray(targets, dtype=float))
    count = data.shape[0]
    k_count = basis.shape[1]
    if data.shape[1] != basis.shape[0]:
        raise InputError(
            f"targets have {data.shape[1]} columns, dictionary expects {basis.shape[0]}")
    gram = basis.T @ basis
    corr = data @ basis
    diag = np.diag(gram).copy()
    usable = np.flatnonzero(diag > 0.0)
    if initial is None:
        codes = np.zeros((count, k_count))
    else:
        codes = np.array(initial, dtype=float)
        if codes.shape != (count, k_count):
            raise InputError(
                f"initial codes have shape {codes.shape}, expected {(count, k_count)}")
        codes[:, diag <= 0.0] = 0.0
    if count == 0:
        return codes, 0, 0.0
    scale = None
    if kkt_slack is not None:
        scale = kkt_slack * np.maximum(1.0, np.linalg.norm(data, axis=1))
    last = np.inf
    for sweep in range(1, max_sweeps + 1):
        max_update = 0.0
        for k in usable:
            rho = corr[:, k] - codes @ gram[:, k] + diag[k] * codes[:, k]
            updated = soft_threshold(rho, lam) / diag[k]
            step = float(np.abs(updated - codes[:, k]).max())
            if step > max_update:
                max_update = step
            codes[:, k] = updated
        last = max_update
        if max_update < tolerance:
            if scale is None or bool(
                    np.all(_kkt_violation(basis, data, codes, lam) <= scale)):
                return codes, sweep, max_update
    if raise_on_limit:
        raise ConvergenceError(
            f"coordinate descent did not converge within {max_sweeps} sweeps "
            f"(last max coordinate update {last:.3e})",
            iterations=max_sweeps, last_update=last)
    return codes, max_sweeps, last


def encode(dictionary: BasisDictionary, sample: DeformationSample,
           cfg: CodingConfig | None = None) -> np.ndarray:
    """Sparse coefficients for one deformation.

    The returned vector minimizes 0.5*||d - W z||^2 + lam*||z||_1 and
    satisfies the LASSO subgradient conditions within
    1e-6 * max(1, ||d||_2).  Raises ConvergenceError (with iteration count
    and final update size) if the budget runs out first.
    """
    cfg = cfg or CodingConfig()
    vec = sample.deformation
    if vec.size != dictionary.atoms.shape[0]:
        raise InputError(
            f"sample has {vec.size} rows, dictionary expects {dictionary.atoms.shape[0]}")
    codes, _, _ = lasso_cd_batch(
        dictionary.atoms, vec[None, :], cfg.lam,
        max_sweeps=cfg.max_iterations, tolerance=cfg.tolerance)
    return codes[0]


def encode_series(dictionary: BasisDictionary, frames,
                  cfg: CodingConfig | None = None) -> np.ndarray:
    """encode() applied frame by frame; returns a T x K matrix (0 x K when
    the sequence is empty).  Rows are independent, so permuting the input
    frames permutes the output rows identically."""
    cfg = cfg or CodingConfig()
    rows = []
    for t, frame in enumerate(frames):
        try:
            rows.append(encode(dictionary, frame, cfg))
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"frame {t}: {exc}", iterations=exc.iterations,
                last_update=exc.last_update, frame=t) from exc
        except InputError as exc:
            raise InputError(f"frame {t}: {exc}") from exc
    if not rows:
        return np.zeros((0, dictionary.atom_count))
    return np.vstack(rows)


def objective_value(dictionary: BasisDictionary, samples, codes, lam) -> float:
    """Sum over samples of 0.5*||d_n - W z_n||_2^2 + lam*||z_n||_1.

    The data term is the squared form, under which the default lam is
    calibrated.
    """
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise InputError("lam must be a positive finite real")
    data = np.atleast_2d(np.asarray(samples, dtype=float))
    z = np.atleast_2d(np.asarray(codes, dtype=float))
    if data.shape[1] != dictionary.atoms.shape[0]:
        raise InputError(
            f"samples have {data.shape[1]} columns, dictionary expects "
            f"{dictionary.atoms.shape[0]}")
    if z.shape != (data.shape[0], dictionary.atom_count):
        raise InputError(
            f"codes have shape {z.shape}, expected "
            f"{(data.shape[0], dictionary.atom_count)}")
    residual = data - z @ dictionary.atoms.T
    return float(0.5 * np.einsum("ij,ij->", residual, residual) + lam * np.abs(z).sum())
