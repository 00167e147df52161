"""Independent brute-force reference implementations used only by tests.

These deliberately avoid the library's code paths: plain loops, exhaustive
enumeration, or a generic convex solver.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def matvec_by_summation(matrix, coeffs):
    """Column-by-column accumulation of matrix @ coeffs."""
    out = np.zeros(matrix.shape[0])
    for m in range(matrix.shape[1]):
        out = out + coeffs[m] * matrix[:, m]
    return out


def lasso_objective(atoms, target, z, lam):
    r = target - atoms @ z
    return 0.5 * float(r @ r) + lam * float(np.abs(z).sum())


def lasso_by_enumeration(atoms, target, lam):
    """Exhaustive active-set enumeration for small K.

    For every support and sign pattern, solve the stationarity system
    (W_S^T W_S) z_S = W_S^T d - lam * s and keep the candidate with the
    smallest exactly-evaluated objective.  The true LASSO minimizer's
    support/sign combination is among the candidates, so the argmin is the
    solution.
    """
    k = atoms.shape[1]
    best = np.zeros(k)
    best_obj = lasso_objective(atoms, target, best, lam)
    for size in range(1, k + 1):
        for support in itertools.combinations(range(k), size):
            sub = atoms[:, support]
            gram = sub.T @ sub
            rhs_base = sub.T @ target
            for signs in itertools.product((-1.0, 1.0), repeat=size):
                rhs = rhs_base - lam * np.asarray(signs)
                try:
                    z_sub = np.linalg.solve(gram, rhs)
                except np.linalg.LinAlgError:
                    continue
                z = np.zeros(k)
                z[list(support)] = z_sub
                obj = lasso_objective(atoms, target, z, lam)
                if obj < best_obj:
                    best_obj = obj
                    best = z
    return best


def pearson(xs, ys):
    """Plain-loop Pearson correlation; assumes both sequences vary."""
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def wcc_direct(window, lag_range, lag_step):
    """O(T^2 * lags) per-entry evaluation of the window correlation matrix,
    mirroring the contract: max-|.| over the symmetric lag set (first maximum
    in ascending lag order), constant-channel rows/columns zero, diagonal 1
    for varying channels."""
    window = np.asarray(window, dtype=float)
    frames, q = window.shape
    const = [bool(np.all(window[:, c] == window[0, c])) for c in range(q)]
    lags = sorted({sign * lag for lag in range(0, lag_range + 1, lag_step)
                   for sign in (1, -1)})
    out = np.zeros((q, q))
    for i in range(q):
        for j in range(q):
            if const[i] or const[j]:
                continue
            if i == j:
                out[i, j] = 1.0
                continue
            best = 0.0
            best_abs = -1.0
            for lag in lags:
                xs, ys = [], []
                for t in range(frames):
                    u = t + lag
                    if 0 <= u < frames:
                        xs.append(window[t, i])
                        ys.append(window[u, j])
                if len(set(xs)) < 2 or len(set(ys)) < 2:
                    r = 0.0
                else:
                    r = pearson(xs, ys)
                if abs(r) > best_abs:
                    best_abs = abs(r)
                    best = r
            out[i, j] = min(1.0, max(-1.0, best))
    return out


def svm_by_qp(features, labels, c):
    """Generic convex-QP solve of the augmented soft-margin SVM.

    Same formulation as the implementation (bias as a regularized constant-1
    feature) but solved by an interior-point method via cvxpy.
    Returns (weights, bias).
    """
    import cvxpy as cp

    data = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    aug = np.hstack([data, np.ones((data.shape[0], 1))])
    w = cp.Variable(aug.shape[1])
    margins = cp.multiply(y, aug @ w)
    objective = 0.5 * cp.sum_squares(w) + c * cp.sum(cp.pos(1 - margins))
    problem = cp.Problem(cp.Minimize(objective))
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"oracle QP failed: {problem.status}")
    sol = np.asarray(w.value).ravel()
    return sol[:-1], float(sol[-1])


def component_summary_direct(weight_rows, q):
    """Per-component mean |weight| over all row-major pair features that
    include the component, one value per weight row."""
    rows = np.atleast_2d(np.asarray(weight_rows, dtype=float))
    out = np.zeros((rows.shape[0], q))
    for comp in range(q):
        feats = sorted({comp * q + j for j in range(q)}
                       | {i * q + comp for i in range(q)})
        for s in range(rows.shape[0]):
            out[s, comp] = np.mean([abs(rows[s, f]) for f in feats])
    return out
