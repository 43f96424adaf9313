"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``. Pivoting is deterministic: entering variable is the lowest-index
column with a negative reduced cost, leaving row is the minimum ratio with
ties broken by lowest basic variable index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPError

TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None = None
    fun: float | None = None
    iterations: int = 0

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])
    basis[row] = col


def _run(T: np.ndarray, basis: list[int], ncols: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Iterate Bland pivots on tableau ``T`` (objective in the last row)."""
    m = T.shape[0] - 1
    for it in range(max_iter):
        cost = T[-1, :ncols]
        neg = np.flatnonzero(cost < -tol)
        if neg.size == 0:
            return OPTIMAL, it
        col = int(neg[0])
        column = T[:m, col]
        pos = np.flatnonzero(column > tol)
        if pos.size == 0:
            return UNBOUNDED, it
        ratios = T[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, basis, row, col)
    raise LPError(f"simplex did not converge in {max_iter} iterations")


def lp_solve(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    *,
    tol: float = TOL,
    max_iter: int = 50_000,
) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if A_ub.shape[1] != n or A_eq.shape[1] != n:
        raise ValueError("constraint matrices must have one column per variable")
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Columns: originals, one slack per inequality, then artificials as needed.
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    basis: list[int] = []
    art_rows = []
    for i in range(m):
        if i < m_ub and not flip[i]:
            basis.append(n + i)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_real = n + m_ub
    n_art = len(art_rows)
    T = np.zeros((m + 1, n_real + n_art + 1))
    T[:m, :n_real] = A
    T[:m, -1] = b
    for k, i in enumerate(art_rows):
        T[i, n_real + k] = 1.0
        basis[i] = n_real + k

    iterations = 0
    if n_art:
        # Phase 1: minimize the sum of artificials.
        T[-1, n_real : n_real + n_art] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status, it = _run(T, basis, n_real + n_art, tol, max_iter)
        iterations += it
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if -T[-1, -1] > tol * scale:
            return LPResult(INFEASIBLE, iterations=iterations)
        # Drive remaining artificials out of the basis; drop redundant rows.
        keep = []
        for i in range(m):
            if basis[i] >= n_real:
                nz = np.flatnonzero(np.abs(T[i, :n_real]) > tol)
                if nz.size == 0:
                    continue
                _pivot(T, basis, i, int(nz[0]))
            keep.append(i)
        T = np.vstack([T[keep][:, list(range(n_real)) + [-1]], np.zeros((1, n_real + 1))])
        basis = [basis[i] for i in keep]

    # Phase 2 objective row: reduced costs c - c_B B^-1 A.
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, bi in enumerate(basis):
        if bi < n and c[bi] != 0:
            T[-1] -= c[bi] * T[i]
    status, it = _run(T, basis, n_real, tol, max_iter)
    iterations += it
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=iterations)
    x_full = np.zeros(n_real)
    for i, bi in enumerate(basis):
        x_full[bi] = T[i, -1]
    x = np.clip(x_full[:n], 0.0, None)
    return LPResult(OPTIMAL, x, float(c @ x), iterations)
