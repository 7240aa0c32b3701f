"""Least-angle first-entry path over an augmented design [X | dummies].

Only the *order* in which variables first join the active set matters to the
selector, so the runner tracks entries and supports lazy extension: the path
advances just far enough for the requested number of dummies to have
entered, and can be resumed later with a larger budget.

Implementation notes:

* columns are normalized to unit l2 norm internally; entry correlations tie
  exactly for duplicated columns and ties break toward the lower index;
* the active-set Gram factor is maintained by Cholesky append; a candidate
  whose appended pivot is (numerically) zero is collinear with the active
  set, can never enter, and is dropped from candidacy for good;
* the path saturates when no eligible candidate remains or the residual
  correlation hits zero; a saturated path reports whether the dummy budget
  was reached so the caller can enlarge the dummy block.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ContractViolation, DegenerateSignalError

_PIVOT_TOL = 1e-10
_CORR_TOL = 1e-12


class LarsPathRunner:
    """Incremental first-entry LARS path over ``[X | dummies]``."""

    def __init__(self, x_real: np.ndarray, dummies: np.ndarray, y: np.ndarray):
        if x_real.shape[0] != dummies.shape[0] or x_real.shape[0] != y.shape[0]:
            raise ContractViolation("row mismatch between design, dummies and response")
        if np.ptp(y) == 0:
            raise DegenerateSignalError("response is constant; no path exists")
        full = np.hstack([x_real, dummies]).astype(float)
        norms = np.linalg.norm(full, axis=0)
        self._degenerate = norms <= 0
        norms[self._degenerate] = 1.0
        self.x = full / norms
        self.y = np.asarray(y, dtype=float)
        self.n, self.m = self.x.shape
        self.p_real = x_real.shape[1]

        self.c = self.x.T @ self.y
        self._c0 = float(np.max(np.abs(self.c))) if self.m else 0.0
        self.entry_order: list[int] = []
        self.dummy_count = 0
        self.saturated = False
        self._active_mask = np.zeros(self.m, dtype=bool)
        self._eligible = ~self._degenerate
        self._chol: np.ndarray | None = None  # lower Cholesky of active Gram
        self._signs: list[float] = []

    # -- internals ---------------------------------------------------------

    def _try_append(self, j: int) -> bool:
        """Grow the active Cholesky factor with column j; False if collinear."""
        xj = self.x[:, j]
        if self._chol is None:
            self._chol = np.array([[1.0]])  # unit-norm column
            return True
        g = self.x[:, self.entry_order].T @ xj
        w = solve_triangular(self._chol, g, lower=True)
        d2 = 1.0 - float(w @ w)
        if d2 <= _PIVOT_TOL:
            return False
        k = self._chol.shape[0]
        grown = np.zeros((k + 1, k + 1))
        grown[:k, :k] = self._chol
        grown[k, :k] = w
        grown[k, k] = np.sqrt(d2)
        self._chol = grown
        return True

    def _step(self) -> None:
        eligible = self._eligible & ~self._active_mask
        if not eligible.any():
            self.saturated = True
            return
        abs_c = np.where(eligible, np.abs(self.c), -np.inf)
        c_max = float(abs_c.max())
        if c_max <= _CORR_TOL * max(1.0, self._c0):
            self.saturated = True
            return

        j = int(np.argmax(abs_c))  # lowest index on exact ties
        while not self._try_append(j):
            self._eligible[j] = False
            eligible[j] = False
            if not eligible.any():
                self.saturated = True
                return
            abs_c = np.where(eligible, np.abs(self.c), -np.inf)
            c_max = float(abs_c.max())
            if c_max <= _CORR_TOL * max(1.0, self._c0):
                self.saturated = True
                return
            j = int(np.argmax(abs_c))

        self.entry_order.append(j)
        self._active_mask[j] = True
        self._signs.append(float(np.sign(self.c[j])) or 1.0)
        if j >= self.p_real:
            self.dummy_count += 1

        # equiangular direction over the active set
        s = np.asarray(self._signs)
        tmp = solve_triangular(self._chol, s, lower=True)
        ga_inv_s = solve_triangular(self._chol.T, tmp, lower=False)
        aa = 1.0 / np.sqrt(float(s @ ga_inv_s))
        w = aa * ga_inv_s
        u = self.x[:, self.entry_order] @ w
        a = self.x.T @ u

        rest = self._eligible & ~self._active_mask
        if rest.any():
            c_r, a_r = self.c[rest], a[rest]
            with np.errstate(divide="ignore", invalid="ignore"):
                cands = np.concatenate(
                    [(c_max - c_r) / (aa - a_r), (c_max + c_r) / (aa + a_r)]
                )
            cands = cands[np.isfinite(cands) & (cands > _CORR_TOL)]
            gamma = float(cands.min()) if cands.size else c_max / aa
        else:
            gamma = c_max / aa  # final jump to the least-squares fit
        self.c = self.c - gamma * a

    # -- public ------------------------------------------------------------

    def extend(self, n_dummies: int) -> None:
        """Advance the path until ``n_dummies`` dummies entered (or saturation)."""
        while self.dummy_count < n_dummies and not self.saturated:
            self._step()

    def run_all(self) -> None:
        while not self.saturated:
            self._step()


def forward_path(x_real, dummies, y, stop_dummies: int) -> tuple[list[int], bool]:
    """Entry order of ``[x_real | dummies]`` until the ``stop_dummies``-th dummy.

    Returns (entry order including that dummy, budget_reached flag).
    """
    runner = LarsPathRunner(
        np.asarray(x_real, dtype=float),
        np.asarray(dummies, dtype=float),
        np.asarray(y, dtype=float),
    )
    runner.extend(stop_dummies)
    return runner.entry_order, runner.dummy_count >= stop_dummies
