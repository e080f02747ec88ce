"""Ridge solve via normal equations and a Cholesky factorization."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg

from ..exceptions import DegenerateDesignError, RankDeficiencyWarning

JITTER = 1e-8
_RCOND = 1e-12


def ridge_solve(X: np.ndarray, y: np.ndarray, penalty: np.ndarray, jitter: bool = True):
    """Minimize ``||y - Xw||^2 + sum(penalty * w**2)``.

    Columns that are identically zero carry no information; their weight is
    fixed at 0 and they are left out of the solve. The Gram matrix is
    equilibrated by its diagonal before factorization. If
    the equilibrated system is numerically singular, ``jitter`` adds a
    ``1e-8`` ridge to the unpenalized coordinates with a warning; otherwise a
    :class:`DegenerateDesignError` is raised.

    Returns
    -------
    w : ndarray
    jittered : bool
    """
    penalty = np.asarray(penalty, dtype=float)
    live = np.any(X != 0, axis=0)
    if not live.all():
        w = np.zeros(X.shape[1])
        if live.any():
            w[live], jittered = ridge_solve(X[:, live], y, penalty[live], jitter)
            return w, jittered
        return w, False
    A = X.T @ X
    A[np.diag_indices_from(A)] += penalty
    b = X.T @ y
    d = np.sqrt(np.diag(A))
    d[d == 0] = 1.0
    As = A / np.outer(d, d)
    bs = b / d
    ev = np.linalg.eigvalsh(As)
    jittered = False
    if ev[0] <= _RCOND * max(ev[-1], 1.0):
        if not jitter:
            raise DegenerateDesignError(
                f"design matrix is rank deficient (min/max eigenvalue {ev[0]:.3g}/{ev[-1]:.3g})"
            )
        warnings.warn("rank-deficient design; adding ridge jitter to unpenalized terms",
                      RankDeficiencyWarning, stacklevel=3)
        As[np.diag_indices_from(As)] += np.where(penalty > 0, 0.0, JITTER)
        jittered = True
    try:
        c = linalg.cho_factor(As, lower=False, check_finite=False)
        z = linalg.cho_solve(c, bs, check_finite=False)
    except linalg.LinAlgError as exc:
        raise DegenerateDesignError(f"normal equations not positive definite: {exc}") from exc
    return z / d, jittered
