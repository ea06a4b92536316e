"""Small dense linear-algebra helpers shared by the model modules."""

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import SingularMatrix

#: condition estimates above this are treated as singular
SINGULAR_COND = 1e12


def cond_estimate(a):
    """1-norm condition number estimate from an LU factorization (LAPACK ``xGECON``)."""
    a = np.asarray(a)
    if a.size == 0:
        return 1.0
    anorm = np.linalg.norm(a, 1)
    if anorm == 0.0 or not np.all(np.isfinite(a)):
        return np.inf
    lu, piv, info = (lapack.zgetrf if np.iscomplexobj(a) else lapack.dgetrf)(a)
    if info > 0:
        return np.inf
    gecon = lapack.zgecon if np.iscomplexobj(a) else lapack.dgecon
    rcond, info = gecon(lu, anorm, norm="1")
    if rcond == 0.0:
        return np.inf
    return 1.0 / rcond


def checked_inv(a, which, limit=SINGULAR_COND, hint=""):
    """Return ``(inv(a), cond)`` or raise :class:`SingularMatrix`."""
    cond = cond_estimate(a)
    if not np.isfinite(cond) or cond > limit:
        raise SingularMatrix(which, cond, hint)
    try:
        inv = linalg.inv(a)
    except linalg.LinAlgError:
        raise SingularMatrix(which, np.inf, hint) from None
    return inv, cond


def checked_solve(a, b, which, limit=SINGULAR_COND, hint=""):
    cond = cond_estimate(a)
    if not np.isfinite(cond) or cond > limit:
        raise SingularMatrix(which, cond, hint)
    return linalg.solve(a, b)
