"""Pure numpy implementation of the Monte Carlo kernels.

Mirrors the signatures of the compiled ``_kernels`` module.
"""

import numpy as np

from .distributions import base_quantile
from .streams import uniforms_from_raw

NAME = "python"


def _quantile(family, params, loc, scale, u):
    return loc + scale * base_quantile(family, params, u)


def _table_mean(u, table, lo, hi):
    m = table.size - 1
    t = np.clip(u, lo, hi)
    pos = (t - lo) * (m / (hi - lo))
    i = np.minimum(pos.astype(np.int64), m - 1)
    f = pos - i
    vals = table[i] + f * (table[i + 1] - table[i])
    return vals.sum(axis=1) / u.shape[1]


def block_statistics(raw, family, params, loc, scale, coeffs, k, m,
                     sort_middle=True, cv_table=None, cv_lo=0.0, cv_hi=1.0):
    """Trimmed L-statistics of a block of samples.

    ``raw`` is ``(B, n)`` uint64; row ``r`` is turned into uniforms, trimmed
    to order statistics ``k+1 .. n-m``, mapped through the quantile, and
    weighted by each row of ``coeffs`` (``(P, n-k-m)``).  Returns
    ``(values (B, P), cv (B,) or None)`` where ``cv`` is the row mean of the
    tabulated function at ``clip(u, cv_lo, cv_hi)``.
    """
    raw = np.asarray(raw, dtype=np.uint64)
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    params = np.asarray(params, dtype=float)
    n = raw.shape[1]
    u = uniforms_from_raw(raw)
    cv = None if cv_table is None else _table_mean(u, np.asarray(cv_table, dtype=float), cv_lo, cv_hi)
    top = n - m - 1
    kth = sorted({i for i in (k, top) if 0 <= i < n})
    mid = np.partition(u, kth, axis=1)[:, k:n - m]
    if sort_middle:
        mid.sort(axis=1)
    x = _quantile(family, params, loc, scale, mid)
    return x @ coeffs.T / n, cv


def sorted_block(raw, family, params, loc, scale):
    """Fully sorted quantile-transformed rows, ``(B, n)``."""
    u = np.sort(uniforms_from_raw(np.asarray(raw, dtype=np.uint64)), axis=1)
    return _quantile(family, np.asarray(params, dtype=float), loc, scale, u)
