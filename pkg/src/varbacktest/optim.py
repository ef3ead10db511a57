"""Nelder-Mead simplex minimisation for small unconstrained problems.

Written for two- and three-dimensional likelihoods evaluated millions of
times inside Monte Carlo loops, so it works on plain Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class SimplexResult:
    x: list
    fun: float
    nit: int
    nfev: int
    converged: bool


def nelder_mead(f, x0, step=0.1, *, ftol=1e-10, xtol=1e-8, max_iter=500,
                reflect=1.0, expand=2.0, contract=0.5, shrink=0.5) -> SimplexResult:
    """Minimise ``f`` starting from ``x0``.

    Terminates when both the spread of function values and the largest
    vertex distance from the best point fall below ``ftol`` and ``xtol``
    (the same rule as O'Neill's AS47 and scipy's implementation).
    """
    dim = len(x0)
    if isinstance(step, (int, float)):
        step = [float(step)] * dim
    pts = [list(map(float, x0))]
    for i in range(dim):
        p = list(pts[0])
        p[i] += step[i] if step[i] != 0 else 0.00025
        pts.append(p)
    vals = [f(p) for p in pts]
    nfev = dim + 1

    it = 0
    converged = False
    while it < max_iter:
        order = sorted(range(dim + 1), key=vals.__getitem__)
        pts = [pts[i] for i in order]
        vals = [vals[i] for i in order]
        best = vals[0]
        if (max(abs(v - best) for v in vals[1:]) <= ftol
                and max(max(abs(a - b) for a, b in zip(p, pts[0])) for p in pts[1:]) <= xtol):
            converged = True
            break
        if math.isinf(best) and best < 0:
            break
        it += 1

        centroid = [sum(p[k] for p in pts[:-1]) / dim for k in range(dim)]
        worst = pts[-1]
        xr = [c + reflect * (c - w) for c, w in zip(centroid, worst)]
        fr = f(xr)
        nfev += 1
        if fr < vals[0]:
            xe = [c + expand * (r - c) for c, r in zip(centroid, xr)]
            fe = f(xe)
            nfev += 1
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = [c + contract * (r - c) for c, r in zip(centroid, xr)]
            fc = f(xc)
            nfev += 1
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = [c + contract * (w - c) for c, w in zip(centroid, worst)]
            fc = f(xc)
            nfev += 1
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue
        b = pts[0]
        for i in range(1, dim + 1):
            pts[i] = [bk + shrink * (pk - bk) for bk, pk in zip(b, pts[i])]
            vals[i] = f(pts[i])
        nfev += dim

    i_best = min(range(dim + 1), key=vals.__getitem__)
    return SimplexResult(pts[i_best], vals[i_best], it, nfev, converged)
