"""Event-driven product-identity kernel, numba and pure-numpy flavours.

Both backends walk the grid cell by cell.  Inside a cell the Poisson
events are processed in arrival order: the compensator drift is
integrated exactly up to the event time, then the jump is applied.  At
the cell end come, in order: the remaining drift, the continuous
increment (left-point), the atom of any predictable jump time on that
grid point, and the residual.

Set ``WRPLAB_DISABLE_NUMBA=1`` to force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


def default_backend() -> str:
    if os.environ.get("WRPLAB_DISABLE_NUMBA", "") not in ("", "0") or not _HAVE_NUMBA:
        return "numpy"
    return "numba"


def _product_numpy(cell_off, ev_path, ev_time, ev_side, ev_val, ev_rank, dmc, dnc,
                   a_x, a_y, dt, atom_at, c1, c2, c3, awx, avy, au, m0, n0):
    K, n = dmc.shape
    M = np.full(n, m0, dtype=float)
    N = np.full(n, n0, dtype=float)
    hc = np.zeros(n)
    gi = np.zeros(n)
    cur = np.zeros(n)
    sup = np.zeros(n)
    base = m0 * n0
    for c in range(K):
        lo, hi = cell_off[c], cell_off[c + 1]
        if hi > lo:
            ranks = ev_rank[lo:hi]
            for r in range(int(ranks.max()) + 1):
                sel = lo + np.flatnonzero(ranks == r)
                p = ev_path[sel]
                h = ev_time[sel] - cur[p]
                gi[p] -= a_x * N[p] * h + a_y * M[p] * h - a_x * a_y * h * h
                M[p] -= a_x * h
                N[p] -= a_y * h
                xs = ev_side[sel] == 0
                v = ev_val[sel]
                px, py = p[xs], p[~xs]
                gi[px] += N[px] * v[xs]
                M[px] += v[xs]
                gi[py] += M[py] * v[~xs]
                N[py] += v[~xs]
                cur[p] = ev_time[sel]
        end = (c + 1) * dt
        h = end - cur
        gi -= a_x * N * h + a_y * M * h - a_x * a_y * h * h
        M -= a_x * h
        N -= a_y * h
        cur[:] = end
        dm = dmc[c]
        dn = dnc[c]
        hc += N * dm + M * dn
        M += dm
        N += dn
        a = atom_at[c]
        if a >= 0:
            gi += N * awx[a] + M * avy[a] + au[a] - (c1[a] * N + c2[a] * M + c3[a])
            M, N = M + awx[a] - c1[a], N + avy[a] - c2[a]
        np.maximum(sup, np.abs(M * N - base - hc - gi), out=sup)
    return sup, M, N, hc, gi


def _product_loop(cell_off, ev_path, ev_time, ev_side, ev_val, ev_rank, dmc, dnc,
                  a_x, a_y, dt, atom_at, c1, c2, c3, awx, avy, au, m0, n0):
    K, n = dmc.shape
    M = np.full(n, m0)
    N = np.full(n, n0)
    hc = np.zeros(n)
    gi = np.zeros(n)
    cur = np.zeros(n)
    sup = np.zeros(n)
    base = m0 * n0
    for c in range(K):
        for e in range(cell_off[c], cell_off[c + 1]):
            p = ev_path[e]
            h = ev_time[e] - cur[p]
            gi[p] -= a_x * N[p] * h + a_y * M[p] * h - a_x * a_y * h * h
            M[p] -= a_x * h
            N[p] -= a_y * h
            if ev_side[e] == 0:
                gi[p] += N[p] * ev_val[e]
                M[p] += ev_val[e]
            else:
                gi[p] += M[p] * ev_val[e]
                N[p] += ev_val[e]
            cur[p] = ev_time[e]
        end = (c + 1) * dt
        a = atom_at[c]
        for p in range(n):
            h = end - cur[p]
            gi[p] -= a_x * N[p] * h + a_y * M[p] * h - a_x * a_y * h * h
            M[p] -= a_x * h
            N[p] -= a_y * h
            cur[p] = end
            dm = dmc[c, p]
            dn = dnc[c, p]
            hc[p] += N[p] * dm + M[p] * dn
            M[p] += dm
            N[p] += dn
            if a >= 0:
                gi[p] += N[p] * awx[a, p] + M[p] * avy[a, p] + au[a, p] - (c1[a] * N[p] + c2[a] * M[p] + c3[a])
                mp = M[p] + awx[a, p] - c1[a]
                N[p] = N[p] + avy[a, p] - c2[a]
                M[p] = mp
            r = abs(M[p] * N[p] - base - hc[p] - gi[p])
            if r > sup[p]:
                sup[p] = r
    return sup, M, N, hc, gi


_product_numba = numba.njit(cache=True)(_product_loop) if _HAVE_NUMBA else None


def product_residual(*, cell_off, ev_path, ev_time, ev_side, ev_val, ev_rank, dmc, dnc,
                     a_x, a_y, dt, atom_at, c1, c2, c3, awx, avy, au, m0, n0,
                     backend: str | None = None):
    """Run the product-identity kernel.

    Returns ``(sup_residual, M_T, N_T, hc_T, gi_T)``, one entry per path.
    ``dmc``/``dnc`` (shape ``(n, K)``) are the continuous increments already
    multiplied by the integrands ``K``/``J``; ``ev_val`` holds ``W(x)`` or
    ``V(y)`` per event.  Per-cell and per-atom arrays are transposed to
    ``(K, n)`` / ``(A, n)`` so the inner path loop reads contiguous memory.
    """
    backend = backend or default_backend()
    args = (
        np.ascontiguousarray(cell_off, dtype=np.int64),
        np.ascontiguousarray(ev_path, dtype=np.int64),
        np.ascontiguousarray(ev_time, dtype=np.float64),
        np.ascontiguousarray(ev_side, dtype=np.int64),
        np.ascontiguousarray(ev_val, dtype=np.float64),
        np.ascontiguousarray(ev_rank, dtype=np.int64),
        np.ascontiguousarray(np.asarray(dmc, dtype=np.float64).T),
        np.ascontiguousarray(np.asarray(dnc, dtype=np.float64).T),
        float(a_x), float(a_y), float(dt),
        np.ascontiguousarray(atom_at, dtype=np.int64),
        np.ascontiguousarray(c1, dtype=np.float64),
        np.ascontiguousarray(c2, dtype=np.float64),
        np.ascontiguousarray(c3, dtype=np.float64),
        np.ascontiguousarray(np.asarray(awx, dtype=np.float64).T),
        np.ascontiguousarray(np.asarray(avy, dtype=np.float64).T),
        np.ascontiguousarray(np.asarray(au, dtype=np.float64).T),
        float(m0), float(n0),
    )
    if backend == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba is not available")
        return _product_numba(*args)
    if backend == "numpy":
        return _product_numpy(*args)
    if backend == "python":
        return _product_loop(*args)
    raise ValueError(f"unknown backend {backend!r}")
