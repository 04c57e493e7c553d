"""Numba kernels: polygon geometry queries, the anisotropic distance sweep,
and the inner loop of the variational-step solver.

All polygon data arrives as packed arrays (see anisotropy._PolyPack):
counterclockwise vertices ``verts``, outward unit edge normals ``normals``
with supports ``supports`` (edge k joins verts[k] to verts[k+1]), unit edge
tangents ``tangents`` / ``lengths``, vertex polar angles ``vangles`` and edge
normal angles ``eangles`` (both sorted ascending in (-pi, pi]).

Anisotropy kind codes: 0 = scaled euclidean, 1 = polygon (full edge scan),
2 = dense table (windowed binary search around the radial facet).
"""

import numpy as np
from numba import njit

K_EUCLID = 0
K_POLY = 1
K_TABLE = 2

INF = 1e300


# ---------------------------------------------------------------------------
# scalar polygon helpers
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _radial_facet(theta, vangles):
    """Index of the polygon facet crossed by the ray at polar angle theta."""
    n = vangles.shape[0]
    lo = 0
    hi = n
    # bisect_right
    while lo < hi:
        mid = (lo + hi) // 2
        if theta < vangles[mid]:
            hi = mid
        else:
            lo = mid + 1
    j = lo - 1
    if j < 0:
        j = n - 1
    return j


@njit(cache=True, inline="always")
def _bisect_right(arr, x):
    n = arr.shape[0]
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if x < arr[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, inline="always")
def _support_vertex(alpha, eangles):
    """Index of the vertex whose normal cone contains direction angle alpha.

    The last normal angles may be stored unwrapped (> pi); alpha + 2*pi is
    retried when alpha falls below the first cone.
    """
    n = eangles.shape[0]
    lo = _bisect_right(eangles, alpha)
    if lo == 0:
        a2 = alpha + 2.0 * np.pi
        if a2 < eangles[n - 1]:
            lo = _bisect_right(eangles, a2)
    if lo >= n:
        lo = 0
    return lo


@njit(cache=True, inline="always")
def _gauge_poly(x, y, normals, supports, vangles):
    if x == 0.0 and y == 0.0:
        return 0.0
    theta = np.arctan2(y, x)
    j = _radial_facet(theta, vangles)
    return (normals[j, 0] * x + normals[j, 1] * y) / supports[j]


@njit(cache=True, inline="always")
def _polar_poly(x, y, verts, eangles):
    if x == 0.0 and y == 0.0:
        return 0.0
    alpha = np.arctan2(y, x)
    k = _support_vertex(alpha, eangles)
    return verts[k, 0] * x + verts[k, 1] * y


@njit(cache=True, inline="always")
def _gauge_euclid(x, y, a00, a01, a11):
    return np.sqrt(max(a00 * x * x + 2.0 * a01 * x * y + a11 * y * y, 0.0))


@njit(cache=True, inline="always")
def _project_poly_scan(px, py, verts, normals, supports, tangents, lengths,
                       vangles):
    """Exact projection onto the polygon, scanning every edge.

    Ties keep the lowest edge index (strict improvement test).
    """
    g = _gauge_poly(px, py, normals, supports, vangles)
    if g <= 1.0:
        return px, py
    n = verts.shape[0]
    best = INF
    bx = px
    by = py
    for k in range(n):
        rx = px - verts[k, 0]
        ry = py - verts[k, 1]
        s = rx * tangents[k, 0] + ry * tangents[k, 1]
        if s < 0.0:
            s = 0.0
        elif s > lengths[k]:
            s = lengths[k]
        qx = verts[k, 0] + s * tangents[k, 0]
        qy = verts[k, 1] + s * tangents[k, 1]
        d2 = (px - qx) * (px - qx) + (py - qy) * (py - qy)
        if d2 < best:
            best = d2
            bx = qx
            by = qy
    return bx, by


@njit(cache=True, inline="always")
def _project_poly_window(px, py, verts, normals, supports, tangents, lengths,
                         vangles, window):
    """Projection onto a dense convex table polygon.

    Binary search over the facets within +-window of the radial facet; the
    window is sized at construction so the nearest feature always lies inside
    it. A final +-2 facet scan absorbs bracket off-by-ones.
    """
    g = _gauge_poly(px, py, normals, supports, vangles)
    if g <= 1.0:
        return px, py
    n = verts.shape[0]
    theta = np.arctan2(py, px)
    j0 = _radial_facet(theta, vangles)
    lo = j0 - window
    hi = j0 + window
    while hi - lo > 1:
        mid = (lo + hi) // 2
        k = mid % n
        rx = px - verts[k, 0]
        ry = py - verts[k, 1]
        s = rx * tangents[k, 0] + ry * tangents[k, 1]
        if s < 0.0:
            hi = mid
        elif s > lengths[k]:
            lo = mid
        else:
            lo = mid
            hi = mid + 1
    best = INF
    bx = px
    by = py
    for m in range(lo - 2, lo + 3):
        k = m % n
        rx = px - verts[k, 0]
        ry = py - verts[k, 1]
        s = rx * tangents[k, 0] + ry * tangents[k, 1]
        if s < 0.0:
            s = 0.0
        elif s > lengths[k]:
            s = lengths[k]
        qx = verts[k, 0] + s * tangents[k, 0]
        qy = verts[k, 1] + s * tangents[k, 1]
        d2 = (px - qx) * (px - qx) + (py - qy) * (py - qy)
        if d2 < best:
            best = d2
            bx = qx
            by = qy
    return bx, by


@njit(cache=True, inline="always")
def _project_euclid(px, py, r00, r01, r10, r11, e0, e1):
    """Projection onto {x^T A x <= 1}; R columns are eigvecs, e eigvalues."""
    y0 = r00 * px + r10 * py
    y1 = r01 * px + r11 * py
    q = e0 * y0 * y0 + e1 * y1 * y1
    if q <= 1.0:
        return px, py
    # Newton with bracketing on f(lam) = sum e_i y_i^2 / (1 + lam e_i)^2 - 1
    lam = 0.0
    lhi = 1.0
    for _ in range(80):
        f = e0 * y0 * y0 / (1.0 + lhi * e0) ** 2 + \
            e1 * y1 * y1 / (1.0 + lhi * e1) ** 2 - 1.0
        if f < 0.0:
            break
        lhi *= 2.0
    llo = 0.0
    lam = 0.5 * lhi
    for _ in range(100):
        d0 = 1.0 + lam * e0
        d1 = 1.0 + lam * e1
        f = e0 * y0 * y0 / (d0 * d0) + e1 * y1 * y1 / (d1 * d1) - 1.0
        if f > 0.0:
            llo = lam
        else:
            lhi = lam
        fp = -2.0 * (e0 * e0 * y0 * y0 / (d0 * d0 * d0)
                     + e1 * e1 * y1 * y1 / (d1 * d1 * d1))
        step = f / fp
        nlam = lam - step
        if not (llo < nlam < lhi):
            nlam = 0.5 * (llo + lhi)
        if abs(nlam - lam) < 1e-15 * (1.0 + lam):
            lam = nlam
            break
        lam = nlam
    z0 = y0 / (1.0 + lam * e0)
    z1 = y1 / (1.0 + lam * e1)
    return r00 * z0 + r01 * z1, r10 * z0 + r11 * z1


# ---------------------------------------------------------------------------
# field-level wrappers (kind dispatch per cell)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _gauge_one(x, y, kind, verts, normals, supports, vangles, eangles, epack):
    if kind == K_EUCLID:
        return _gauge_euclid(x, y, epack[0], epack[1], epack[2])
    return _gauge_poly(x, y, normals, supports, vangles)


@njit(cache=True, inline="always")
def _polar_one(x, y, kind, verts, normals, supports, vangles, eangles, epack):
    if kind == K_EUCLID:
        return _gauge_euclid(x, y, epack[3], epack[4], epack[5])
    return _polar_poly(x, y, verts, eangles)


@njit(cache=True, inline="always")
def _project_one(x, y, kind, verts, normals, supports, tangents, lengths,
                 vangles, window, epack):
    if kind == K_EUCLID:
        return _project_euclid(x, y, epack[6], epack[7], epack[8], epack[9],
                               epack[10], epack[11])
    if kind == K_POLY:
        return _project_poly_scan(x, y, verts, normals, supports, tangents,
                                  lengths, vangles)
    return _project_poly_window(x, y, verts, normals, supports, tangents,
                                lengths, vangles, window)


@njit(cache=True)
def gauge_field(px, py, kind, verts, normals, supports, tangents, lengths,
                vangles, eangles, window, epack, out):
    n = px.shape[0]
    for i in range(n):
        out[i] = _gauge_one(px[i], py[i], kind, verts, normals, supports,
                            vangles, eangles, epack)


@njit(cache=True)
def polar_field(px, py, kind, verts, normals, supports, tangents, lengths,
                vangles, eangles, window, epack, out):
    n = px.shape[0]
    for i in range(n):
        out[i] = _polar_one(px[i], py[i], kind, verts, normals, supports,
                            vangles, eangles, epack)


@njit(cache=True)
def project_field(px, py, kind, verts, normals, supports, tangents, lengths,
                  vangles, eangles, window, epack, outx, outy):
    n = px.shape[0]
    for i in range(n):
        outx[i], outy[i] = _project_one(px[i], py[i], kind, verts, normals,
                                        supports, tangents, lengths, vangles,
                                        window, epack)


# ---------------------------------------------------------------------------
# anisotropic distance sweep
# ---------------------------------------------------------------------------

@njit(cache=True)
def sweep_distance(u, frozen, oi, oj, cone_a, cone_b, cand_t, cand_c,
                   cone_min, max_rounds, tol):
    """Fast sweeping for the gauge distance to the frozen seed cells.

    Cone updates interpolate linearly between the two neighbours of each cone
    (Hopf-Lax form); cand_t / cand_c hold the precomputed interpolation
    parameters and gauge costs per cone. Returns the number of rounds run.
    Records the winning candidate code (cone * ncand + m) in ``updir``.
    """
    nx, ny = u.shape
    ncone = cone_a.shape[0]
    ncand = cand_t.shape[1]
    updir = np.full((nx, ny), -1, dtype=np.int16)
    rounds = 0
    for rnd in range(max_rounds):
        maxdelta = 0.0
        for sweep in range(4):
            if sweep == 0:
                i0, i1, istep = 0, nx, 1
                j0, j1, jstep = 0, ny, 1
            elif sweep == 1:
                i0, i1, istep = nx - 1, -1, -1
                j0, j1, jstep = 0, ny, 1
            elif sweep == 2:
                i0, i1, istep = nx - 1, -1, -1
                j0, j1, jstep = ny - 1, -1, -1
            else:
                i0, i1, istep = 0, nx, 1
                j0, j1, jstep = ny - 1, -1, -1
            i = i0
            while i != i1:
                j = j0
                while j != j1:
                    if not frozen[i, j]:
                        cur = u[i, j]
                        for k in range(ncone):
                            ka = cone_a[k]
                            kb = cone_b[k]
                            ia = i + oi[ka]
                            ja = j + oj[ka]
                            ib = i + oi[kb]
                            jb = j + oj[kb]
                            av = INF
                            bv = INF
                            if 0 <= ia < nx and 0 <= ja < ny:
                                av = u[ia, ja]
                            if 0 <= ib < nx and 0 <= jb < ny:
                                bv = u[ib, jb]
                            lo = av if av < bv else bv
                            if lo + cone_min[k] >= cur:
                                continue
                            for m in range(ncand):
                                t = cand_t[k, m]
                                if t == 0.0:
                                    if av >= INF:
                                        continue
                                    val = av + cand_c[k, m]
                                elif t == 1.0:
                                    if bv >= INF:
                                        continue
                                    val = bv + cand_c[k, m]
                                else:
                                    if av >= INF or bv >= INF:
                                        continue
                                    val = (1.0 - t) * av + t * bv + cand_c[k, m]
                                if val < cur:
                                    cur = val
                                    updir[i, j] = np.int16(k * ncand + m)
                        if cur < u[i, j]:
                            d = u[i, j] - cur
                            if d > maxdelta:
                                maxdelta = d
                            u[i, j] = cur
                    j += jstep
                i += istep
        rounds += 1
        if maxdelta <= tol:
            break
    return updir, rounds


# ---------------------------------------------------------------------------
# variational step solver inner loop
# ---------------------------------------------------------------------------

@njit(cache=True)
def cp_dual_step(wbar, zx, zy, sigma, dx, kind, verts, normals, supports,
                 tangents, lengths, vangles, eangles, window, epack):
    """zeta <- Pi_{phi(.) <= dx}(zeta + sigma * D wbar), forward differences."""
    nx, ny = wbar.shape
    inv = 1.0 / dx
    for i in range(nx):
        for j in range(ny):
            gx = 0.0
            gy = 0.0
            if i < nx - 1:
                gx = wbar[i + 1, j] - wbar[i, j]
            if j < ny - 1:
                gy = wbar[i, j + 1] - wbar[i, j]
            cx = (zx[i, j] + sigma * gx) * inv
            cy = (zy[i, j] + sigma * gy) * inv
            qx, qy = _project_one(cx, cy, kind, verts, normals, supports,
                                  tangents, lengths, vangles, window, epack)
            zx[i, j] = qx * dx
            zy[i, j] = qy * dx


@njit(cache=True)
def cp_primal_step(w, wbar, zx, zy, g, tau, gam, theta):
    """Proximal primal update plus extrapolation; returns max |w - w_prev|."""
    nx, ny = w.shape
    den = 1.0 / (1.0 + tau * gam)
    delta = 0.0
    for i in range(nx):
        for j in range(ny):
            dtz = -zx[i, j] - zy[i, j]
            if i > 0:
                dtz += zx[i - 1, j]
            if i == nx - 1:
                dtz += zx[i, j]  # last-row zeta_x never contributes
            if j > 0:
                dtz += zy[i, j - 1]
            if j == ny - 1:
                dtz += zy[i, j]
            wn = (w[i, j] - tau * dtz + tau * gam * g[i, j]) * den
            d = abs(wn - w[i, j])
            if d > delta:
                delta = d
            wbar[i, j] = wn + theta * (wn - w[i, j])
            w[i, j] = wn
    return delta


@njit(cache=True)
def dual_to_primal(zx, zy, g, h, dx, wt, divz):
    """w_tilde = g + h * div z (physical scaling) from the dual field."""
    nx, ny = g.shape
    inv2 = 1.0 / (dx * dx)
    for i in range(nx):
        for j in range(ny):
            dtz = -zx[i, j] - zy[i, j]
            if i > 0:
                dtz += zx[i - 1, j]
            if i == nx - 1:
                dtz += zx[i, j]
            if j > 0:
                dtz += zy[i, j - 1]
            if j == ny - 1:
                dtz += zy[i, j]
            dv = -dtz * inv2
            divz[i, j] = dv
            wt[i, j] = g[i, j] + h * dv


@njit(cache=True)
def primal_dual_values(wt, divz, g, h, dx, kind, verts, normals, supports,
                       tangents, lengths, vangles, eangles, window, epack):
    """Primal objective at wt and dual objective at z; gap = P - D."""
    nx, ny = wt.shape
    p_tv = 0.0
    p_fit = 0.0
    d_val = 0.0
    for i in range(nx):
        for j in range(ny):
            gx = 0.0
            gy = 0.0
            if i < nx - 1:
                gx = wt[i + 1, j] - wt[i, j]
            if j < ny - 1:
                gy = wt[i, j + 1] - wt[i, j]
            p_tv += _polar_one(gx, gy, kind, verts, normals, supports,
                               vangles, eangles, epack)
            r = wt[i, j] - g[i, j]
            p_fit += r * r
            d_val += g[i, j] * divz[i, j] + 0.5 * h * divz[i, j] * divz[i, j]
    dx2 = dx * dx
    primal = dx * p_tv + dx2 / (2.0 * h) * p_fit
    dual = -dx2 * d_val
    return primal, dual


@njit(cache=True)
def tv_value(g, dx, kind, verts, normals, supports, tangents, lengths,
             vangles, eangles, window, epack):
    nx, ny = g.shape
    s = 0.0
    for i in range(nx):
        for j in range(ny):
            gx = 0.0
            gy = 0.0
            if i < nx - 1:
                gx = g[i + 1, j] - g[i, j]
            if j < ny - 1:
                gy = g[i, j + 1] - g[i, j]
            s += _polar_one(gx, gy, kind, verts, normals, supports,
                            vangles, eangles, epack)
    return dx * s
