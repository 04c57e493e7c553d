"""Anisotropies: convex even gauges, their Wulff shapes, polars and
subdifferentials, plus the smooth-elliptic regularization family.

Three representations share one query interface:

* ``polygon`` -- the Wulff shape is a symmetric convex polygon given by its
  counterclockwise vertices (the crystalline case).
* ``table`` -- a dense angular sample of a strictly convex Wulff boundary,
  treated as a fine inscribed polygon; produced by :func:`regularize`.
* ``euclidean`` -- W = {x : x^T A x <= 1} for a symmetric positive definite A.

The gauge is the Minkowski functional of W, the polar its support function.
All queries accept single points or arrays of shape (..., 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.ndimage import convolve1d
from scipy.spatial import cKDTree

from . import _kernels as _k

__all__ = [
    "Anisotropy", "RegularizedAnisotropy", "Face",
    "polygon_anisotropy", "euclidean_anisotropy", "regularize",
    "gauge", "polar", "cahn_hoffmann", "project_wulff",
    "wulff_hausdorff", "anisotropy_from_config",
]

_TWO_PI = 2.0 * np.pi


class Face(NamedTuple):
    """Exposed face of the Wulff shape: a point (a == b) or a segment."""
    a: np.ndarray
    b: np.ndarray

    @property
    def is_segment(self) -> bool:
        return bool(np.linalg.norm(self.b - self.a) > 1e-12)

    @property
    def point(self) -> np.ndarray:
        return self.a


class _Pack(NamedTuple):
    kind: int
    verts: np.ndarray
    normals: np.ndarray
    supports: np.ndarray
    tangents: np.ndarray
    lengths: np.ndarray
    vangles: np.ndarray
    eangles: np.ndarray
    window: int
    epack: np.ndarray


def _wrap_pi(a):
    return (a + np.pi) % _TWO_PI - np.pi


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class Anisotropy:
    """A convex, even, one-homogeneous, coercive gauge on R^2."""

    def __init__(self, kind: str, *, vertices: Optional[np.ndarray] = None,
                 matrix: Optional[np.ndarray] = None,
                 config: Optional[dict] = None):
        self.kind = kind
        self.config = config
        if kind in ("polygon", "table"):
            self._init_polygon(np.asarray(vertices, dtype=float))
        elif kind == "euclidean":
            self._init_euclid(np.eye(2) if matrix is None
                              else np.asarray(matrix, dtype=float))
        else:
            raise ValueError(f"unknown anisotropy kind {kind!r}")

    # -- construction -------------------------------------------------------

    def _init_polygon(self, verts):
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise ValueError("vertices must have shape (K, 2)")
        K = verts.shape[0]
        if K < 4 or K % 2:
            raise ValueError("vertex count must be even and at least 4")
        if _cross2(verts[1] - verts[0], verts[2] - verts[1]) < 0:
            raise ValueError("vertices must be counterclockwise")
        half = K // 2
        scale = np.abs(verts).max()
        if not np.allclose(verts[half:], -verts[:half], atol=1e-9 * scale):
            raise ValueError("vertices must be symmetric: v[k+K/2] = -v[k]")
        verts = np.concatenate([verts[:half], -verts[:half]])  # exact evenness
        angles = np.arctan2(verts[:, 1], verts[:, 0])
        roll = int(np.argmin(angles))
        verts = np.roll(verts, -roll, axis=0)
        vang = np.arctan2(verts[:, 1], verts[:, 0])
        if np.any(np.diff(vang) <= 0):
            raise ValueError("vertex polar angles must be strictly increasing "
                             "(polygon must be star-shaped about the origin)")
        edges = np.roll(verts, -1, axis=0) - verts
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        if np.any(lengths < 1e-14 * scale):
            raise ValueError("degenerate (repeated) vertices")
        tang = edges / lengths[:, None]
        normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
        supports = np.einsum("ij,ij->i", normals, verts)
        if np.any(supports <= 0):
            raise ValueError("polygon must contain the origin")
        crosses = _cross2(edges, np.roll(edges, -1, axis=0))
        if np.any(crosses <= 1e-14 * scale * scale):
            raise ValueError("vertices must be in strictly convex position")
        eang = np.arctan2(normals[:, 1], normals[:, 0])
        for k in range(1, K):  # unwrap a possible tail crossing of +pi
            if eang[k] < eang[k - 1]:
                eang[k] += _TWO_PI
        self._verts = np.ascontiguousarray(verts)
        self._normals = np.ascontiguousarray(normals)
        self._supports = np.ascontiguousarray(supports)
        self._tangents = np.ascontiguousarray(tang)
        self._lengths = np.ascontiguousarray(lengths)
        self._vangles = np.ascontiguousarray(vang)
        self._eangles = np.ascontiguousarray(eang)
        r_out = np.hypot(verts[:, 0], verts[:, 1]).max()
        r_in = supports.min()
        self.c0 = float(min(1.0 / r_out, r_in))
        if self.kind == "table":
            beta = 0.0
            for k in range(K):
                psi = np.arctan2(normals[k, 1], normals[k, 0])
                t0 = abs(_wrap_pi(vang[k] - psi))
                t1 = abs(_wrap_pi(vang[(k + 1) % K] - psi))
                beta = max(beta, t0, t1)
            self._window = min(int(np.ceil(K * beta / _TWO_PI)) + 4, K // 4)
        else:
            self._window = 0
        self._epack = np.zeros(12)

    def _init_euclid(self, A):
        if A.shape != (2, 2) or not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("matrix must be 2x2 symmetric")
        evals, evecs = np.linalg.eigh(A)
        if evals.min() <= 0:
            raise ValueError("matrix must be positive definite")
        self._A = A
        self._Ainv = np.linalg.inv(A)
        ep = np.empty(12)
        ep[0], ep[1], ep[2] = A[0, 0], A[0, 1], A[1, 1]
        ep[3], ep[4], ep[5] = self._Ainv[0, 0], self._Ainv[0, 1], self._Ainv[1, 1]
        ep[6], ep[7], ep[8], ep[9] = evecs[0, 0], evecs[0, 1], evecs[1, 0], evecs[1, 1]
        ep[10], ep[11] = evals[0], evals[1]
        self._epack = ep
        self.c0 = float(min(np.sqrt(evals.min()), 1.0 / np.sqrt(evals.max())))
        z2 = np.zeros((2, 2))
        z1 = np.zeros(2)
        self._verts = z2
        self._normals = z2
        self._supports = z1
        self._tangents = z2
        self._lengths = z1
        self._vangles = z1
        self._eangles = z1
        self._window = 0

    def _pack(self) -> _Pack:
        code = {"euclidean": _k.K_EUCLID, "polygon": _k.K_POLY,
                "table": _k.K_TABLE}[self.kind]
        return _Pack(code, self._verts, self._normals, self._supports,
                     self._tangents, self._lengths, self._vangles,
                     self._eangles, self._window, self._epack)

    # -- queries ------------------------------------------------------------

    def _field(self, x, fn, nout=1):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.ascontiguousarray(x.reshape(-1, 2))
        px = np.ascontiguousarray(pts[:, 0])
        py = np.ascontiguousarray(pts[:, 1])
        p = self._pack()
        if nout == 1:
            out = np.empty(px.shape[0])
            fn(px, py, p.kind, p.verts, p.normals, p.supports, p.tangents,
               p.lengths, p.vangles, p.eangles, p.window, p.epack, out)
            return float(out[0]) if single else out.reshape(x.shape[:-1])
        ox = np.empty(px.shape[0])
        oy = np.empty(px.shape[0])
        fn(px, py, p.kind, p.verts, p.normals, p.supports, p.tangents,
           p.lengths, p.vangles, p.eangles, p.window, p.epack, ox, oy)
        return np.stack([ox, oy], axis=-1).reshape(x.shape)

    def gauge(self, x):
        """Minkowski gauge of the Wulff shape: inf{l > 0 : x/l in W}."""
        return self._field(x, _k.gauge_field)

    def polar(self, nu):
        """Support function of the Wulff shape."""
        return self._field(nu, _k.polar_field)

    def project(self, p):
        """Euclidean projection onto the Wulff shape."""
        return self._field(p, _k.project_field, nout=2)

    def cahn_hoffmann(self, nu) -> Face:
        """The exposed face of W in direction nu, i.e. the subdifferential
        of the polar at nu: a vertex/point or a whole facet."""
        nu = np.asarray(nu, dtype=float)
        nn = np.hypot(nu[0], nu[1])
        if nn == 0.0:
            raise ValueError("cahn_hoffmann requires a nonzero direction")
        if self.kind == "euclidean":
            p = self._Ainv @ nu
            p = p / self.polar(nu)
            return Face(p, p.copy())
        alpha = np.arctan2(nu[1], nu[0])
        K = self._verts.shape[0]
        ea = self._eangles
        lo = int(np.searchsorted(ea, alpha, side="right"))
        if lo == 0 and alpha + _TWO_PI < ea[-1]:
            lo = int(np.searchsorted(ea, alpha + _TWO_PI, side="right"))
        k = lo % K
        vals = self._verts @ nu
        best = vals[k]
        tol = 1e-12 * nn * max(1.0, np.abs(self._verts).max())
        nxt = (k + 1) % K
        prv = (k - 1) % K
        if vals[nxt] >= best - tol:
            return Face(self._verts[k].copy(), self._verts[nxt].copy())
        if vals[prv] >= best - tol:
            return Face(self._verts[prv].copy(), self._verts[k].copy())
        v = self._verts[k].copy()
        return Face(v, v.copy())

    def boundary_points(self, n: int = 2048) -> np.ndarray:
        """n points on the Wulff boundary, uniform in polar angle."""
        theta = np.linspace(-np.pi, np.pi, n, endpoint=False)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return u / self.gauge(u)[:, None]

    @property
    def wulff_vertices(self) -> np.ndarray:
        if self.kind == "euclidean":
            return self.boundary_points(256)
        return self._verts.copy()

    def __repr__(self):
        if self.kind == "euclidean":
            return f"Anisotropy(euclidean, A={self._A.tolist()})"
        return f"Anisotropy({self.kind}, K={self._verts.shape[0]})"


@dataclass
class RegularizedAnisotropy:
    """Smooth-elliptic surrogate built from a base anisotropy."""
    base: Anisotropy
    epsilon: float
    result: Anisotropy
    mollifier_samples: int


def polygon_anisotropy(vertices, config: Optional[dict] = None) -> Anisotropy:
    verts = np.asarray(vertices, dtype=float)
    cfg = config or {"kind": "polygon", "vertices": verts.tolist()}
    return Anisotropy("polygon", vertices=verts, config=cfg)


def euclidean_anisotropy(matrix=None, config: Optional[dict] = None) -> Anisotropy:
    A = np.eye(2) if matrix is None else np.asarray(matrix, dtype=float)
    cfg = config or {"kind": "euclidean", "matrix": A.tolist()}
    return Anisotropy("euclidean", matrix=A, config=cfg)


def _support_of_radial(points, psi):
    """Support function of conv(points) sampled at angles psi, by marching.

    ``points`` must traverse the convex boundary counterclockwise.
    """
    K = psi.shape[0]
    n = points.shape[0]
    out = np.empty(K)
    u0 = np.array([np.cos(psi[0]), np.sin(psi[0])])
    j = int(np.argmax(points @ u0))
    for k in range(K):
        u = (np.cos(psi[k]), np.sin(psi[k]))
        cur = points[j, 0] * u[0] + points[j, 1] * u[1]
        for _ in range(n):
            jn = (j + 1) % n
            nxt = points[jn, 0] * u[0] + points[jn, 1] * u[1]
            if nxt > cur:
                j = jn
                cur = nxt
            else:
                break
        out[k] = cur
    return out


def regularize(a: Anisotropy, epsilon: float, samples: int = 4096
               ) -> RegularizedAnisotropy:
    """Smooth-elliptic approximation from above of the gauge.

    Mollifies the polar angularly with a compactly supported even bump, takes
    the epsilon-neighborhood of the mollified polar ball, rescales the result
    tightly against the original polar ball, and tabulates the support of that
    body (= the new gauge) on a dense angular grid. The returned table
    anisotropy satisfies gauge_eps >= gauge and W_eps subset of W.
    """
    if a.kind not in ("polygon", "euclidean"):
        raise ValueError("regularize expects a polygon or euclidean base")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    K = int(samples)
    if K % 2 or K < 256:
        raise ValueError("samples must be even and at least 256")
    psi = -np.pi + _TWO_PI * np.arange(K) / K
    u = np.stack([np.cos(psi), np.sin(psi)], axis=1)
    sig_f = a.gauge(u)          # support of the polar ball F = {polar <= 1}
    inradius_f = sig_f.min()
    if epsilon >= inradius_f / 2:
        raise ValueError(
            f"epsilon {epsilon} must be below half the polar-ball "
            f"inradius {inradius_f:.6g}")
    g_pol = a.polar(u)          # polar restricted to the unit circle
    dpsi = _TWO_PI / K

    eps_a = min(0.5 * epsilon, np.pi / 8)
    for attempt in range(4):
        w = max(int(np.ceil(eps_a / dpsi)), 2)
        s = np.arange(-w, w + 1) * dpsi
        r = np.clip(s / (w * dpsi), -1 + 1e-12, 1 - 1e-12)
        kern = np.exp(-1.0 / (1.0 - r * r))
        kern /= kern.sum()
        g_eps = convolve1d(g_pol, kern, mode="wrap")
        apts = u / g_eps[:, None]           # boundary of the mollified polar ball
        sig_a = _support_of_radial(apts, psi)
        # tighten: shrink the epsilon-fattened polar ball until it touches the
        # original one, keeping W_eps inside W
        scale = np.max(sig_f / (sig_a + epsilon))
        phi_eps = scale * (sig_a + epsilon)  # new gauge on the unit circle
        half = K // 2
        bp = u[:half] / phi_eps[:half, None]
        verts = np.concatenate([bp, -bp])
        edges = np.roll(verts, -1, axis=0) - verts
        crosses = _cross2(edges, np.roll(edges, -1, axis=0))
        if crosses.min() > 1e-15:
            break
        eps_a *= 0.5
    else:
        raise ValueError("mollification resolution insufficient to certify "
                         "strict convexity; increase samples")

    cfg = {"kind": "regularized", "base": a.config, "epsilon": epsilon,
           "samples": K}
    result = Anisotropy("table", vertices=verts, config=cfg)
    # certified invariants of the construction
    if a.gauge(result._verts).max() > 1.0 + 1e-9:
        raise ValueError("regularized Wulff shape escapes the base shape")
    probe = result.boundary_points(1024)
    if np.min(result.gauge(probe * 1.0) / np.maximum(a.gauge(probe), 1e-300)) \
            < 1.0 - 1e-9:
        raise ValueError("regularized gauge fails to dominate the base gauge")
    return RegularizedAnisotropy(base=a, epsilon=float(epsilon), result=result,
                                 mollifier_samples=K)


# -- spec-shaped functional aliases -----------------------------------------

def gauge(a: Anisotropy, x):
    return a.gauge(x)


def polar(a: Anisotropy, nu):
    return a.polar(nu)


def cahn_hoffmann(a: Anisotropy, nu) -> Face:
    return a.cahn_hoffmann(nu)


def project_wulff(a: Anisotropy, p):
    return a.project(p)


def wulff_hausdorff(a: Anisotropy, b: Anisotropy, n: int = 4096) -> float:
    """Hausdorff distance between the two Wulff shapes (boundary sampling)."""
    pa = a.boundary_points(n)
    pb = b.boundary_points(n)
    da = cKDTree(pb).query(pa)[0].max()
    db = cKDTree(pa).query(pb)[0].max()
    return float(max(da, db))


def anisotropy_from_config(cfg: dict) -> Anisotropy:
    try:
        kind = cfg["kind"]
    except (KeyError, TypeError):
        raise ValueError("anisotropy config needs a 'kind' field") from None
    if kind == "polygon":
        if "vertices" not in cfg:
            raise ValueError("anisotropy.vertices is required for polygon kind")
        return polygon_anisotropy(cfg["vertices"], config=cfg)
    if kind == "euclidean":
        return euclidean_anisotropy(cfg.get("matrix"), config=cfg)
    if kind == "regularized":
        if "base" not in cfg or "epsilon" not in cfg:
            raise ValueError("anisotropy.base and anisotropy.epsilon are "
                             "required for regularized kind")
        base = anisotropy_from_config(cfg["base"])
        reg = regularize(base, float(cfg["epsilon"]),
                         samples=int(cfg.get("samples", 4096)))
        return reg.result
    raise ValueError(f"unknown anisotropy.kind {kind!r}")
