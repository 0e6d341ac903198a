"""Closed parametric boundary curves and panel quadrature on them.

All curves are parameterized counterclockwise over ``theta in [0, 2*pi)``::

    circle   (cos t, sin t)
    ellipse  (3 cos t, 2 sin t)
    kite     (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)
    peanut   sqrt(cos^2 t + 0.25 sin^2 t) (cos t, sin t)
    star     (1 + 0.3 cos 5t) (cos t, sin t)

and may be placed with a uniform scale and a translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("circle", "ellipse", "kite", "peanut", "star")

# Letter codes used in "Y*X" configuration names.
KIND_LETTERS = {"C": "circle", "E": "ellipse", "K": "kite", "P": "peanut", "S": "star"}

TWO_PI = 2.0 * np.pi


class CurveError(ValueError):
    """Raised for invalid curve definitions or degenerate geometry."""


def _polar(rho, drho, ddrho, t):
    c, s = np.cos(t), np.sin(t)
    x = np.stack([rho * c, rho * s], axis=-1)
    dx = np.stack([drho * c - rho * s, drho * s + rho * c], axis=-1)
    ddx = np.stack(
        [ddrho * c - 2 * drho * s - rho * c, ddrho * s + 2 * drho * c - rho * s],
        axis=-1,
    )
    return x, dx, ddx


def _base_jet(kind: str, t: np.ndarray):
    """Value, first and second derivative of the unit-placed curve."""
    c, s = np.cos(t), np.sin(t)
    if kind == "circle":
        one = np.ones_like(t)
        return _polar(one, 0 * t, 0 * t, t)
    if kind == "ellipse":
        x = np.stack([3 * c, 2 * s], axis=-1)
        dx = np.stack([-3 * s, 2 * c], axis=-1)
        return x, dx, -x
    if kind == "kite":
        c2, s2 = np.cos(2 * t), np.sin(2 * t)
        x = np.stack([c + 0.65 * c2 - 0.65, 1.5 * s], axis=-1)
        dx = np.stack([-s - 1.3 * s2, 1.5 * c], axis=-1)
        ddx = np.stack([-c - 2.6 * c2, -1.5 * s], axis=-1)
        return x, dx, ddx
    if kind == "peanut":
        q = c * c + 0.25 * s * s
        rho = np.sqrt(q)
        num = -0.375 * np.sin(2 * t)  # q'/2
        drho = num / rho
        ddrho = -0.75 * np.cos(2 * t) / rho - num * drho / q
        return _polar(rho, drho, ddrho, t)
    if kind == "star":
        rho = 1 + 0.3 * np.cos(5 * t)
        drho = -1.5 * np.sin(5 * t)
        ddrho = -7.5 * np.cos(5 * t)
        return _polar(rho, drho, ddrho, t)
    raise CurveError(f"unknown curve kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class ParametricCurve:
    """A closed smooth counterclockwise curve ``scale * x_base(theta) + center``."""

    kind: str
    scale: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CurveError(f"unknown curve kind {self.kind!r}; expected one of {KINDS}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise CurveError(f"curve scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def from_dict(cls, d: dict) -> "ParametricCurve":
        unknown = set(d) - {"kind", "scale", "center"}
        if unknown:
            raise CurveError(f"unknown curve keys {sorted(unknown)}")
        if "kind" not in d:
            raise CurveError("curve description needs a 'kind'")
        center = d.get("center", (0.0, 0.0))
        if len(center) != 2:
            raise CurveError("curve center must have two coordinates")
        return cls(d["kind"], float(d.get("scale", 1.0)), tuple(center))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale, "center": list(self.center)}

    @property
    def interior_point(self) -> np.ndarray:
        # the origin lies inside every base curve
        return np.asarray(self.center)

    def jet(self, theta):
        theta = np.asarray(theta, dtype=float)
        x, dx, ddx = _base_jet(self.kind, theta)
        return self.scale * x + np.asarray(self.center), self.scale * dx, self.scale * ddx

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        x, _, _ = _base_jet(self.kind, theta)
        return self.scale * x + np.asarray(self.center)

    def tangent(self, theta) -> np.ndarray:
        """Derivative ``dx/dtheta`` (not normalized)."""
        return self.jet(theta)[1]

    def normal(self, theta) -> np.ndarray:
        """Unit outward normal: the tangent rotated by -pi/2."""
        dx = self.tangent(theta)
        speed = np.linalg.norm(dx, axis=-1, keepdims=True)
        if np.any(speed < 1e-14):
            raise CurveError("degenerate tangent")
        return np.stack([dx[..., 1], -dx[..., 0]], axis=-1) / speed

    def speed(self, theta) -> np.ndarray:
        return np.linalg.norm(self.tangent(theta), axis=-1)

    def sample(self, n: int) -> np.ndarray:
        return self.point(np.arange(n) * (TWO_PI / n))

    def project(self, p, theta_lo: float, theta_hi: float, tol: float = 1e-12) -> float:
        """Parameter of the point on the arc ``[theta_lo, theta_hi]`` nearest to ``p``.

        Newton on ``d/dtheta |x(theta) - p|^2 / 2 = (x - p) . x'``, falling back to
        bisection when an iterate leaves the bracket.
        """
        p = np.asarray(p, dtype=float)

        def dist_deriv(t):
            x, dx, ddx = self.jet(t)
            return (x - p) @ dx, dx @ dx + (x - p) @ ddx

        lo, hi = theta_lo, theta_hi
        bracketed = dist_deriv(lo)[0] < 0 < dist_deriv(hi)[0]
        t = 0.5 * (lo + hi)
        for _ in range(100):
            f, df = dist_deriv(t)
            if f == 0.0:
                break
            if bracketed:
                if f < 0:
                    lo = t
                else:
                    hi = t
            t_new = t - f / df if df > 0 else np.nan
            if not lo < t_new < hi:
                t_new = 0.5 * (lo + hi)
            if abs(t_new - t) < tol:
                t = t_new
                break
            t = t_new
        return float(t)


def polygon_length(points: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1).sum())


def separation(inner: ParametricCurve, outer: ParametricCurve, n: int = 512) -> float:
    """Sampled ``min |x - y|`` over ``x`` on ``outer`` and ``y`` on ``inner``."""
    a, b = inner.sample(n), outer.sample(n)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(d.min())


def encloses(outer: ParametricCurve, inner: ParametricCurve, n: int = 512) -> bool:
    """True when every sample of ``inner`` lies strictly inside ``outer``."""
    from matplotlib.path import Path

    return bool(np.all(Path(outer.sample(n)).contains_points(inner.sample(n))))


def check_pair(gamma: ParametricCurve, gamma0: ParametricCurve, c0: float = 0.1) -> float:
    """Validate an obstacle/artificial boundary pair; returns the sampled separation."""
    if not encloses(gamma0, gamma):
        raise CurveError("artificial boundary does not enclose the obstacle boundary")
    sep = separation(gamma, gamma0)
    if sep < c0:
        raise CurveError(f"boundaries too close: separation {sep:.3g} < c0 = {c0}")
    return sep


# -- quadrature -------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Panel Gauss-Legendre rule on a closed boundary.

    ``points``, ``normals`` and ``weights`` are flat over all nodes; node ``q`` of
    panel ``p`` sits at index ``p * order + q``.  ``weights`` include the arc-length
    Jacobian.  ``basis`` holds the values of the two hat functions attached to the
    panel endpoints ``panel_vertices`` (only meaningful for polygonal rules).
    """

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    order: int
    panel_vertices: np.ndarray | None = None
    basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_panels(self) -> int:
        return len(self.weights) // self.order

    def panel_slice(self, p: int) -> slice:
        return slice(p * self.order, (p + 1) * self.order)


def gauss_legendre(order: int):
    """Nodes and weights on ``[0, 1]``."""
    if not 1 <= order <= 20:
        raise ValueError(f"Gauss order must be in 1..20, got {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def build_quadrature(curve: ParametricCurve, n_panels: int, gauss_order: int) -> BoundaryQuadrature:
    """Gauss rule on the exact curve with panels uniform in ``theta``."""
    if n_panels < 4:
        raise ValueError("need at least 4 panels")
    if not 2 <= gauss_order <= 10:
        raise ValueError("gauss_order must be in 2..10")
    s, w = gauss_legendre(gauss_order)
    dt = TWO_PI / n_panels
    theta = (np.arange(n_panels)[:, None] + s[None, :]).ravel() * dt
    weights = np.tile(w, n_panels) * dt * curve.speed(theta)
    return BoundaryQuadrature(curve.point(theta), curve.normal(theta), weights, gauss_order)


def polygon_quadrature(
    vertices: np.ndarray, loop: np.ndarray, gauss_order: int = 4, subdivisions: int = 1
) -> BoundaryQuadrature:
    """Gauss rule on the closed polygon through ``vertices[loop]``.

    Each edge ``loop[p] -> loop[p+1]`` is a panel, optionally split into
    ``subdivisions`` equal sub-panels.  Normals are the constant edge normals
    (outward for a counterclockwise loop).
    """
    s, w = gauss_legendre(gauss_order)
    if subdivisions > 1:
        s = ((np.arange(subdivisions)[:, None] + s[None, :]) / subdivisions).ravel()
        w = np.tile(w, subdivisions) / subdivisions
    a = vertices[loop]
    b = vertices[np.roll(loop, -1)]
    edge = b - a
    length = np.linalg.norm(edge, axis=1)
    nrm = np.stack([edge[:, 1], -edge[:, 0]], axis=1) / length[:, None]
    nq = len(s)
    points = (a[:, None, :] + s[None, :, None] * edge[:, None, :]).reshape(-1, 2)
    normals = np.repeat(nrm, nq, axis=0)
    weights = (length[:, None] * w[None, :]).ravel()
    basis = np.stack([1.0 - s, s], axis=-1)
    panel_vertices = np.stack([loop, np.roll(loop, -1)], axis=1)
    return BoundaryQuadrature(points, normals, weights, nq, panel_vertices, basis)
