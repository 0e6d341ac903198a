"""Triangulations of the annulus between two curves (or of a curved disc).

Coarse meshes come from Shewchuk's Triangle (``triangle`` package) with the
boundary vertices pinned to the exact curves; finer meshes come from red
refinement with boundary midpoints projected back onto the curves.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import triangle

from .curves import TWO_PI, CurveError, ParametricCurve, check_pair

logger = logging.getLogger(__name__)

MIN_ANGLE_DEG = 15.0
# boundary chord as a fraction of the local radius of curvature
CURVATURE_SPACING = 0.3
SIZE_GRADATION = 0.25


class MeshError(RuntimeError):
    pass


@dataclass
class BoundaryLoop:
    """Counterclockwise chain of boundary vertices with their curve parameters.

    ``theta`` increases along the loop and spans less than one period, so the
    closing edge runs from ``theta[-1]`` to ``theta[0] + 2 pi``.
    """

    vertices: np.ndarray
    theta: np.ndarray
    curve: ParametricCurve | None = None

    def __len__(self):
        return len(self.vertices)

    def edges(self) -> np.ndarray:
        return np.stack([self.vertices, np.roll(self.vertices, -1)], axis=1)


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    loops: dict[str, BoundaryLoop] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_gamma(self) -> np.ndarray:
        loop = self.loops.get("gamma")
        return loop.vertices if loop is not None else np.zeros(0, dtype=int)

    @property
    def boundary_gamma0(self) -> np.ndarray:
        return self.loops["gamma0"].vertices

    @property
    def h(self) -> float:
        """Largest triangle diameter (longest edge)."""
        return float(edge_lengths(self).max())

    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    def edges(self) -> np.ndarray:
        return unique_edges(self.triangles)[0]


def signed_areas(vertices, triangles) -> np.ndarray:
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def edge_lengths(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)


def min_angles_deg(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1, 1))))
    return np.min(angles, axis=0)


def unique_edges(triangles: np.ndarray):
    """Sorted unique edges, and for each triangle the index of its edge opposite vertex i."""
    local = np.array([[1, 2], [2, 0], [0, 1]])
    all_edges = np.sort(triangles[:, local].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def check_mesh(mesh: Mesh, min_angle: float = MIN_ANGLE_DEG, curve_tol: float = 1e-12) -> dict:
    """Verify the structural invariants; returns a few summary numbers."""
    areas = mesh.areas()
    if np.any(areas <= 0):
        raise MeshError(f"{int(np.sum(areas <= 0))} triangles with non-positive area")
    edges, tri_edges = unique_edges(mesh.triangles)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    if np.any(counts > 2):
        raise MeshError("non-manifold edge")
    boundary = {tuple(e) for e in edges[counts == 1]}
    expected = set()
    for loop in mesh.loops.values():
        expected |= {tuple(sorted(e)) for e in loop.edges()}
    if boundary != expected:
        raise MeshError("boundary edges do not match the boundary loops")
    for name, loop in mesh.loops.items():
        if loop.curve is None:
            continue
        err = np.abs(mesh.vertices[loop.vertices] - loop.curve.point(loop.theta)).max()
        if err > curve_tol * max(1.0, loop.curve.scale):
            raise MeshError(f"{name} vertices off the curve by {err:.3g}")
    angle = float(min_angles_deg(mesh).min())
    if angle < min_angle:
        raise MeshError(f"minimum angle {angle:.2f} deg below {min_angle}")
    return {
        "n_edges": len(edges),
        "euler": mesh.n_vertices - len(edges) + mesh.n_triangles,
        "min_angle": angle,
        "h": mesh.h,
    }


# -- generation ---------------------------------------------------------------


def _limit_gradation(size: np.ndarray, ds: np.ndarray, rate: float) -> np.ndarray:
    """Smallest periodic size function below ``size`` with slope <= ``rate``."""
    size = size.copy()
    n = len(size)
    for _ in range(2):
        for i in range(2 * n):
            j, k = i % n, (i - 1) % n
            size[j] = min(size[j], size[k] + rate * ds[k])
        for i in range(2 * n, 0, -1):
            j, k = (i - 1) % n, i % n
            size[j] = min(size[j], size[k] + rate * ds[j])
    return size


def _boundary_parameters(curve: ParametricCurve, target_h: float, n_min: int = 8) -> np.ndarray:
    """Boundary vertex parameters with chords <= target_h.

    Spacing is uniform in arc length, tightened to a fraction of the radius of
    curvature so that midpoint projection during refinement stays a small
    perturbation of the child triangles.
    """
    fine = np.linspace(0.0, TWO_PI, 4097)
    _, dx, ddx = curve.jet(fine)
    speed = np.linalg.norm(dx, axis=1)
    kappa = np.abs(dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / speed**3
    size = np.minimum(target_h, CURVATURE_SPACING / np.maximum(kappa, 1e-300))
    ds = speed * (fine[1] - fine[0])
    size = _limit_gradation(size[:-1], ds[:-1], SIZE_GRADATION)
    size = np.append(size, size[0])
    density = speed / size
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fine))])
    n = max(n_min, int(np.ceil(cum[-1])))
    while True:
        theta = np.interp(np.arange(n) * cum[-1] / n, cum, fine)
        pts = curve.point(theta)
        chord = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).max()
        if chord <= target_h:
            return theta
        n = int(np.ceil(n * 1.05)) + 1


def _triangulate(curves: list[ParametricCurve], holes: list, target_h: float):
    thetas = [_boundary_parameters(c, target_h) for c in curves]
    pts, segs, markers, firsts, offset = [], [], [], [], 0
    for m, (c, th) in enumerate(zip(curves, thetas)):
        n = len(th)
        idx = np.arange(offset, offset + n)
        pts.append(c.point(th))
        segs.append(np.stack([idx, np.roll(idx, -1)], axis=1))
        markers.append(np.full(n, m + 1))
        firsts.append(offset)
        offset += n
    geometry = {
        "vertices": np.vstack(pts),
        "segments": np.vstack(segs),
        "segment_markers": np.concatenate(markers)[:, None],
    }
    if holes:
        geometry["holes"] = np.asarray(holes, dtype=float)
    area = 0.43 * target_h**2
    for _ in range(20):
        out = triangle.triangulate(geometry, f"pq30a{area:.12g}")
        verts, tris = out["vertices"].copy(), out["triangles"].astype(np.int64)
        if np.abs(verts[:offset] - geometry["vertices"]).max() > 0:
            raise MeshError("mesher moved boundary vertices")
        if Mesh(verts, tris, {}).h <= target_h:
            break
        area *= 0.8
    else:
        raise MeshError(f"could not reach target h = {target_h}")
    loops = []
    seg_out = out["segments"]
    seg_marker = out["segment_markers"].ravel()
    for m, (c, th) in enumerate(zip(curves, thetas)):
        loops.append(_walk_loop(c, th, firsts[m], seg_out[seg_marker == m + 1], verts))
    fixed = np.zeros(len(verts), dtype=bool)
    for lp in loops:
        fixed[lp.vertices] = True
    verts = _smooth(verts, tris, fixed)
    return verts, tris, loops


def _walk_loop(curve, theta, first, segments, verts) -> BoundaryLoop:
    """Order a (possibly split) boundary chain and put inserted vertices on the curve."""
    n_orig = len(theta)
    nbr: dict[int, list[int]] = {}
    for a, b in segments:
        nbr.setdefault(int(a), []).append(int(b))
        nbr.setdefault(int(b), []).append(int(a))
    toward = verts[first + 1] - verts[first]
    a, b = nbr[first]
    cur = a if (verts[a] - verts[first]) @ toward > (verts[b] - verts[first]) @ toward else b
    chain, prev = [first], first
    while cur != first:
        chain.append(cur)
        nxt = nbr[cur][0] if nbr[cur][0] != prev else nbr[cur][1]
        prev, cur = cur, nxt
    chain = np.array(chain, dtype=np.int64)
    out_theta = np.empty(len(chain))
    is_orig = (chain >= first) & (chain < first + n_orig)
    orig_pos = np.flatnonzero(is_orig)
    for p, q in zip(orig_pos, np.append(orig_pos[1:], len(chain))):
        t_lo = theta[chain[p] - first]
        t_hi = theta[chain[q] - first] if q < len(chain) else theta[0] + TWO_PI
        out_theta[p] = t_lo
        for i in range(p + 1, q):
            t = curve.project(verts[chain[i]], t_lo, t_hi)
            out_theta[i] = t
            verts[chain[i]] = curve.point(t)
    return BoundaryLoop(chain, out_theta, curve)


def _triangle_min_angle(verts, tris) -> np.ndarray:
    """Smallest interior angle of each triangle; ``-inf`` for inverted triangles."""
    p = verts[tris]
    worst = np.full(len(tris), np.inf)
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        ang = np.arctan2(cross, np.einsum("ij,ij->i", a, b))
        worst = np.minimum(worst, np.where(cross > 0, ang, -np.inf))
    return worst


def _star_worst(verts, tris) -> np.ndarray:
    """For every vertex, the smallest angle over the triangles around it."""
    out = np.full(len(verts), np.inf)
    np.minimum.at(out, tris.ravel(), np.repeat(_triangle_min_angle(verts, tris), 3))
    return out


def _colour_classes(adj: sp.csr_matrix, movable: np.ndarray) -> list[np.ndarray]:
    """Greedy colouring so that no two vertices of a class share an edge."""
    colour = np.full(adj.shape[0], -1)
    for v in np.flatnonzero(movable):
        used = set(colour[adj.indices[adj.indptr[v] : adj.indptr[v + 1]]].tolist())
        c = 0
        while c in used:
            c += 1
        colour[v] = c
    return [np.flatnonzero(colour == c) for c in range(colour.max() + 1)]


def _smooth(verts: np.ndarray, tris: np.ndarray, fixed: np.ndarray, sweeps: int = 4) -> np.ndarray:
    """Angle-guarded Laplacian smoothing of the free (non-boundary) vertices.

    Vertices of one colour class share no triangle, so each class moves at once
    and each move is kept only if it improves the worst angle around the vertex.
    """
    verts = verts.copy()
    nv = len(verts)
    e = unique_edges(tris)[0]
    adj = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(nv, nv))
    adj = adj.tocsr()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    classes = _colour_classes(adj, ~fixed)
    for _ in range(sweeps):
        for cls in classes:
            before = _star_worst(verts, tris)
            trial = verts.copy()
            trial[cls] = (adj[cls] @ verts) / degree[cls, None]
            after = _star_worst(trial, tris)
            keep = cls[after[cls] > before[cls]]
            verts[keep] = trial[keep]
    return verts


def generate_annulus(
    gamma: ParametricCurve, gamma0: ParametricCurve, target_h: float, c0: float = 0.1
) -> Mesh:
    """Mesh the region between the obstacle boundary ``gamma`` and ``gamma0``."""
    if target_h <= 0:
        raise ValueError("target_h must be positive")
    try:
        check_pair(gamma, gamma0, c0)
    except CurveError as exc:
        raise CurveError(f"invalid boundary pair: {exc}") from exc
    verts, tris, (lg, lg0) = _triangulate([gamma, gamma0], [gamma.interior_point], target_h)
    mesh = Mesh(verts, tris, {"gamma": lg, "gamma0": lg0})
    check_mesh(mesh)
    return mesh


def generate_disc(
    gamma0: ParametricCurve, target_h: float, interfaces: tuple[ParametricCurve, ...] = ()
) -> Mesh:
    """Mesh the interior of ``gamma0``, optionally resolving interior interface curves."""
    if target_h <= 0:
        raise ValueError("target_h must be positive")
    for i, c in enumerate(interfaces):
        check_pair(c, gamma0, 0.0)
    verts, tris, loops = _triangulate([gamma0, *interfaces], [], target_h)
    named = {"gamma0": loops[0]}
    named.update({f"interface{i}": lp for i, lp in enumerate(loops[1:])})
    mesh = Mesh(verts, tris, named)
    _check_disc(mesh)
    return mesh


def _check_disc(mesh: Mesh) -> None:
    # interface loops are interior edges, so only gamma0 is a true boundary
    outer = Mesh(mesh.vertices, mesh.triangles, {"gamma0": mesh.loops["gamma0"]})
    check_mesh(outer)
    for name, loop in mesh.loops.items():
        err = np.abs(mesh.vertices[loop.vertices] - loop.curve.point(loop.theta)).max()
        if err > 1e-12 * max(1.0, loop.curve.scale):
            raise MeshError(f"{name} vertices off the curve by {err:.3g}")


def refine_uniform(mesh: Mesh, gamma: ParametricCurve | None = None, gamma0: ParametricCurve | None = None) -> Mesh:
    """Split each triangle into four; boundary midpoints are projected onto the curves."""
    override = {"gamma": gamma, "gamma0": gamma0}
    edges, tri_edges = unique_edges(mesh.triangles)
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}

    loops = {}
    for name, loop in mesh.loops.items():
        curve = override.get(name) or loop.curve
        th = loop.theta
        th_next = np.roll(th, -1)
        th_next[-1] += TWO_PI
        new_theta = np.empty(len(th))
        new_idx = np.empty(len(th), dtype=np.int64)
        for i, (a, b) in enumerate(loop.edges()):
            e = edge_index[(min(a, b), max(a, b))]
            new_idx[i] = nv + e
            if curve is None:
                new_theta[i] = 0.5 * (th[i] + th_next[i])
                continue
            t = curve.project(mid[e], th[i], th_next[i])
            new_theta[i] = t
            mid[e] = curve.point(t)
        verts_l = np.empty(2 * len(th), dtype=np.int64)
        theta_l = np.empty(2 * len(th))
        verts_l[0::2], verts_l[1::2] = loop.vertices, new_idx
        theta_l[0::2], theta_l[1::2] = th, new_theta
        loops[name] = BoundaryLoop(verts_l, theta_l, curve)

    m = nv + tri_edges  # midpoint vertex opposite local vertex i
    t = mesh.triangles
    children = np.concatenate(
        [
            np.stack([t[:, 0], m[:, 2], m[:, 1]], axis=1),
            np.stack([m[:, 2], t[:, 1], m[:, 0]], axis=1),
            np.stack([m[:, 1], m[:, 0], t[:, 2]], axis=1),
            np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
        ]
    )
    return Mesh(np.vstack([mesh.vertices, mid]), children, loops)


# -- plain-text exchange ------------------------------------------------------


def write_mesh(mesh: Mesh, path) -> None:
    """Write ``vertices N triangles M``, N ``x y`` lines, M ``i j k`` lines, then
    one ``boundary <name> K`` section per loop with K ``index theta`` lines."""
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for name, loop in mesh.loops.items():
            fh.write(f"boundary {name} {len(loop)}\n")
            for v, th in zip(loop.vertices, loop.theta):
                fh.write(f"{v} {th:.17g}\n")


def read_mesh(path, curves: dict[str, ParametricCurve] | None = None) -> Mesh:
    curves = curves or {}
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    head = lines[0]
    if len(head) != 4 or head[0] != "vertices" or head[2] != "triangles":
        raise MeshError("bad mesh header")
    nv, nt = int(head[1]), int(head[3])
    verts = np.array(lines[1 : 1 + nv], dtype=float)
    tris = np.array(lines[1 + nv : 1 + nv + nt], dtype=np.int64)
    loops, pos = {}, 1 + nv + nt
    while pos < len(lines):
        tag, name, count = lines[pos][0], lines[pos][1], int(lines[pos][2])
        if tag != "boundary":
            raise MeshError(f"unexpected section {tag!r}")
        rows = lines[pos + 1 : pos + 1 + count]
        loops[name] = BoundaryLoop(
            np.array([int(r[0]) for r in rows], dtype=np.int64),
            np.array([float(r[1]) for r in rows]),
            curves.get(name),
        )
        pos += 1 + count
    return Mesh(verts, tris.reshape(-1, 3), loops)
