"""Output writers: rate tables (CSV), legacy VTK fields and matplotlib figures."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh

CSV_COLUMNS = ("level", "h", "n_dof", "l2_error", "h1_error", "l2_rate", "h1_rate")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_errors_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return path


def read_errors_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {}
        for k, v in r.items():
            if v == "":
                d[k] = None
            elif k in ("level", "n_dof"):
                d[k] = int(v)
            else:
                d[k] = float(v)
        out.append(d)
    return out


def field_arrays(values: np.ndarray) -> dict[str, np.ndarray]:
    """Named real point arrays for a complex nodal field ``(N, sigma)``."""
    values = np.asarray(values).reshape(len(values), -1)
    out = {}
    if values.shape[1] == 1:
        v = values[:, 0]
        out["u_re"], out["u_im"], out["u_abs"] = v.real, v.imag, np.abs(v)
        return out
    for c in range(values.shape[1]):
        out[f"u{c + 1}_re"] = values[:, c].real
        out[f"u{c + 1}_im"] = values[:, c].imag
    out["u_abs"] = np.sqrt((np.abs(values) ** 2).sum(axis=1))
    return out


def write_vtk(mesh: Mesh, arrays: dict[str, np.ndarray], path, title: str = "annulus-abc field") -> Path:
    """Legacy ASCII unstructured grid with one POINT_DATA scalar per array."""
    path = Path(path)
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {nv} double")
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {nv}")
    for name, arr in arrays.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [repr(float(v)) for v in np.asarray(arr, dtype=float)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path):
    """Minimal reader for files produced by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    i = 0
    pts = tris = None
    arrays = {}
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            pts = np.array([list(map(float, tokens[i + 1 + j].split()[:2])) for j in range(n)])
            i += n
        elif line.startswith("CELLS"):
            n = int(line.split()[1])
            tris = np.array([list(map(int, tokens[i + 1 + j].split()[1:])) for j in range(n)])
            i += n
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            n = len(pts)
            arrays[name] = np.array([float(tokens[i + 2 + j]) for j in range(n)])
            i += n + 1
        i += 1
    return pts, tris, arrays


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_convergence(rows: list[dict], path, title: str = "") -> Path:
    """Log-log plot of L2 and H1 errors against h with reference slopes."""
    plt = _pyplot()
    h = np.array([r["h"] for r in rows])
    l2 = np.array([r["l2_error"] for r in rows])
    h1 = np.array([r["h1_error"] for r in rows])
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    for ax, err, name, p in ((axes[0], l2, "L2", 2), (axes[1], h1, "H1", 1)):
        ax.loglog(h, err, "o-", label=f"{name} error")
        ref = err[-1] * (h / h[-1]) ** p
        ax.loglog(h, ref, "k--", lw=0.8, label=f"O(h^{p})")
        ax.set_xlabel("h")
        ax.set_ylabel(f"{name} error")
        ax.grid(True, which="both", lw=0.3)
        ax.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_field(mesh: Mesh, values: np.ndarray, path, title: str = "") -> Path:
    """Real part and magnitude of the first field component on the mesh."""
    plt = _pyplot()
    from matplotlib.tri import Triangulation

    v = np.asarray(values).reshape(mesh.n_vertices, -1)[:, 0]
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    for ax, data, name in ((axes[0], v.real, "Re u"), (axes[1], np.abs(v), "|u|")):
        im = ax.tripcolor(tri, data, shading="gouraud", cmap="viridis")
        ax.set_aspect("equal")
        ax.set_title(name)
        fig.colorbar(im, ax=ax, shrink=0.8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
