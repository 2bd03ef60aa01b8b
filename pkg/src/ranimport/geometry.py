"""Two-subdomain triangulation of a circular cell with a concentric nucleus.

The mesh is built from concentric rings of vertices.  Consecutive rings are
stitched together with a zipper sweep over the polar angle, so every ring
(in particular the nuclear envelope ring) is resolved exactly by mesh edges
and the interface is conforming by construction.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CYTOPLASM = 1
NUCLEUS = 2


class FaceKind(enum.IntEnum):
    OUTER_BOUNDARY = 0
    INTERIOR = 1
    TRANSMISSION = 2


@dataclass(frozen=True)
class CellGeometry:
    """Circular cell (plasma membrane) containing a circular nucleus.

    Lengths are in micrometres.
    """

    cell_radius: float = 10.0
    nucleus_radius: float = 4.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (np.isfinite(self.cell_radius) and np.isfinite(self.nucleus_radius)):
            raise ValueError("radii must be finite")
        if not 0.0 < self.nucleus_radius < self.cell_radius:
            raise ValueError(
                f"need 0 < nucleus_radius < cell_radius, got "
                f"nucleus_radius={self.nucleus_radius}, cell_radius={self.cell_radius}"
            )

    @property
    def nucleus_area(self) -> float:
        return math.pi * self.nucleus_radius**2

    @property
    def cytoplasm_area(self) -> float:
        return math.pi * (self.cell_radius**2 - self.nucleus_radius**2)

    @property
    def envelope_length(self) -> float:
        return 2.0 * math.pi * self.nucleus_radius


@dataclass(eq=False)
class Mesh:
    """Conforming triangulation of the cell tagged by subdomain.

    Faces are stored once.  For two-sided faces ``face_elements[f] = (plus,
    minus)``; on transmission faces the plus side is always the cytoplasm
    element.  Boundary faces have ``minus == -1``.
    """

    vertices: np.ndarray
    elements: np.ndarray
    subdomain: np.ndarray
    degree: np.ndarray
    geometry: CellGeometry | None = None
    face_vertices: np.ndarray = field(init=False)
    face_elements: np.ndarray = field(init=False)
    face_kind: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=float)
        self.elements = np.array(self.elements, dtype=np.int64)
        self.subdomain = np.array(self.subdomain, dtype=np.int64)
        self.degree = np.broadcast_to(
            np.asarray(self.degree, dtype=np.int64), (len(self.elements),)
        ).copy()
        if np.any(self.degree < 0):
            raise ValueError("polynomial degree must be nonnegative")
        if not np.all(np.isin(self.subdomain, (CYTOPLASM, NUCLEUS))):
            raise ValueError("subdomain tags must be 1 (cytoplasm) or 2 (nucleus)")

        # counterclockwise orientation
        p = self.vertices[self.elements]
        signed = _signed_area(p)
        if np.any(np.abs(signed) <= 1e-14):
            raise ValueError("degenerate element (zero area)")
        flip = signed < 0
        self.elements[flip] = self.elements[flip][:, [0, 2, 1]]
        self._build_faces()
        for arr in (self.vertices, self.elements, self.subdomain, self.degree,
                    self.face_vertices, self.face_elements, self.face_kind):
            arr.setflags(write=False)

    def _build_faces(self):
        ne = len(self.elements)
        local = np.array([[1, 2], [2, 0], [0, 1]])
        edges = self.elements[:, local].reshape(-1, 2)
        key = np.sort(edges, axis=1)
        uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: an edge is shared by more than two elements")
        owner = np.repeat(np.arange(ne), 3)
        nf = len(uniq)
        face_el = np.full((nf, 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        sorted_faces = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_faces[1:] != sorted_faces[:-1]
        face_el[sorted_faces[first], 0] = owner[order[first]]
        face_el[sorted_faces[~first], 1] = owner[order[~first]]

        kind = np.full(nf, FaceKind.INTERIOR, dtype=np.int64)
        boundary = face_el[:, 1] < 0
        kind[boundary] = FaceKind.OUTER_BOUNDARY
        two = ~boundary
        sd = np.where(face_el >= 0, self.subdomain[np.maximum(face_el, 0)], 0)
        tr = two & (sd[:, 0] != sd[:, 1])
        kind[tr] = FaceKind.TRANSMISSION
        # plus side of a transmission face is the cytoplasm element
        swap = tr & (sd[:, 0] == NUCLEUS)
        face_el[swap] = face_el[swap][:, ::-1]

        self.face_vertices = uniq.astype(np.int64)
        self.face_elements = face_el
        self.face_kind = kind

    # -- basic geometric quantities -------------------------------------
    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def element_areas(self) -> np.ndarray:
        return np.abs(_signed_area(self.vertices[self.elements]))

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    @property
    def element_diameters(self) -> np.ndarray:
        p = self.vertices[self.elements]
        d = p - np.roll(p, 1, axis=1)
        return np.sqrt((d**2).sum(axis=2)).max(axis=1)

    @property
    def face_lengths(self) -> np.ndarray:
        p = self.vertices[self.face_vertices]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @property
    def face_midpoints(self) -> np.ndarray:
        return self.vertices[self.face_vertices].mean(axis=1)

    def faces_of_kind(self, kind: FaceKind) -> np.ndarray:
        return np.flatnonzero(self.face_kind == kind)

    def plus_normals(self) -> np.ndarray:
        """Unit normals of all faces pointing out of the plus element."""
        p = self.vertices[self.face_vertices]
        t = p[:, 1] - p[:, 0]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        out = self.face_midpoints - self.centroids[self.face_elements[:, 0]]
        n[(n * out).sum(axis=1) < 0] *= -1.0
        return n

    def subdomain_area(self, tag: int) -> float:
        return float(self.element_areas[self.subdomain == tag].sum())

    def quantities(self) -> "MeshQuantities":
        return MeshQuantities.from_mesh(self)


@dataclass(frozen=True)
class MeshQuantities:
    """Elementwise and face-averaged diameter and polynomial degree."""

    element_h: np.ndarray
    element_m: np.ndarray
    face_h: np.ndarray
    face_m: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "MeshQuantities":
        h = mesh.element_diameters
        m = mesh.degree.astype(float)
        fe = mesh.face_elements
        plus, minus = fe[:, 0], fe[:, 1]
        other = np.where(minus >= 0, minus, plus)
        return cls(h, m, 0.5 * (h[plus] + h[other]), 0.5 * (m[plus] + m[other]))


def _signed_area(p: np.ndarray) -> np.ndarray:
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def _ring_radii(breaks: Sequence[float], target_h: float) -> list[float]:
    radii = [breaks[0]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((hi - lo) / target_h - 1e-9))
        radii.extend(lo + (hi - lo) * np.arange(1, n + 1) / n)
    return [float(r) for r in radii]


def _zipper(inner: np.ndarray, inner_ang: np.ndarray, outer: np.ndarray,
            outer_ang: np.ndarray) -> list[tuple[int, int, int]]:
    na, nb = len(inner), len(outer)
    a_ang = np.append(inner_ang, inner_ang[0] + 2 * math.pi)
    b_ang = np.append(outer_ang, outer_ang[0] + 2 * math.pi)
    i = j = 0
    tris = []
    while i < na or j < nb:
        if j == nb or (i < na and a_ang[i + 1] <= b_ang[j + 1]):
            tris.append((inner[i], outer[j % nb], inner[(i + 1) % na]))
            i += 1
        else:
            tris.append((inner[i % na], outer[j], outer[(j + 1) % nb]))
            j += 1
    return tris


def build_disk_mesh(geometry: CellGeometry, target_h: float, degree: int = 1,
                    extra_radii: Sequence[float] = ()) -> Mesh:
    """Triangulate the cell so that both circles are resolved by mesh edges.

    Parameters
    ----------
    geometry : CellGeometry
    target_h : float
        Target element size (micrometres).  Radial ring spacing and the
        arc-length spacing of ring vertices are both at most ``target_h``.
    degree : int
        Polynomial degree tag assigned to every element.
    extra_radii : sequence of float
        Additional radii to resolve exactly with a ring of edges (used for
        the peripheral cargo band, for instance).
    """
    if not target_h > 0:
        raise ValueError(f"target_h must be positive, got {target_h}")
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    rn, rc = geometry.nucleus_radius, geometry.cell_radius
    extra = sorted(float(r) for r in extra_radii)
    if any(not 0 < r < rc for r in extra):
        raise ValueError("extra radii must lie strictly inside the cell")

    nuc_breaks = [0.0] + [r for r in extra if r < rn - 1e-12] + [rn]
    cyt_breaks = [rn] + [r for r in extra if rn + 1e-12 < r] + [rc]
    radii = _ring_radii(nuc_breaks, target_h) + _ring_radii(cyt_breaks, target_h)[1:]
    n_nuc_bands = len(_ring_radii(nuc_breaks, target_h)) - 1

    cx, cy = geometry.center
    verts = [(cx, cy)]
    rings: list[tuple[np.ndarray, np.ndarray]] = [(np.array([0]), np.array([0.0]))]
    for k, r in enumerate(radii[1:], start=1):
        n = max(6, math.ceil(2 * math.pi * r / target_h - 1e-9))
        spacing = 2 * math.pi / n
        ang = spacing * (np.arange(n) + 0.5 * (k % 2))
        idx = np.arange(len(verts), len(verts) + n)
        verts.extend(zip(cx + r * np.cos(ang), cy + r * np.sin(ang)))
        rings.append((idx, ang))

    tris: list[tuple[int, int, int]] = []
    tags: list[int] = []
    ring1, _ = rings[1]
    for a, b in zip(ring1, np.roll(ring1, -1)):
        tris.append((0, int(a), int(b)))
    tags.extend([NUCLEUS] * len(ring1))
    for k in range(1, len(rings) - 1):
        band = _zipper(rings[k][0], rings[k][1], rings[k + 1][0], rings[k + 1][1])
        tris.extend(band)
        tags.extend([NUCLEUS if k < n_nuc_bands else CYTOPLASM] * len(band))

    return Mesh(np.array(verts), np.array(tris), np.array(tags), degree, geometry)


def classify_face(mesh: Mesh, face_id: int) -> FaceKind:
    if not 0 <= face_id < mesh.n_faces:
        raise IndexError(f"unknown face id {face_id} (mesh has {mesh.n_faces} faces)")
    return FaceKind(int(mesh.face_kind[face_id]))


def face_normal(mesh: Mesh, face_id: int, from_element: int) -> np.ndarray:
    """Unit normal of ``face_id`` pointing out of ``from_element``."""
    if not 0 <= face_id < mesh.n_faces:
        raise IndexError(f"unknown face id {face_id}")
    plus, minus = mesh.face_elements[face_id]
    if from_element not in (plus, minus) or from_element < 0:
        raise ValueError(f"element {from_element} is not adjacent to face {face_id}")
    a, b = mesh.vertices[mesh.face_vertices[face_id]]
    t = b - a
    n = np.array([t[1], -t[0]]) / math.hypot(*t)
    if np.dot(n, 0.5 * (a + b) - mesh.centroids[from_element]) < 0:
        n = -n
    return n


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    """Dump the mesh as plain text.

    Layout: one header line ``# ranimport-mesh v1 vertices=NV elements=NE
    faces=NF`` followed by NV lines ``x y``, NE lines ``i j k subdomain
    degree`` and NF lines ``a b kind plus minus``.
    """
    lines = [f"# ranimport-mesh v1 vertices={len(mesh.vertices)} "
             f"elements={mesh.n_elements} faces={mesh.n_faces}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k} {s} {m}" for (i, j, k), s, m
              in zip(mesh.elements, mesh.subdomain, mesh.degree)]
    lines += [f"{a} {b} {FaceKind(int(kd)).name} {p} {q}" for (a, b), kd, (p, q)
              in zip(mesh.face_vertices, mesh.face_kind, mesh.face_elements)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path: str | Path) -> Mesh:
    text = Path(path).read_text().splitlines()
    header = dict(tok.split("=") for tok in text[0].split()[3:])
    nv, ne = int(header["vertices"]), int(header["elements"])
    verts = np.array([[float(v) for v in ln.split()] for ln in text[1:1 + nv]])
    el = np.array([[int(v) for v in ln.split()] for ln in text[1 + nv:1 + nv + ne]])
    return Mesh(verts, el[:, :3], el[:, 3], el[:, 4])
