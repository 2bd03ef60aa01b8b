import math

import numpy as np
import pytest

from ranimport.geometry import (CYTOPLASM, NUCLEUS, CellGeometry, FaceKind, Mesh, build_disk_mesh,
                                classify_face, face_normal, read_mesh, write_mesh)


def test_geometry_rejects_nucleus_larger_than_cell():
    with pytest.raises(ValueError):
        CellGeometry(4.0, 10.0)
    with pytest.raises(ValueError):
        CellGeometry(10.0, 0.0)


def test_geometry_measures(geometry):
    assert geometry.nucleus_area == pytest.approx(16 * math.pi)
    assert geometry.cytoplasm_area == pytest.approx(84 * math.pi)
    assert geometry.envelope_length == pytest.approx(8 * math.pi)


def test_coarse_mesh_has_envelope(coarse_mesh):
    tr = coarse_mesh.faces_of_kind(FaceKind.TRANSMISSION)
    assert (coarse_mesh.subdomain == CYTOPLASM).any() and (coarse_mesh.subdomain == NUCLEUS).any()
    assert len(tr) >= 8
    r = np.linalg.norm(coarse_mesh.face_midpoints[tr], axis=1)
    assert np.all(np.abs(r - 4.0) <= 0.5 * 2.0)


def test_envelope_faces_double_under_refinement(geometry):
    n1 = len(build_disk_mesh(geometry, 1.0).faces_of_kind(FaceKind.TRANSMISSION))
    n2 = len(build_disk_mesh(geometry, 0.5).faces_of_kind(FaceKind.TRANSMISSION))
    assert abs(n2 - 2 * n1) <= 2


def test_transmission_faces_separate_subdomains(coarse_mesh):
    m = coarse_mesh
    for f in range(m.n_faces):
        a, b = m.face_elements[f]
        kind = classify_face(m, f)
        if b < 0:
            assert kind == FaceKind.OUTER_BOUNDARY
        elif m.subdomain[a] != m.subdomain[b]:
            assert kind == FaceKind.TRANSMISSION
            assert m.subdomain[a] == CYTOPLASM
        else:
            assert kind == FaceKind.INTERIOR


def test_skeleton_partition(coarse_mesh):
    kinds = [coarse_mesh.faces_of_kind(k) for k in FaceKind]
    allf = np.concatenate(kinds)
    assert len(allf) == coarse_mesh.n_faces == len(np.unique(allf))


def test_outer_boundary_lies_on_cell_circle(coarse_mesh):
    fv = coarse_mesh.face_vertices[coarse_mesh.faces_of_kind(FaceKind.OUTER_BOUNDARY)]
    r = np.linalg.norm(coarse_mesh.vertices[fv], axis=-1)
    np.testing.assert_allclose(r, 10.0, rtol=1e-12)


def test_subdomain_tags_follow_centroids(coarse_mesh):
    r = np.linalg.norm(coarse_mesh.centroids, axis=1)
    assert np.all((r < 4.0) == (coarse_mesh.subdomain == NUCLEUS))


def test_elements_nondegenerate(coarse_mesh):
    assert coarse_mesh.element_areas.min() > 0
    h = coarse_mesh.element_diameters
    quality = 4 * math.sqrt(3) * coarse_mesh.element_areas / (3 * h**2)
    assert quality.min() > 0.1


def test_area_partition_and_refinement(geometry):
    errs = []
    for h in (2.0, 1.0, 0.5):
        m = build_disk_mesh(geometry, h)
        total = m.subdomain_area(CYTOPLASM) + m.subdomain_area(NUCLEUS)
        assert total == pytest.approx(m.element_areas.sum(), rel=1e-12)
        errs.append(abs(total - 100 * math.pi))
    # O(h^2): each halving reduces the polygon defect by about 4
    assert errs[1] / errs[2] > 3.0 and errs[0] / errs[1] > 3.0


def test_face_normals(coarse_mesh):
    m = coarse_mesh
    for f in range(m.n_faces):
        a, b = m.face_elements[f]
        n = face_normal(m, f, a)
        assert np.linalg.norm(n) == pytest.approx(1.0)
        # points away from its element
        assert np.dot(m.face_midpoints[f] - m.centroids[a], n) > 0
        if b >= 0:
            np.testing.assert_allclose(n + face_normal(m, f, b), 0.0, atol=1e-14)


def test_face_normal_axis_aligned():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    m = Mesh(verts, np.array([[0, 1, 2]]), np.array([CYTOPLASM]), np.array([1]))
    f = next(i for i in range(m.n_faces) if set(m.face_vertices[i]) == {0, 1})
    np.testing.assert_allclose(face_normal(m, f, 0), [0.0, -1.0], atol=1e-15)
    with pytest.raises(ValueError):
        face_normal(m, f, 5)


def test_classify_face_bad_index(coarse_mesh):
    with pytest.raises(IndexError):
        classify_face(coarse_mesh, coarse_mesh.n_faces)


def test_face_size_is_mean_of_neighbours(coarse_mesh):
    q = coarse_mesh.quantities()
    f = coarse_mesh.faces_of_kind(FaceKind.INTERIOR)
    a, b = coarse_mesh.face_elements[f].T
    np.testing.assert_allclose(q.face_h[f], 0.5 * (q.element_h[a] + q.element_h[b]))


def test_band_radius_is_resolved(geometry):
    m = build_disk_mesh(geometry, 1.0, extra_radii=[8.0])
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.isclose(r, 8.0, atol=1e-12).sum() >= 2 * math.pi * 8 / 1.0 - 1


@pytest.mark.parametrize("kwargs", [{"target_h": 0.0}, {"target_h": 1.0, "degree": 0},
                                    {"target_h": 1.0, "extra_radii": [12.0]}])
def test_mesher_rejects_bad_input(geometry, kwargs):
    with pytest.raises(ValueError):
        build_disk_mesh(geometry, **kwargs)


def test_mesh_dump_round_trip(coarse_mesh, tmp_path):
    path = tmp_path / "mesh.txt"
    write_mesh(coarse_mesh, path)
    header = path.read_text().splitlines()[0]
    assert f"elements={coarse_mesh.n_elements}" in header
    back = read_mesh(path)
    np.testing.assert_array_equal(back.elements, coarse_mesh.elements)
    np.testing.assert_array_equal(back.subdomain, coarse_mesh.subdomain)
    np.testing.assert_array_equal(back.face_kind, coarse_mesh.face_kind)
    np.testing.assert_allclose(back.vertices, coarse_mesh.vertices)
