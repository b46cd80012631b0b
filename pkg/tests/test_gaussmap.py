import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxsurf.eqmesh import build_mesh
from maxsurf.errors import InputError
from maxsurf.gaussmap import (
    conformality_defect,
    conformality_factors,
    frame_roundtrip_defect,
    gauss_map,
    minimality_residual,
    sym_from_frames,
    sym_log_coords,
)
from maxsurf.indefinite import iso_inverse, random_isometry, signature_matrix
from maxsurf.maxsolver import solve_maximal
from maxsurf.symspace import check_sym, kappa_g, sym_distance, sym_from_plane
from maxsurf.surface_rep import embed_block, fuchsian_rep


@pytest.fixture(scope="module")
def rep():
    return embed_block(fuchsian_rep(2), 2)


@pytest.fixture(scope="module")
def tg(rep):
    return build_mesh(rep, refinement=2)


@pytest.fixture(scope="module")
def bumpy(rep):
    return build_mesh(rep, refinement=2, seed="perturbed", eps=0.05, rng_seed=1)


def test_block_image_negates_point_and_normals(tg):
    img = gauss_map(tg)
    pos = tg.positions()
    s = img.all_vertices()
    for v in range(0, len(pos), 7):
        check_sym(s[v])
        np.testing.assert_allclose(s[v] @ pos[v], -pos[v], atol=1e-9)
        for k in (3, 4):
            e = np.zeros(5)
            e[k] = 1.0
            np.testing.assert_allclose(s[v] @ e, -e, atol=1e-9)


def test_matches_sym_from_plane(tg):
    img = gauss_map(tg)
    for r in range(0, len(img.values), 5):
        t1, t2 = img.tangents[r]
        np.testing.assert_allclose(img.values[r], sym_from_plane(t1, t2), atol=1e-10)


def test_roundtrip_frames(tg, bumpy):
    assert frame_roundtrip_defect(tg, gauss_map(tg)) <= 1e-9
    assert frame_roundtrip_defect(bumpy, gauss_map(bumpy)) <= 1e-9


def test_equivariance_against_direct_lift(bumpy):
    # the image at a domain vertex via its deck word agrees with the image of
    # the lifted tangent plane, computed from the lifted frame directly
    img = gauss_map(bumpy)
    words = bumpy.vertex_words
    fr = np.einsum("vij,vkj->vki", words, img.tangents[bumpy.stars.row_of])
    direct = sym_from_frames(fr[:, 0], fr[:, 1])
    assert np.abs(img.all_vertices() - direct).max() <= 1e-8
    for v in range(0, len(words), 11):
        np.testing.assert_allclose(img.at(v), direct[v], atol=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_naturality(bumpy, seed):
    m = random_isometry(5, np.random.default_rng(seed), scale=0.5)
    img = gauss_map(bumpy)
    moved = gauss_map(bumpy.transformed(m))
    expect = m @ img.values @ iso_inverse(m)
    scale = max(1.0, np.abs(expect).max())
    assert np.abs(moved.values - expect).max() <= 1e-9 * scale


@given(st.floats(-np.pi, np.pi), st.integers(0, 10_000))
def test_same_plane_same_image(theta, seed):
    rng = np.random.default_rng(seed)
    m = random_isometry(5, rng, scale=0.7)
    t1, t2 = m[:, 0], m[:, 1]
    c, s = np.cos(theta), np.sin(theta)
    a = sym_from_frames(t1, t2)
    b = sym_from_frames(c * t1 + s * t2, -s * t1 + c * t2)
    np.testing.assert_allclose(a, b, atol=1e-9 * max(1.0, np.abs(a).max()))


@given(st.integers(0, 10_000))
def test_log_length_is_sym_distance(seed):
    rng = np.random.default_rng(seed)
    a = random_isometry(5, rng, scale=0.6)
    b = random_isometry(5, rng, scale=0.6)
    s1 = sym_from_frames(a[:, 0], a[:, 1])
    s2 = sym_from_frames(b[:, 0], b[:, 1])
    x, _ = sym_log_coords(s1, s2)
    d = np.sqrt(kappa_g()) * np.linalg.norm(x)
    assert d == pytest.approx(sym_distance(s1, s2), rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("r", [1, 2])
def test_block_mesh_ground_truth(rep, r):
    mesh = build_mesh(rep, refinement=r)
    img = gauss_map(mesh)
    defect, factor = conformality_factors(mesh, img)
    assert defect.max() <= 1e-6
    assert factor.min() > 0
    assert np.ptp(factor) <= 1e-6 * factor.mean()
    assert minimality_residual(img) <= 1e-8


def test_perturbed_mesh_is_not_conformal_or_minimal(bumpy):
    img = gauss_map(bumpy)
    assert conformality_defect(bumpy, img) > 1e-2
    assert minimality_residual(img) > 1e-3


def test_solved_surface_is_conformal(rep):
    seed = build_mesh(rep, refinement=1, seed="perturbed", eps=0.05, rng_seed=1)
    before = minimality_residual(gauss_map(seed))
    mesh, report = solve_maximal(rep, seed)
    assert report.converged
    img = gauss_map(mesh)
    assert conformality_defect(mesh, img) <= 1e-3
    assert minimality_residual(img) < 1e-6 * before


def test_per_vertex_residual_shape(tg):
    per = minimality_residual(gauss_map(tg), per_vertex=True)
    assert per.shape == (tg.x.shape[0],)


def test_image_in_positive_component(bumpy):
    # s J is symmetric positive definite on the whole image
    j = np.diag(signature_matrix(5))
    for s in gauss_map(bumpy).values:
        p = s * j
        np.testing.assert_allclose(p, p.T, atol=1e-9 * np.abs(p).max())
        assert np.linalg.eigvalsh((p + p.T) / 2).min() > 0


def test_foreign_image_rejected(tg, rep):
    other = build_mesh(rep, refinement=1)
    with pytest.raises(InputError):
        frame_roundtrip_defect(tg, gauss_map(other))
