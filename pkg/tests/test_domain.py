import numpy as np
import pytest

from maxsurf.domain import (
    fuchsian_generators,
    fundamental_domain,
    partner_side,
    polygon_data,
    reduce_word,
    word_inverse,
    word_matrix,
)
from maxsurf.errors import InputError


def test_polygon_angle_sum():
    for g in (2, 3, 5):
        data = polygon_data(g)
        assert abs(data["N"] * data["alpha"] - 2 * np.pi) < 1e-14
        v = data["vertices"]
        q = v[:, 0] ** 2 + v[:, 1] ** 2 - v[:, 2] ** 2
        np.testing.assert_allclose(q, -1.0, atol=1e-12)


def test_side_pairings_involutive():
    for g in (2, 3):
        for j in range(4 * g):
            assert partner_side(g, partner_side(g, j)) == j
            assert partner_side(g, j) != j


def test_words():
    assert reduce_word((1, -1, 2, 3, -3)) == (2,)
    assert word_inverse((1, -2)) == (2, -1)
    gens = fuchsian_generators(2)
    w = (1, 2, -1, -3)
    np.testing.assert_allclose(word_matrix(gens, w) @ word_matrix(gens, word_inverse(w)), np.eye(3), atol=1e-7)


@pytest.mark.parametrize("g,r", [(2, 0), (2, 1), (2, 2), (3, 1)])
def test_orbit_words_glue(g, r):
    dom = fundamental_domain(g, r)
    gens = fuchsian_generators(g)
    scale = np.abs(dom.points).max()
    for v in range(dom.n_vertices):
        img = word_matrix(gens, dom.words[v]) @ dom.points[dom.rep[v]]
        assert np.abs(img - dom.points[v]).max() < 1e-9 * scale**2


def test_triangulation_is_disc():
    for r in (0, 1, 2):
        dom = fundamental_domain(2, r)
        assert len(dom.triangles) == 8 * 6**r
        edges = {}
        for tri in dom.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edges[key] = edges.get(key, 0) + 1
        assert set(edges.values()) <= {1, 2}
        # Euler characteristic of a disc
        assert dom.n_vertices - len(edges) + len(dom.triangles) == 1
        bnd = {v for (a, b), c in edges.items() if c == 1 for v in (a, b)}
        assert bnd == set(np.flatnonzero(dom.boundary))


def test_triangles_oriented():
    dom = fundamental_domain(2, 1)
    p = dom.points[:, :2] / dom.points[:, 2:3]
    a, b, c = p[dom.triangles[:, 0]], p[dom.triangles[:, 1]], p[dom.triangles[:, 2]]
    cross = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    assert np.all(cross > 0)


def test_fan_coordinates():
    dom = fundamental_domain(2, 2)
    ks, lam = dom.fan_coordinates()
    assert np.all(lam >= -1e-12)
    np.testing.assert_allclose(lam.sum(axis=1), 1.0)
    n = 8
    for v in range(dom.n_vertices):
        k = ks[v]
        x = lam[v, 0] * dom.points[0] + lam[v, 1] * dom.points[dom.corners[k]] + lam[v, 2] * dom.points[dom.corners[(k + 1) % n]]
        x = x / np.sqrt(x[2] ** 2 - x[0] ** 2 - x[1] ** 2)
        np.testing.assert_allclose(x, dom.points[v], atol=1e-9)


def test_rep_counts():
    assert [len(fundamental_domain(2, r).reps) for r in (0, 1, 2)] == [2, 22, 142]
    with pytest.raises(InputError):
        fundamental_domain(2, -1)
