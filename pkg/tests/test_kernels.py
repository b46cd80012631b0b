import os
import subprocess
import sys

import numpy as np
import pytest

from maxsurf import _kernels as K
from maxsurf.eqmesh import build_mesh
from maxsurf.surface_rep import embed_block, fuchsian_rep

pytestmark = pytest.mark.skipif(not K._HAVE_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def mesh():
    rep = embed_block(fuchsian_rep(2), 2)
    return build_mesh(rep, refinement=1, seed="perturbed", eps=0.05, rng_seed=3)


def test_star_stencil_parity(mesh):
    a = (mesh.x, mesh.neighbors(), mesh.stars.deg)
    for u, v in zip(K.star_stencil_np(*a), K.star_stencil_nb(*a)):
        np.testing.assert_allclose(u, v, rtol=1e-10, atol=1e-10)


def test_fit_frames_parity(mesh):
    a = (mesh.x, mesh.fit_points(), mesh.stars.fit_deg, mesh.stars.deg)
    for u, v in zip(K.fit_frames_np(*a), K.fit_frames_nb(*a)):
        np.testing.assert_allclose(u, v, rtol=1e-9, atol=1e-11)


def test_fit_frames_flags_nonfinite(mesh):
    y = mesh.fit_points().copy()
    y[0, 1] = np.nan
    a = (mesh.x, y, mesh.stars.fit_deg, mesh.stars.deg)
    st_np = K.fit_frames_np(*a)[-1]
    st_nb = K.fit_frames_nb(*a)[-1]
    assert st_np[0] != 0 and st_nb[0] != 0
    np.testing.assert_array_equal(st_np[1:], st_nb[1:])


def test_env_flag_selects_numpy():
    code = "from maxsurf import _kernels as K; print(K.backend())"
    env = dict(os.environ, MAXSURF_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["MAXSURF_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
