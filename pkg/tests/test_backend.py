import os
import subprocess
import sys

import numpy as np
import pytest

from warpgeo import _flowkernel_py as pure

compiled = pytest.importorskip("warpgeo._flowkernel")


def test_round_integrate_agrees():
    args = (0.5, 2.0, 2.0, np.sqrt(0.75) / 2, 0.9, 0.01, 1000, 50)
    a = compiled.round_integrate(*args)
    b = pure.round_integrate(*args)
    assert a.shape == b.shape == (21, 5)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_record_every_keeps_last_step():
    out = pure.round_integrate(0.0, 1.0, 1.0, 1.0, 1.0, 0.1, 7, 3)
    assert np.allclose(out[:, 0], [0.0, 0.3, 0.6, 0.7])
    assert np.allclose(compiled.round_integrate(0.0, 1.0, 1.0, 1.0, 1.0, 0.1, 7, 3), out, rtol=1e-14)


def test_nodes_rk4_agrees():
    rng = np.random.default_rng(0)
    n = 17
    r = rng.uniform(2.0, 3.0, n)
    y = np.stack([r, r * rng.uniform(0.8, 1.0, n), rng.uniform(0.2, 0.5, n), rng.uniform(0.2, 0.5, n),
                  rng.uniform(1, 2, n), rng.uniform(1, 2, n)])
    a, b = y.copy(), y.copy()
    for _ in range(20):
        compiled.nodes_rk4(0.5, a, 0.05)
        pure.nodes_rk4(0.5, b, 0.05)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_environment_forces_fallback():
    code = "from warpgeo.flow import BACKEND; print(BACKEND)"
    env = dict(os.environ, WARPGEO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("WARPGEO_PURE_PYTHON")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
