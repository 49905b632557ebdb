import os
import subprocess
import sys

import numpy as np

import osrf
from osrf._accel import HAVE_NUMBA

PROBE = """
import numpy as np, osrf
from osrf.nn import Model, default_architecture
arch = default_architecture((2, 64), 3, conv_channels=(4,), pool=4, dense_units=(8,))
m = Model.from_architecture(arch, (2, 64), seed=7)
x = np.random.default_rng(1).random((3, 2, 64))
print(osrf.BACKEND)
print(repr(m.predict_batch(x)[1].tolist()))
"""


def _probe(backend):
    env = dict(os.environ)
    if backend is None:
        env.pop("OSRF_BACKEND", None)
    else:
        env["OSRF_BACKEND"] = backend
    return subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env)


def test_numpy_backend_selected_and_agrees():
    a, b = _probe("numpy"), _probe(None)
    assert a.returncode == 0 and b.returncode == 0, a.stderr + b.stderr
    assert a.stdout.splitlines()[0] == "numpy"
    expected = "numba" if HAVE_NUMBA else "numpy"
    assert b.stdout.splitlines()[0] == expected
    pa = np.array(eval(a.stdout.splitlines()[1]))
    pb = np.array(eval(b.stdout.splitlines()[1]))
    np.testing.assert_allclose(pa, pb, rtol=1e-10, atol=1e-12)


def test_invalid_backend_rejected():
    r = _probe("cuda")
    assert r.returncode != 0 and "OSRF_BACKEND" in r.stderr


def test_backend_exposed():
    assert osrf.BACKEND in ("numba", "numpy")
