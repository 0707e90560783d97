import os
import subprocess
import sys

import numpy as np
import pytest

from renyi_outlier import _backend, _fallback

try:
    from renyi_outlier import _kernels
except ImportError:  # extension not built
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def test_backend_reports_choice():
    avail = _backend.available_backends()
    assert avail["python"] is _fallback
    assert _backend.BACKEND in ("cython", "python")
    if _kernels is not None and not os.environ.get("RENYI_OUTLIER_PURE"):
        assert _backend.BACKEND == "cython"


def test_env_var_forces_fallback():
    code = "import renyi_outlier as r; print(r.BACKEND)"
    env = dict(os.environ, RENYI_OUTLIER_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.parametrize("n", [1, 2, 3, 8, 64, 128, 512])
def test_gamma_q_int_backends_agree(n):
    x = np.concatenate([[0.0, 1e-300, 1e-8], np.geomspace(1e-3, 1e5, 300), [n - 1e-9, float(n), n + 1e-9]])
    np.testing.assert_allclose(_kernels.log_gamma_q_int(n, x), _fallback.log_gamma_q_int(n, x),
                               rtol=1e-13, atol=1e-13)


@needs_ext
@pytest.mark.parametrize("kstar", [1, 2, 8, 128])
def test_ladder_rho_backends_agree(kstar):
    rng = np.random.default_rng(kstar)
    xt = rng.standard_exponential((500, kstar))
    xt[0] = 0.0
    xt[1] = 40.0
    ladder = np.array([1 << e for e in range(kstar.bit_length())], dtype=np.int64)
    np.testing.assert_allclose(_kernels.ladder_rho(xt, ladder), _fallback.ladder_rho(xt, ladder),
                               rtol=1e-13, atol=1e-13)


def _sweep_inputs(rng, p):
    eta = rng.uniform(0.3, 3.0, p)
    zeta = eta * np.log(rng.uniform(0.1, 10.0, p))
    z = zeta - eta * np.log(rng.uniform(size=p))
    ab = np.concatenate([zeta, z])
    delta = np.concatenate([1 / eta, -1 / eta])
    closes = np.r_[np.zeros(p, np.uint8), np.ones(p, np.uint8)]
    perm = np.argsort(ab, kind="stable")
    return ab[perm], delta[perm], closes[perm]


@needs_ext
@pytest.mark.parametrize("p", [1, 2, 17, 1000])
def test_sweep_backends_agree(p):
    ab, delta, closes = _sweep_inputs(np.random.default_rng(p), p)
    a = _kernels.sweep_gaps(ab, delta, closes)
    b = _fallback.sweep_gaps(ab, delta, closes)
    assert a.shape == b.shape == (p,)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
