import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from chazylab import _kernels
from chazylab._accel import NUMBA_ENABLED, python_version
from chazylab.core import SystemSpec
from chazylab.roots import roots_many, track_path


def test_python_stepper_matches_compiled(rng):
    params = SystemSpec.for_k(9).kernel_params
    ic = rng.normal(size=3) + 1j * rng.normal(size=3)
    fast = _kernels.dopri5(_kernels.SYSTEM_CHAZY, params, ic, -0.125, 0.125, 1e-10, 10000)
    slow = _kernels.python_stepper()(python_version(_kernels.chazy_rhs), params, ic,
                                     -0.125, 0.125, 1e-10, 10000)
    assert fast[3] == slow[3] == _kernels.STATUS_COMPLETED
    assert np.array_equal(fast[0], slow[0])
    np.testing.assert_allclose(fast[1], slow[1], rtol=1e-13)


def test_halphen_kernel_matches_python(rng):
    sq = np.array([0.25, 1 / 9, 0.25], dtype=complex)
    ic = rng.normal(size=3) + 0j
    fast = _kernels.dopri5(_kernels.SYSTEM_HALPHEN, sq, ic, 0.0, 0.1, 1e-10, 10000)
    slow = _kernels.python_stepper()(python_version(_kernels.halphen_rhs), sq, ic,
                                     0.0, 0.1, 1e-10, 10000)
    np.testing.assert_allclose(fast[1][-1], slow[1][-1], rtol=1e-13)


def test_track_kernel_matches_python(rng):
    n = 300
    xs = np.linspace(0, 1, n)
    roots = np.stack([np.exp(2j * xs), 1.5 + xs, -1 - 1j * xs], axis=1)
    rates = np.stack([2j * np.exp(2j * xs), np.ones(n), -1j * np.ones(n)], axis=1)
    for start in range(3):
        a = track_path(roots, rates, xs, start)
        b = python_version(_kernels.track_nearest)(roots, rates.astype(complex), xs, start, True)
        assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]


@pytest.mark.parametrize("degree", [2, 3, 4])
def test_root_backends_agree(degree, rng):
    coeffs = rng.normal(size=(200, degree)) + 1j * rng.normal(size=(200, degree))
    a = np.sort_complex(roots_many(coeffs, backend="numba"))
    b = np.sort_complex(roots_many(coeffs, backend="numpy"))
    np.testing.assert_allclose(a, b, atol=1e-12)


def helper():
    return 1


def outer():
    return helper() + 1


def test_python_version_overrides_globals():
    assert python_version(outer, helper=lambda: 41)() == 42
    assert python_version(outer) is outer


FALLBACK_SCRIPT = textwrap.dedent("""
    import numpy as np
    from chazylab import _accel, _kernels
    from chazylab.core import SystemSpec
    from chazylab.odeint import integrate
    from chazylab.roots import roots_many
    from chazylab.verify import audit

    assert not _accel.NUMBA_ENABLED
    assert not hasattr(_kernels.dopri5, "py_func")
    spec = SystemSpec.for_k(None)
    traj = integrate(_kernels.chazy_rhs, [-6, 0, 0], 0.0, 1.0, 1e-10,
                     params=spec.kernel_params)
    assert abs(traj.ys[-1, 0] + 3) < 1e-8
    r = roots_many(np.array([[-6, 11, -6]]))[0]
    assert np.allclose(np.sort(r.real), [1, 2, 3])
    rep = audit("T13", trials=3, seed=1, exceptional=False)
    assert rep.passing == ["statement"], rep.to_dict()
    print("ok")
""")


def test_fallback_without_numba():
    env = dict(os.environ, CHAZYLAB_NUMBA="0")
    proc = subprocess.run([sys.executable, "-c", FALLBACK_SCRIPT], env=env,
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "ok"


def test_acceleration_default():
    if os.environ.get("CHAZYLAB_NUMBA", "1") == "0":
        pytest.skip("acceleration disabled for this run")
    pytest.importorskip("numba")
    assert NUMBA_ENABLED
    assert hasattr(_kernels.dopri5, "py_func")
