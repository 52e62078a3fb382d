import os
import subprocess
import sys

import numpy as np
import pytest

from stlink import _accel
from stlink.fec import DecodeAlgorithm, bcjr, rsc_encode
from stlink.fec.scc import default_inner, default_outer
from stlink.fec.siso import _bcjr_loops, _bcjr_vectorized
from stlink.tde import _grid_errors_loops, _grid_errors_vectorized, default_pulse, grid_errors, select_bins


@pytest.mark.parametrize("alg", list(DecodeAlgorithm))
@pytest.mark.parametrize("code", [default_outer(), default_inner()], ids=["outer", "inner"])
def test_bcjr_kernels_agree(alg, code, rng):
    bits = rng.integers(0, 2, 200)
    lc = 2.0 * (1 - 2.0 * rsc_encode(bits, code)) + rng.normal(0, 1.5, code.codeword_length(200))
    la = rng.normal(0, 1, 200)
    a = bcjr(lc, la, code, alg, kernel=_bcjr_loops)
    b = bcjr(lc, la, code, alg, kernel=_bcjr_vectorized)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-9)


@pytest.mark.parametrize("real", [False, True])
def test_grid_kernels_agree(real, rng):
    pulse = default_pulse(64)
    sel = select_bins(pulse, 0.1, 3)
    rt = rng.normal(size=sel.size) + 1j * rng.normal(size=sel.size)
    lams = -rng.uniform(0, 2 * np.pi, (300, 3))
    a = grid_errors(lams, sel, rt, 0.01, real, kernel=_grid_errors_loops)
    b = grid_errors(lams, sel, rt, 0.01, real, kernel=_grid_errors_vectorized)
    assert np.array_equal(np.isinf(a), np.isinf(b))
    fin = np.isfinite(a)
    assert np.allclose(a[fin], b[fin], rtol=1e-9, atol=1e-12)


def test_env_flag_selects_numpy():
    code = (
        "from stlink import _accel; from stlink.fec import siso; from stlink import tde;"
        "assert not _accel.NUMBA_ENABLED;"
        "assert siso._bcjr is siso._bcjr_vectorized;"
        "assert tde._grid_errors is tde._grid_errors_vectorized;"
        "from stlink.sim import LinkConfig, run_link_trial;"
        "from stlink.fec import SccCode, InterleaverSpec;"
        "cfg = LinkConfig(code=SccCode(interleaver=InterleaverSpec(256, 1)), iterations=2);"
        "assert run_link_trial(cfg, 3.0, 1, noiseless=True).errors == 0"
    )
    env = dict(os.environ, STLINK_DISABLE_NUMBA="1")
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


def test_select():
    assert _accel.select("a", "b") == ("a" if _accel.NUMBA_ENABLED else "b")
