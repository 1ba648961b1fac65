"""The jit and plain-numpy kernel backends must agree to rounding error."""
import os
import subprocess
import sys

import numpy as np
import pytest

from mixipw import _kernels_numpy as knp
from mixipw import backend

try:
    from mixipw import _kernels_numba as knb
except ImportError:  # pragma: no cover - exercised only without numba
    knb = None

needs_numba = pytest.mark.skipif(knb is None, reason="numba unavailable")

TOL = dict(rtol=1e-10, atol=1e-10)


def mixture_inputs(seed, n=200, k=3):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((n, k)) * 2.0,
            rng.standard_normal((n, k)),
            rng.standard_normal(n),
            rng.uniform(0.2, 3.0, k))


@needs_numba
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mixture_stats_backends_agree(seed):
    args = mixture_inputs(seed)
    resp_a, ll_a, bad_a = knp.mixture_stats(*args)
    resp_b, ll_b, bad_b = knb.mixture_stats(*args)
    assert bad_a == bad_b == -1
    np.testing.assert_allclose(resp_a, resp_b, **TOL)
    assert ll_a == pytest.approx(ll_b, rel=1e-12)
    np.testing.assert_allclose(resp_a.sum(axis=1), 1.0, rtol=1e-12)


@needs_numba
def test_mixture_stats_extreme_logits_agree():
    gate, mu, y, s2 = mixture_inputs(5)
    gate[:, 0] -= 800.0
    resp_a, ll_a, bad_a = knp.mixture_stats(gate, mu, y, s2)
    resp_b, ll_b, bad_b = knb.mixture_stats(gate, mu, y, s2)
    assert bad_a == bad_b == -1
    assert np.isfinite(resp_a).all()
    np.testing.assert_allclose(resp_a, resp_b, **TOL)
    assert ll_a == pytest.approx(ll_b, rel=1e-12)


@needs_numba
def test_mixture_stats_underflow_row_flagged_identically():
    gate, mu, y, s2 = mixture_inputs(6, n=40)
    y[17] = 1e200
    _, ll_a, bad_a = knp.mixture_stats(gate, mu, y, s2)
    _, ll_b, bad_b = knb.mixture_stats(gate, mu, y, s2)
    assert bad_a == bad_b == 17
    assert np.isnan(ll_a) and np.isnan(ll_b)


def softlogit_inputs(seed, m=150, d=4, k=3, hard=False):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(m), rng.standard_normal((m, d - 1))])
    if hard:
        w = np.zeros((m, k))
        w[np.arange(m), rng.integers(0, k, m)] = 1.0
    else:
        w = rng.dirichlet(np.ones(k), size=m)
        w[rng.random((m, k)) < 0.1] = 0.0
    coef = np.vstack([np.zeros(d), rng.standard_normal((k - 1, d))])
    return x, w, coef


@needs_numba
@pytest.mark.parametrize("hard", [False, True])
@pytest.mark.parametrize("ridge", [0.0, 1e-8, 0.5])
def test_softlogit_backends_agree(hard, ridge):
    x, w, coef = softlogit_inputs(3 if hard else 4, hard=hard)
    val_a, grad_a, hess_a = knp.softlogit_stats(x, w, coef, ridge)
    val_b, grad_b, hess_b = knb.softlogit_stats(x, w, coef, ridge)
    assert val_a == pytest.approx(val_b, rel=1e-12)
    np.testing.assert_allclose(grad_a, grad_b, **TOL)
    np.testing.assert_allclose(hess_a, hess_b, **TOL)
    assert knp.softlogit_value(x, w, coef, ridge) == pytest.approx(val_a, rel=1e-12)
    assert knb.softlogit_value(x, w, coef, ridge) == pytest.approx(val_a, rel=1e-12)


@needs_numba
@pytest.mark.parametrize("seed", [7, 8])
def test_wls_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((300, 5))
    w = rng.uniform(0.0, 2.0, 300)
    y = rng.standard_normal(300)
    beta = rng.standard_normal(5)
    a_np, b_np = knp.wls_moments(x, w, y)
    a_nb, b_nb = knb.wls_moments(x, w, y)
    np.testing.assert_allclose(a_np, a_nb, **TOL)
    np.testing.assert_allclose(b_np, b_nb, **TOL)
    assert np.array_equal(a_nb, a_nb.T)
    np.testing.assert_allclose(a_np, a_np.T, rtol=1e-12)
    assert knp.weighted_rss(x, w, y, beta) == pytest.approx(
        knb.weighted_rss(x, w, y, beta), rel=1e-12)


PROBE = ("import mixipw.backend as b; import sys; "
         "sys.stdout.write(b.backend_name() + ':' + b.mixture_stats.__module__)")


def run_probe(disable):
    env = dict(os.environ)
    if disable is None:
        env.pop("MIXIPW_DISABLE_NUMBA", None)
    else:
        env["MIXIPW_DISABLE_NUMBA"] = disable
    out = subprocess.run([sys.executable, "-c", PROBE], capture_output=True,
                         text=True, env=env, timeout=300, check=True)
    return out.stdout


def test_disable_flag_selects_numpy_backend():
    assert run_probe("1") == "numpy:mixipw._kernels_numpy"
    assert run_probe("true") == "numpy:mixipw._kernels_numpy"


def test_falsy_flag_values_keep_default_backend():
    default = run_probe(None)
    assert run_probe("0") == default
    assert run_probe("") == default


@needs_numba
def test_default_backend_is_numba_when_available():
    assert run_probe(None) == "numba:mixipw._kernels_numba"
    assert backend.backend_name() in {"numba", "numpy"}


def test_full_fit_identical_across_backends(tmp_path):
    """An end-to-end fit must not depend on the backend beyond rounding."""
    script = (
        "import numpy as np\n"
        "from mixipw import EmConfig\n"
        "from mixipw.data import VersionStructure\n"
        "from mixipw.simulation import SimConfig, build_truth, simulate_dataset\n"
        "from mixipw.pipeline import fit_pipeline\n"
        "from mixipw.estimators import build_report\n"
        "cfg = SimConfig(n=400, p=4, versions=VersionStructure((2, 1)), snr=8.0, seed=13,\n"
        "                em=EmConfig(restarts=2, seed=13))\n"
        "data, _ = simulate_dataset(build_truth(cfg), cfg, seed=99)\n"
        "fit = fit_pipeline(data, cfg.versions, cfg.em)\n"
        "rep = build_report(data, fit)\n"
        "for key in sorted(rep.version_effects):\n"
        "    print(key, format(rep.version_effects[key], '.10g'))\n"
    )
    outputs = {}
    for disable in ("1", "0"):
        env = dict(os.environ, MIXIPW_DISABLE_NUMBA=disable)
        proc = subprocess.run([sys.executable, "-c", script], capture_output=True,
                              text=True, env=env, timeout=600)
        assert proc.returncode == 0, proc.stderr
        outputs[disable] = proc.stdout
    assert outputs["1"] == outputs["0"]
