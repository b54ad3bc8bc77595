import numpy as np
import pytest

import seasonal_dfm
import seasonal_dfm.cli
import seasonal_dfm.dfm
from seasonal_dfm.panel import Panel, as_matrix, standardize
from seasonal_dfm.simulate import SimScenario, gen_scenario


def check_fit_invariants(x, fit):
    """Exact decomposition, orthonormal loadings, projection orthogonality."""
    x = as_matrix(x)
    assert np.max(np.abs(x - (fit.common + fit.residuals))) <= 1e-12
    L = fit.loadings
    assert np.max(np.abs(L.T @ L - np.eye(L.shape[1]))) <= 1e-8
    if fit.spec.r_ns:
        lns = fit.loadings_ns
        e_ns = x - lns @ (lns.T @ x)
        assert np.max(np.abs(lns.T @ e_ns)) <= 1e-8 * max(1.0, np.abs(x).max())


@pytest.fixture(autouse=True)
def _checked_fits(monkeypatch):
    """Every DFM fit made anywhere in the suite is checked for the decomposition invariants."""
    original = seasonal_dfm.dfm.fit

    def checked(panel, spec=seasonal_dfm.dfm.FactorSpec()):
        result = original(panel, spec)
        check_fit_invariants(panel, result)
        checked.count += 1
        return result

    checked.count = 0
    for mod in (seasonal_dfm.dfm, seasonal_dfm):
        monkeypatch.setattr(mod, "fit", checked)
    monkeypatch.setattr(seasonal_dfm.cli, "fit_dfm", checked)
    yield checked


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def seasonal_sim(n=20, T=600, r1=0, r2=2, r3=0, idio_sd=0.3, seed=0, **kw):
    return gen_scenario(SimScenario(n=n, T=T, r1=r1, r2=r2, r3=r3, idio_sd=idio_sd, seed=seed, **kw))


def standardized(sim):
    z, _ = standardize(sim.full_panel)
    return z


@pytest.fixture(scope="session")
def sim_r2():
    return seasonal_sim()
