from dataclasses import dataclass

import numpy as np
import pytest

from rmlmc.pilot import PilotConfig, run_pilot
from rmlmc.sde import GbmParams, call_payoff, gbm_model


@dataclass(frozen=True)
class TwoLevelModel:
    """Y_0 = X, Y_1 = a X + B with X ~ N(mu0, s0^2), B ~ N(muB, sB^2) independent.

    Each level costs one unit, so the coupled cost profile is (0, 1, 2).
    """

    mu0: float = 1.0
    s0: float = 1.0
    a: float = 0.8
    muB: float = 0.3
    sB: float = 0.5

    def bundle_gen(self, top_level, size, rng):
        x = rng.normal(self.mu0, self.s0, size)
        b = rng.normal(self.muB, self.sB, size)
        y = np.stack([x, self.a * x + b], axis=1)
        return y[:, : top_level + 1], float(top_level + 1)

    def delta_gen(self, level, size, rng):
        x = rng.normal(self.mu0, self.s0, size)
        if level == 0:
            return x, 1.0
        b = rng.normal(self.muB, self.sB, size)
        return (self.a - 1.0) * x + b, 1.0

    # closed-form moments
    @property
    def mean_top(self):
        return self.a * self.mu0 + self.muB

    @property
    def var_top(self):
        return self.a ** 2 * self.s0 ** 2 + self.sB ** 2

    @property
    def mean_delta1(self):
        return (self.a - 1.0) * self.mu0 + self.muB

    @property
    def var_delta1(self):
        return (self.a - 1.0) ** 2 * self.s0 ** 2 + self.sB ** 2

    @property
    def eta_bar(self):
        return np.array([self.var_top, self.var_delta1 + self.mean_delta1 ** 2, 0.0])

    @property
    def sq_dist(self):
        return np.array([self.var_top + self.mean_top ** 2, self.eta_bar[1], 0.0])

    @property
    def eta_tilde(self):
        return np.array([
            self.s0 ** 2 + self.var_delta1,
            self.mean_delta1 ** 2 + self.var_delta1,
            0.0,
        ])


@pytest.fixture(scope="session")
def two_level():
    return TwoLevelModel()


@pytest.fixture(scope="session")
def gbm():
    params = GbmParams(r=0.05, sigma=0.2, strike=1.0, x0=1.0)
    return params, gbm_model(params, 1.0), call_payoff(params, 1.0)


@pytest.fixture(scope="session")
def gbm_pilot(gbm):
    _, model, payoff = gbm
    return run_pilot(model, payoff, PilotConfig(m=13, n_pilot=10_000, seed=2024))


def sample_var_se(x):
    """Sample variance and its large-sample standard error."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    s2 = c.var(ddof=1)
    m4 = np.mean(c ** 4)
    return s2, np.sqrt((m4 - s2 ** 2) / x.size)


# One line per acceptance criterion, filled in by tests/test_acceptance.py and
# echoed at the end of the session.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
