"""Shared fixtures: a four-covariate simulation design used across the suite.

Covariates: x1 (standard normal) and x2 (0/1 with P(x2=1)=0.4) enter the
wage equation; z3 and z4 (standard normals) are hours-only exclusion
restrictions. The hours design adds squares of the continuous covariates;
the wage design carries the normal quantile of the control value, so the
simulator's conditional mean is exactly representable.
"""

import pytest

import seldecomp as sd

Z_NAMES = ("x1", "x2", "z3", "z4")
X_NAMES = ("x1", "x2")


def standard_law():
    base = {"x1": ("normal", 0.0, 1.0), "z3": ("normal", 0.0, 1.0),
            "z4": ("normal", 0.0, 1.0)}
    return sd.CovariateLaw(Z_NAMES, (
        sd.MixtureComponent(0.6, {**base, "x2": ("point", 0.0)}),
        sd.MixtureComponent(0.4, {**base, "x2": ("point", 1.0)}),
    ))


def hsm_params(alpha, gamma, rho, law=None):
    return sd.HSMParams(alpha, gamma, rho, X_NAMES, Z_NAMES,
                        standard_law() if law is None else law)


ALPHA = (1.0, 0.5, -0.5)
GAMMA = (0.9, 0.4, -0.3, 0.5, 0.25)  # ~74% worker share


@pytest.fixture(scope="session")
def r_spec():
    return sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("x2"),
                          sd.linear("z3"), sd.linear("z4"), sd.square("x1"),
                          sd.square("z3"), sd.square("z4")))


@pytest.fixture(scope="session")
def w_spec_qnorm():
    """Wage design matching the simulator: x terms plus the normal quantile of V."""
    return sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("x2")),
                         sd.ControlSpec(False, False, False, normal_quantile=True))


@pytest.fixture(scope="session")
def w_spec_default():
    """Production-style wage design: x terms, V, V^2, covariate x V interactions."""
    return sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("x2")),
                         sd.ControlSpec(True, True, True, False))


@pytest.fixture(autouse=True)
def _quiet_support_warnings():
    """The box-coverage diagnostic fires routinely on simulated tails."""
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*observed covariate ranges.*")
        yield
