import dataclasses
import math

import numpy as np
import pytest

from bulksurf.problems import (ProblemValidationError, get_problem, linear_problem,
                               semilinear_problem, validate_problem)


def test_linear_source_values():
    pr = linear_problem()
    assert pr.f_bulk(0.0, 1.0, 1.0) == pytest.approx(-1.0)
    c = math.cos(math.pi / 4)
    assert pr.f_surf(0.0, c, c) == pytest.approx(2.5)
    assert pr.exact(0.7, 0.4, 0.0) == 0.0
    assert pr.alpha == pr.kappa == 1.0


def test_semilinear_source_values():
    pr = semilinear_problem()
    assert pr.exact(0.0, 0.6, 0.8) == pytest.approx(1.0)
    assert pr.f_bulk(0.0, 0.0, 0.0) == 0.0
    assert pr.f_bulk(0.0, 1.0, 0.0) == pytest.approx(-16.0)
    assert pr.df_surf(0.0, 1.0, 0.0, 1.0) == pytest.approx(-2.0)
    assert pr.surf_nonlinear and not pr.bulk_nonlinear


@pytest.mark.parametrize("name", ["linear", "semilinear"])
def test_shipped_problems_validate(name):
    rep = validate_problem(get_problem(name), n_samples=100)
    assert rep.passed, str(rep)
    assert rep.bulk_residual < 1e-5 and rep.surf_residual < 1e-5
    assert "PASS" in str(rep)


def test_semilinear_lipschitz_bound_recorded():
    rep = validate_problem(semilinear_problem())
    # |1 - 3 p^2| with |p| <= 3 on the ball of radius 2 around values in [-1, 1]
    assert 1.0 < rep.lipschitz_bound <= 26.0


def test_perturbed_source_fails():
    pr = linear_problem()
    f = pr.f_bulk
    bad = dataclasses.replace(pr, f_bulk=lambda t, x, y, u=None: f(t, x, y, u) + 1.0)
    rep = validate_problem(bad)
    assert not rep.passed
    assert rep.bulk_residual == pytest.approx(1.0, abs=1e-4)
    assert rep.worst_point[0] == "bulk"
    with pytest.raises(ProblemValidationError):
        validate_problem(bad, raise_on_failure=True)


def test_inconsistent_jacobian_fails():
    pr = semilinear_problem()
    bad = dataclasses.replace(pr, df_surf=lambda t, x, y, p: np.zeros_like(p))
    assert validate_problem(bad).jacobian_error > 0.1


def test_flux_matches_normal_derivative():
    for pr in (linear_problem(), semilinear_problem()):
        th = np.linspace(0, 2 * np.pi, 7)
        x, y, t, d = np.cos(th), np.sin(th), 0.3, 1e-6
        dn = (pr.exact(t, (1 + d) * x, (1 + d) * y) - pr.exact(t, (1 - d) * x, (1 - d) * y)) / (2 * d)
        np.testing.assert_allclose(pr.flux(t, x, y), dn, atol=1e-8)


def test_unknown_problem():
    with pytest.raises(ValueError, match="unknown problem"):
        get_problem("cubic")
