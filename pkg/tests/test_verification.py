import numpy as np
import pytest

from bulksurf.assembly import assemble_operators
from bulksurf.mesh import generate_disk_mesh
from bulksurf.verification import (TINY_H, dense_operators, identity_suite,
                                   oracle_step_errors, residual_orders)


def test_tiny_mesh_size():
    assert generate_disk_mesh(TINY_H).n_vertices <= 30


def test_dense_operators_match_sparse_assembly():
    m = generate_disk_mesh(0.4)
    o = assemble_operators(m)
    Mu, Ku, Mp, Kp, n1 = dense_operators(m)
    assert n1 == o.n1
    for D, S in ((Mu, o.Mu), (Ku, o.Ku), (Mp, o.Mp), (Kp, o.Kp)):
        np.testing.assert_allclose(D, S.toarray(), atol=1e-14)


def test_identities_at_fixed_step():
    worst = identity_suite(n_sequences=200, seed=7, tau=1e-3)
    assert max(worst.values()) < 1e-12


def test_identity_suite_detects_wrong_formula():
    # a perturbed energy identity would not hold: sanity of the measurement
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4)
    lhs = 2 * (x[3] - x[2]) * (3 * x[3] - 4 * x[2] + x[1]) / 2
    wrong = 2.5 * (x[3] - x[2]) ** 2 - 0.5 * (x[2] - x[1]) ** 2
    assert abs(lhs - wrong) > 1e-6


def test_residual_orders():
    s = residual_orders()
    assert s["bdf"] == pytest.approx(2, abs=0.1)
    assert s["E2"] == pytest.approx(2, abs=0.1)
    assert s["E3"] == pytest.approx(3, abs=0.1)


@pytest.mark.parametrize("scheme", ["split-a", "split-b", "split-c", "aux", "mono", "third"])
@pytest.mark.parametrize("tau", [0.2, 0.01])
def test_dense_oracle(scheme, tau):
    e = oracle_step_errors(scheme, tau=tau, seed=1)
    assert max(e["u"], e["p"], e["lam"]) < 1e-9
