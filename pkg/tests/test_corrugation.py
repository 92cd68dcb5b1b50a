import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from corrugate import pattern as pat
from corrugate.analysis import probe_grid
from corrugate.chart import ChartMap, grid_points
from corrugate.corrugation import (
    LoopFamily,
    Submersion,
    convex_integration,
    corrugation_process,
    shaped_displacement,
    verify_cp_properties,
)
from corrugate.errors import ContractError, DomainError


def plane():
    return ChartMap(lambda X: np.stack([X[..., 0], X[..., 1], 0 * X[..., 0]], -1), [0, 0], [1, 1], 3,
                    jac=lambda X: np.broadcast_to(np.array([[1, 0], [0, 1], [0, 0.0]]), X.shape[:-1] + (3, 2)))


def fields(X):
    a = 1.0 + 0.5 * np.sin(np.pi * X[..., 0]) * X[..., 1]
    E = np.zeros(X.shape[:-1] + (3, 3))
    E[..., 0, 2] = 1.0
    E[..., 2, 0] = 0.5 + 0.1 * X[..., 1]
    E[..., 1, 1] = 0.3 + 0.2 * X[..., 0]
    return a, E


def family():
    return LoopFamily.shaped(fields, 3)


def constant_family():
    v = np.array([1.0, 0.0, 0.0])
    return LoopFamily.constant(lambda X: np.broadcast_to(v, np.shape(X)[:-1] + (3,)), 3)


def test_submersion_contract():
    s = Submersion.linear([2.0, 0.0])
    X = grid_points([0, 0], [1, 1], 3)
    s.check(X)
    assert np.allclose(s.u(X)[0, 0], [0.5, 0.0])
    K = s.kernel_basis(X)
    assert K.shape == (3, 3, 2, 1)
    assert np.allclose(np.abs(K[0, 0, :, 0]), [0.0, 1.0])
    with pytest.raises(DomainError):
        Submersion.linear([0.0, 0.0])
    bad = Submersion.linear([1.0, 0.0], u=[2.0, 0.0])
    with pytest.raises(ContractError):
        bad.check(X)


def test_family_contract_checks():
    X = grid_points([0, 0], [1, 1], 5)
    family().check(X)
    constant_family().check(X)
    lying = LoopFamily(lambda X, T: np.zeros(np.broadcast_shapes(X.shape[:-1], np.shape(T)) + (3,)), 3,
                       average=lambda X: np.ones(X.shape[:-1] + (3,)))
    with pytest.raises(ContractError):
        lying.check(X)
    with pytest.raises(ContractError):
        constant_family().fields(X)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(-2, 2))
def test_family_periodic_in_t(x, y, t):
    g = family()
    X = np.array([x, y])
    assert np.allclose(g(X, t), g(X, t + 1.0), atol=1e-12)


def test_constant_loop_is_identity():
    f0 = plane()
    f1 = corrugation_process(f0, Submersion.axis(0, 2), constant_family(), 5)
    X = grid_points([0, 0], [1, 1], 9)
    assert np.max(np.abs(f1(X) - f0(X))) < 1e-14
    rep = verify_cp_properties(f0, f1, Submersion.axis(0, 2), constant_family(), 5, res=9)
    assert rep.p1 < 1e-14 and rep.ok


def test_shaped_matches_quadrature(rng):
    g = family()
    quad = LoopFamily(lambda X, T: g(X, T), 3, average=g.average)
    X = rng.random((40, 2))
    T = rng.random(40) * 3.0
    assert np.max(np.abs(g.primitive(X, T) - quad.primitive(X, T))) < 1e-9


def test_shaped_displacement_against_scipy():
    a, E = fields(np.array([0.4, 0.6]))
    t = 0.37
    exact = np.array([integrate.quad(lambda s: (E @ pat.pattern_c(a, s))[i] - E[i, 2], 0, t, epsabs=1e-13)[0]
                      for i in range(3)])
    assert np.allclose(shaped_displacement(pat.PATTERN, a, E, t), exact, atol=1e-11)


def test_p1_bound_and_rates():
    f0, g, sub = plane(), family(), Submersion.axis(0, 2)
    X = probe_grid([0, 0], [1, 1], 65)
    Ns = (8, 16, 32, 64)
    errs = []
    for N in Ns:
        f1 = corrugation_process(f0, sub, g, N)
        rep = verify_cp_properties(f0, f1, sub, g, N, X=X)
        assert rep.ok, rep.rows()
        errs.append((rep.p1, rep.p2, rep.p3prime))
    slopes = np.polyfit(np.log(Ns), np.log(np.array(errs)), 1)[0]
    assert np.all(slopes < -0.75) and np.all(slopes > -1.25)


def test_semi_analytic_jacobian_matches_fd(rng):
    f1 = corrugation_process(plane(), Submersion.axis(0, 2), family(), 8.0)
    fd = ChartMap(f1, [0, 0], [1, 1], 3)
    X = 0.05 + 0.9 * rng.random((20, 2))
    assert np.max(np.abs(f1.jacobian(X) - fd.jacobian(X))) < 1e-6


def test_derivative_along_u_tracks_loop():
    f0, g, sub = plane(), family(), Submersion.axis(0, 2)
    X = probe_grid([0, 0], [1, 1], 17)
    d = []
    for N in (16, 32):
        f1 = corrugation_process(f0, sub, g, N)
        d.append(np.max(np.abs(f1.jacobian(X)[..., :, 0] - g(X, N * X[..., 0]))))
    assert d[1] < 0.6 * d[0]


def test_periodicity_preserved_at_integer_phase():
    f0, g = plane(), family()
    f1 = corrugation_process(f0, Submersion.axis(0, 2), g, 4)
    X = grid_points([0, 0], [1, 1], (5, 9))
    assert np.max(np.abs(f1(X) - f0(X))) < 1e-12


def test_locality():
    f0, sub = plane(), Submersion.axis(0, 2)

    def bumped(X):
        a, E = fields(X)
        return np.where(X[..., 0] > 0.5, 0.5 * a, a), E

    f_a = corrugation_process(f0, sub, family(), 7.3)
    f_b = corrugation_process(f0, sub, LoopFamily.shaped(bumped, 3), 7.3)
    X = grid_points([0, 0], [0.5, 1], 9)
    assert np.max(np.abs(f_a(X) - f_b(X))) == 0.0
    Y = grid_points([0.6, 0], [1, 1], 9)
    assert np.max(np.abs(f_a(Y) - f_b(Y))) > 1e-3


def test_convex_integration_fundamental_theorem():
    f0, g = plane(), family()
    N = 6.0
    F = convex_integration(f0, 0, g, N)
    x = np.array([0.3, 0.6])
    h = 1e-5
    d = (F(x + [h, 0]) - F(x - [h, 0])) / (2 * h)
    assert np.allclose(d, g(x, N * x[0]), atol=1e-6)
    assert np.allclose(F(np.array([0.0, 0.6])), f0(np.array([0.0, 0.6])), atol=1e-14)


def test_convex_integration_constant_loop():
    F = convex_integration(plane(), 0, constant_family(), 5)
    X = np.random.default_rng(3).random((10, 2))
    assert np.max(np.abs(F(X) - plane()(X))) < 1e-12


def test_convex_integration_average_contract():
    with pytest.raises(ContractError):
        convex_integration(plane(), 1, constant_family(), 5)


def test_cp_report_csv():
    f0, sub, g = plane(), Submersion.axis(0, 2), constant_family()
    rep = verify_cp_properties(f0, corrugation_process(f0, sub, g, 5), sub, g, 5, res=9)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "property,measured,bound,pass"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["p1", "p2", "p3prime"]
