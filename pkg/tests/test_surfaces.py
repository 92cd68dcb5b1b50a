import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrugate import pattern as pat
from corrugate.chart import grid_points
from corrugate.errors import DegenerateError, DomainError
from corrugate.surfaces import (
    DOMAIN_HI,
    DOMAIN_LO,
    ConoidConfig,
    act,
    caption_alpha,
    caption_theta,
    conoid_corrugated_map,
    conoid_d2,
    conoid_desingularized,
    conoid_frame,
    conoid_jacobian,
    default_beta,
    extended_conoid,
    inversion,
    min_singular_value,
    mobius_check,
    plucker_conoid,
    rp2_extension,
    sphere_cap,
    theta_max,
)

A0 = pat.alpha0()


def test_conoid_values():
    assert np.allclose(plucker_conoid([0.0, 0.0]), [0, 0, 0.5])
    assert np.allclose(plucker_conoid([1.0, 0.0]), [1, 0, 0.5])
    assert np.allclose(conoid_d2([[0.0, 0.0], [0.0, 0.5]]), 0.0, atol=1e-15)


def test_conoid_jacobian_by_fd(rng):
    X = rng.random((10, 2)) * [6, 1] - [3, 0]
    h = 1e-6
    fd = np.stack([(plucker_conoid(X + h * e) - plucker_conoid(X - h * e)) / (2 * h) for e in np.eye(2)], -1)
    assert np.allclose(conoid_jacobian(X), fd, atol=1e-8)


def test_theta_max_unsigned_against_acos():
    x2 = np.linspace(0, 1, 257)
    th = theta_max(x2, oriented=False)
    assert np.all((th >= 0) & (th <= np.pi))
    a = conoid_d2(np.array([-1.0, 0.0]))
    b = conoid_d2(np.array([1.0, 0.0]))
    oracle = np.arccos(np.clip(a @ b / np.linalg.norm(a) / np.linalg.norm(b), -1, 1))
    assert th[0] == pytest.approx(oracle, abs=1e-10)


def test_theta_max_oriented_lift_is_continuous():
    x2 = np.linspace(0, 1, 257)
    th = theta_max(x2)
    assert np.all((th >= 0) & (th < 2 * np.pi))
    assert np.max(np.abs(np.diff(th))) < 0.1
    assert np.allclose(np.minimum(th, 2 * np.pi - th), theta_max(x2, oriented=False), atol=1e-12)


def test_caption_fields():
    x2 = np.full(5, 0.3)
    X = np.stack([np.array([-3.0, -1.5, 0.0, 1.5, 3.0]), x2], -1)
    a = caption_alpha(X)
    assert a[0] == 0 and a[-1] == 0 and a[2] == A0
    assert 0 < a[1] < A0
    assert caption_theta(np.array([-1.0, 0.3])) == 0.0
    assert caption_theta(np.array([1.0, 0.3])) == pytest.approx(theta_max(0.3))


def test_frame_properties():
    X = grid_points(DOMAIN_LO, DOMAIN_HI, 33)
    fr = conoid_frame(X)
    r = ConoidConfig().r
    assert np.allclose(np.linalg.norm(fr.e1, axis=-1), r)
    assert np.allclose(np.linalg.norm(fr.e2, axis=-1), r)
    assert np.max(np.abs(np.sum(fr.e1 * fr.e2, axis=-1))) < 1e-10
    left = np.stack([np.full(9, -1.0), np.linspace(0, 1, 9)], -1)
    assert np.allclose(conoid_frame(left).v2, conoid_d2(left), atol=1e-12)


def test_v2_continuous_across_edges():
    x2 = np.linspace(0, 1, 257)
    for x1 in (-1.0, 1.0):
        X = np.stack([np.full_like(x2, x1), x2], -1)
        Y = np.stack([np.full_like(x2, x1 + 1e-12 * np.sign(x1)), x2], -1)
        assert np.max(np.abs(conoid_frame(X).v2 - conoid_frame(Y).v2)) < 1e-8


def test_zero_amplitude_zone_is_exact():
    X = np.stack([np.linspace(2.0, 3.0, 9), np.linspace(0, 1, 9)], -1)
    assert np.array_equal(conoid_desingularized(X), plucker_conoid(X))


def test_corrugated_map_matches_closed_form(rng):
    X = rng.random((20, 2)) * [6, 1] - [3, 0]
    assert np.allclose(conoid_corrugated_map()(X), conoid_desingularized(X), atol=1e-12)


def test_pinch_points_resolved():
    rep = min_singular_value(res=65)
    assert rep["min_singular_value"] > 0.5
    assert np.all(rep["pinch_singular_values"] > 0.5)


@pytest.mark.parametrize("N,descends", [(4.5, True), (5.0, False), (5.5, True), (6.0, False), (6.5, True)])
def test_mobius_quotient(N, descends):
    rep = mobius_check(ConoidConfig(N=N), res=65)
    assert rep.descends == descends
    assert rep.ok
    assert rep.e1_violation < 1e-12 and rep.e2_violation < 1e-12


@given(st.integers(-3, 3), st.floats(-3, 3), st.floats(0, 1))
def test_group_action(k, x1, x2):
    y = act(k, [x1, x2])
    assert np.allclose(act(-k, y), [x1, x2])


def test_config_validation():
    with pytest.raises(DomainError):
        ConoidConfig(N=0.0)
    with pytest.raises(DomainError):
        ConoidConfig(r=-1.0)
    assert ConoidConfig(N=5.5).quotient_compatible
    assert not ConoidConfig(N=5.0).quotient_compatible


def test_beta_and_rp2_boundary():
    assert default_beta(0.0) == pytest.approx(1.0)
    assert default_beta(1.0) == pytest.approx(((1 + np.cos(2 * np.pi / 5)) / 2) ** 0.75)
    b = np.stack([np.full(257, 2.5), np.linspace(0, 1, 257)], -1)
    assert np.max(np.abs(rp2_extension(b) - sphere_cap(b))) < 1e-9
    outside = np.stack([np.linspace(2.6, 5.0, 9), np.linspace(0, 1, 9)], -1)
    assert np.array_equal(rp2_extension(outside), sphere_cap(outside))
    with pytest.raises(DomainError):
        rp2_extension([5.5, 0.5])


def test_inversion():
    e = np.eye(3)
    assert np.allclose(inversion(e), e)
    y = np.random.default_rng(1).normal(size=(50, 3))
    assert np.allclose(inversion(inversion(y)), y, atol=1e-12)
    with pytest.raises(DegenerateError):
        inversion(np.zeros(3))


def test_inverted_extended_conoid_bounded():
    X = grid_points((-10.0, 0.0), (10.0, 1.0), (401, 129))
    img = inversion(extended_conoid(X))
    assert np.all(np.isfinite(img))
    assert np.max(np.linalg.norm(img, axis=-1)) < 100.0
