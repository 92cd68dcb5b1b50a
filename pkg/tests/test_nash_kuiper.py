import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrugate.chart import MetricField, grid_points
from corrugate.errors import ConeError, DomainError, ShapeError
from corrugate.nash_kuiper import (
    GridState,
    IterationSchedule,
    circle_in_c,
    clifford_torus,
    decompose_metric,
    delta_sequence,
    flat_metric,
    generalized_max_eig,
    isometric_default,
    isometric_grid_step,
    j_density,
    j_density_from_jacobian,
    j_density_step_bound,
    metric_distance,
    nash_kuiper_run,
    square_in_c2,
    stage_metric,
    torus_of_revolution,
)

sym2 = st.tuples(st.floats(0.5, 3.0), st.floats(-0.4, 0.4), st.floats(0.5, 3.0))


def test_isometric_default_of_scaled_square():
    f = square_in_c2(scale=0.5)
    g = flat_metric(2)
    D = isometric_default(f, g)(np.array([0.3, 0.4]))
    assert np.allclose(D, 0.75 * np.eye(2), atol=1e-12)
    with pytest.raises(ShapeError):
        isometric_default(circle_in_c(), g)


def test_stage_metric_interpolates():
    f = square_in_c2(scale=0.5)
    g = flat_metric(2)
    x = np.array([0.2, 0.7])
    assert np.allclose(stage_metric(f, g, 0.0)(x), 0.25 * np.eye(2))
    assert np.allclose(stage_metric(f, g, 1.0)(x), np.eye(2))
    assert np.allclose(stage_metric(f, g, 0.75)(x), (0.25 + 0.75 * 0.75) * np.eye(2))
    with pytest.raises(DomainError):
        stage_metric(f, g, 1.5)


def test_delta_sequence():
    d = delta_sequence(6)
    assert np.allclose(d[:3], [0.75, 0.9375, 0.984375])
    # sqrt increments are sqrt(3) 2^-k, a geometric series with sum sqrt(3)
    full = np.concatenate([[0.0], delta_sequence(20)])
    assert np.sum(np.sqrt(np.diff(full))) == pytest.approx(np.sqrt(3.0) * (1 - 2.0 ** -20), abs=1e-9)
    assert IterationSchedule(stages=20).sqrt_increment_sum() == pytest.approx(np.sqrt(3.0) * (1 - 2.0 ** -20), abs=1e-9)


def test_schedule_validation():
    with pytest.raises(DomainError):
        IterationSchedule(stages=-1)
    with pytest.raises(DomainError):
        IterationSchedule(n_start=16, n_cap=8)
    with pytest.raises(DomainError):
        IterationSchedule(delta_rule=lambda k: np.full(k, 0.5), stages=2).deltas()
    s = IterationSchedule()
    assert s.eps(1, 2.0) == pytest.approx(0.1)


def test_decompose_examples():
    dec = decompose_metric(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert [float(r) for r in dec.rhos] == [1.0, 1.0, 2.0]
    assert np.allclose(dec.reconstruct(), [[2, 1], [1, 2]])
    with pytest.raises(ConeError):
        decompose_metric(np.array([[1.0, 2.0], [2.0, 1.0]]))
    clamped = decompose_metric(np.array([[1.0, 2.0], [2.0, 1.0]]), clamp=True)
    assert all(np.min(r) >= 0 for r in clamped.rhos)
    with pytest.raises(ShapeError):
        decompose_metric(np.eye(3))


@given(st.lists(sym2, min_size=1, max_size=6))
def test_decompose_reconstructs(entries):
    D = np.array([[[e, f], [f, g]] for e, f, g in entries])
    dec = decompose_metric(D)
    assert np.allclose(dec.reconstruct(), D, atol=1e-12)
    assert all(np.min(r) >= 0 for r in dec.rhos)
    assert all(np.linalg.norm(e) == pytest.approx(1.0) for e in dec.ells)


def test_decompose_one_dimensional():
    dec = decompose_metric(np.array([[[0.5]], [[0.0]]]))
    assert np.allclose(dec.rhos[0], [0.5, 0.0])
    with pytest.raises(ConeError):
        decompose_metric(np.array([[[-1.0]]]))


def test_generalized_eig_and_distance():
    A = np.diag([2.0, 6.0])
    B = np.diag([1.0, 2.0])
    assert generalized_max_eig(A, B) == pytest.approx(3.0)
    assert metric_distance(A, A, B) == pytest.approx(0.0)
    assert metric_distance(2 * B, B, B) == pytest.approx(np.sqrt(2.0))


def test_j_density_examples():
    assert j_density(square_in_c2(), np.array([0.3, 0.3])) == pytest.approx(1.0)
    assert j_density(clifford_torus(), np.array([0.1, 0.8])) == pytest.approx(1.0)
    assert j_density(square_in_c2(twist=0.6), np.array([0.3, 0.3])) == pytest.approx(np.cos(0.6))
    complex_line = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    assert j_density_from_jacobian(complex_line) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ShapeError):
        j_density_from_jacobian(np.eye(3)[:, :2])


def test_j_density_frame_invariant(rng):
    f = square_in_c2(twist=0.4)
    x = np.array([0.5, 0.5])
    base = j_density(f, x)
    for _ in range(5):
        F = rng.normal(size=(2, 2)) + 3 * np.eye(2)
        assert j_density(f, x, frame=F) == pytest.approx(base, abs=1e-8)


def test_grid_step_identity_without_increase():
    st_ = GridState.sample(torus_of_revolution(), 33)
    step = isometric_grid_step(st_, 0.0, np.array([1.0, 0.0]), 8)
    assert np.array_equal(step.state.V, st_.V)
    assert np.all(step.alpha == 0.0)


def test_grid_step_reaches_target_metric():
    f = circle_in_c()
    errs = []
    for N in (16, 32):
        st_ = GridState.sample(f, (4097,))
        step = isometric_grid_step(st_, 0.3, np.array([1.0]), N, "totally_real")
        errs.append(np.max(metric_distance(step.state.metric(), step.mu, step.mu)))
    assert errs[1] < 0.6 * errs[0]


def test_grid_step_errors():
    st_ = GridState.sample(torus_of_revolution(), 9)
    with pytest.raises(DomainError):
        isometric_grid_step(st_, -1.0, np.array([1.0, 0.0]), 8)
    with pytest.raises(ShapeError):
        isometric_grid_step(st_, 0.1, np.array([1.0, 0.0]), 8, "totally_real")
    with pytest.raises(ValueError):
        isometric_grid_step(st_, 0.1, np.array([1.0, 0.0]), 8, "hermitian")


def test_j_density_step_bound_trivial():
    f = clifford_torus()
    st_ = GridState.sample(f, 33)
    G = st_.metric()
    u_star = np.zeros(st_.res + (2,))
    u_star[..., 0] = 1.0 / np.sqrt(G[..., 0, 0])
    rep = j_density_step_bound(st_, st_, G, u_star, 8)
    assert rep.ok and rep.fitted_c == pytest.approx(0.0, abs=1e-12)


def test_zero_stage_run():
    r = nash_kuiper_run(torus_of_revolution(), flat_metric(2), sched=IterationSchedule(stages=0), res=33)
    assert r.status == "ok" and r.steps == [] and len(r.stages) == 1
    assert r.final_defect == r.initial_defect


def test_already_isometric_run():
    f = circle_in_c()
    g = MetricField.pullback(f)
    r = nash_kuiper_run(f, g, "totally_real", IterationSchedule(stages=2), res=65)
    assert r.status == "ok" and r.steps == []
    assert r.initial_defect < 1e-8
    assert np.allclose(r.final.V, r.stages[0].V)


def test_circle_run_reduces_defect():
    r = nash_kuiper_run(circle_in_c(), flat_metric(1), "totally_real", IterationSchedule(stages=1), res=1025)
    assert r.status == "ok"
    assert r.final_defect < 0.4 * r.initial_defect
    assert r.shortness[0] > 0
    assert len(r.step_angles) == len(r.steps)
    assert r.drift_total <= r.drift_bound_total
    assert r.to_csv().splitlines()[0] == "stage,form,N,defect,drift,min_kappa,min_sv"


def test_demo_maps_are_short():
    for f in (torus_of_revolution(), clifford_torus(), square_in_c2()):
        X = grid_points(f.lo, f.hi, 9)
        D = isometric_default(f, flat_metric(2, f.lo, f.hi))(X)
        assert np.min(np.linalg.eigvalsh(D)) > 0
