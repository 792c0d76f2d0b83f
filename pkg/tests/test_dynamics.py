"""Trained-field evaluation, the adaptive integrator and grid export."""

import numpy as np
import pytest
from scipy.linalg import expm

from cvfield.dataset import subsample_constraint_points
from cvfield.dynamics import (IntegratorSettings, TrainedField, export_field_grid,
                              field_eval, field_jacobian,
                              max_contraction_eigenvalue, rollout)
from cvfield.errors import DataError, DimensionError, IntegrationError
from cvfield import features
from cvfield.kernels import KernelKind

LN_1000 = 6.907755278982137

# tight tolerances wherever a test pins a trajectory value; the defaults
# trade accuracy for speed and sit near 1e-2 absolute on long rollouts
TIGHT = dict(rel_tol=1e-8, abs_tol=1e-12)


class Linear:
    """Analytic linear field xdot = A x, duck-typed like a trained field."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)

    def eval(self, x):
        return np.asarray(x, dtype=float) @ self.A.T

    def jacobian(self, x):
        return self.A


class Riccati:
    # xdot = 1 + x^2 escapes to infinity at t = pi/2
    def eval(self, x):
        return 1.0 + np.asarray(x, dtype=float) ** 2


def test_trained_field_equilibrium(angle_model):
    field, report, _ = angle_model
    assert np.linalg.norm(field.eval(np.zeros(2))) <= 1e-8
    assert field.tau == 0.0
    assert report.max_constraint_violation <= 1e-5


def test_trained_field_zero_coefficients():
    fm = features.sample_feature_map(KernelKind("curl_free", 3.0), 40, 2, seed=0)
    proj = features.build_vanishing_projector(fm, np.zeros((1, 2)))
    f = TrainedField(fm, proj, np.zeros(40), np.zeros((1, 2)))
    assert np.linalg.norm(field_eval(f, np.array([5.0, -3.0]))) == 0.0


def test_trained_field_jacobian_symmetric_and_fd(angle_model):
    field, _, _ = angle_model
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(5):
        x = rng.normal(size=2) * 5
        J = field_jacobian(field, x)
        np.testing.assert_allclose(J, J.T, atol=1e-10)
        Jfd = np.zeros((2, 2))
        for c in range(2):
            e = np.zeros(2)
            e[c] = h
            Jfd[:, c] = (field.eval(x + e) - field.eval(x - e)) / (2 * h)
        assert np.linalg.norm(J - Jfd) <= 1e-5 * max(1.0, np.linalg.norm(J))


def test_max_contraction_eigenvalue_known_values():
    assert max_contraction_eigenvalue(Linear([[-3.0, 1.0], [1.0, -3.0]]),
                                      np.zeros(2)) == pytest.approx(-2.0, abs=1e-12)
    assert max_contraction_eigenvalue(Linear(np.diag([-2.0, -1.0])),
                                      np.zeros(2)) == pytest.approx(-1.0, abs=1e-12)


def test_rollout_exponential_time_to_goal():
    f = Linear(-np.eye(2))
    ro = rollout(f, np.array([1000.0, 0.0]),
                 IntegratorSettings(goal_radius=1.0, horizon=10.0, **TIGHT))
    assert ro.reached_goal
    assert abs(ro.time_to_goal - LN_1000) <= 1e-5
    assert np.linalg.norm(ro.states[-1]) <= 1.0 + 1e-9


def test_rollout_zero_field_times_out():
    f = Linear(np.zeros((2, 2)))
    x0 = np.array([4.0, 3.0])
    ro = rollout(f, x0, IntegratorSettings(goal_radius=1.0, horizon=5.0))
    assert not ro.reached_goal
    assert ro.time_to_goal is None
    assert abs(ro.times[-1] - 5.0) <= 1e-9
    np.testing.assert_allclose(ro.states, np.broadcast_to(x0, ro.states.shape),
                               atol=1e-12)


def test_rollout_start_inside_goal_ball():
    f = Linear(-np.eye(2))
    ro = rollout(f, np.array([0.1, 0.0]), IntegratorSettings(goal_radius=1.0))
    assert ro.reached_goal and ro.time_to_goal == 0.0
    assert ro.times.shape == (1,) and ro.times[0] == 0.0
    np.testing.assert_allclose(ro.states[0], [0.1, 0.0])


def test_rollout_result_consistency():
    A = np.array([[-1.0, -2.0], [2.0, -1.0]])
    f = Linear(A)
    ro = rollout(f, np.array([3.0, -1.0]),
                 IntegratorSettings(goal_radius=0.5, horizon=8.0, **TIGHT))
    np.testing.assert_allclose(ro.states[0], [3.0, -1.0])
    assert ro.times[0] == 0.0
    assert np.all(np.diff(ro.times) > 0)
    np.testing.assert_allclose(ro.velocities, ro.states @ A.T, atol=1e-12)
    # six fresh evaluations per accepted step (FSAL reuses the seventh)
    assert ro.n_field_evals >= 6 * (ro.times.size - 2)


def test_rollout_equilibrium_stays_put(angle_model):
    field, _, _ = angle_model
    ro = rollout(field, np.zeros(2), IntegratorSettings(goal_radius=0.0, horizon=2.0))
    assert np.abs(ro.states).max() <= 1e-8


def test_rollout_dense_output_grid():
    f = Linear(-np.eye(2))
    te = np.linspace(0.0, 3.0, 100)
    ro = rollout(f, np.array([2.0, 0.0]),
                 IntegratorSettings(goal_radius=0.0, horizon=3.0, **TIGHT),
                 t_eval=te)
    np.testing.assert_array_equal(ro.times, te)
    np.testing.assert_allclose(ro.states[:, 0], 2.0 * np.exp(-te), atol=1e-6)
    np.testing.assert_allclose(ro.states[:, 1], 0.0, atol=1e-12)


def test_rollout_dense_output_stops_at_goal():
    f = Linear(-np.eye(2))
    te = np.linspace(0.0, 3.0, 50)
    ro = rollout(f, np.array([2.0, 0.0]),
                 IntegratorSettings(goal_radius=1.0, horizon=3.0, **TIGHT),
                 t_eval=te)
    # samples past the crossing are dropped, the located crossing is final
    assert ro.reached_goal
    assert abs(ro.time_to_goal - np.log(2.0)) <= 1e-5
    assert ro.times[-1] == ro.time_to_goal
    assert np.all(ro.times[:-1] <= ro.time_to_goal)


def test_rollout_rejects_bad_t_eval():
    f = Linear(-np.eye(2))
    with pytest.raises(DataError):
        rollout(f, np.ones(2), IntegratorSettings(horizon=1.0),
                t_eval=np.array([0.0, 0.5, 0.25]))
    with pytest.raises(DataError):
        rollout(f, np.ones(2), IntegratorSettings(horizon=1.0),
                t_eval=np.array([0.0, 2.0]))


def test_fixed_step_order():
    # halving a fixed step must shrink the endpoint error by far more than
    # 8x for a fifth-order pair on a smooth problem
    A = np.array([[-1.0, -2.0], [2.0, -1.0]])
    f = Linear(A)
    x0 = np.array([1.0, 1.0])
    exact = expm(A) @ x0

    def endpoint_error(h):
        ro = rollout(f, x0, IntegratorSettings(goal_radius=0.0, horizon=1.0),
                     fixed_step=h)
        assert abs(ro.times[-1] - 1.0) <= 1e-9
        return np.linalg.norm(ro.states[-1] - exact)

    e1, e2, e3 = endpoint_error(0.1), endpoint_error(0.05), endpoint_error(0.025)
    assert e1 / e2 >= 8.0
    assert e2 / e3 >= 8.0


def test_step_underflow_raises_with_last_state():
    with pytest.raises(IntegrationError) as exc:
        rollout(Riccati(), np.array([0.0]),
                IntegratorSettings(goal_radius=0.0, horizon=10.0))
    err = exc.value
    assert err.last_time is not None and abs(err.last_time - np.pi / 2) <= 0.1
    assert err.last_state is not None and err.last_state.size == 1


def test_export_grid_order_and_columns():
    f = Linear(-np.eye(2))
    cols, rows = export_field_grid(f, (0.0, 1.0, 0.0, 1.0), 2)
    assert cols == ["x1", "x2", "f1", "f2", "lambda_max"]
    # x2 outer, x1 fastest
    np.testing.assert_allclose(rows[:, :2],
                               [[0, 0], [1, 0], [0, 1], [1, 1]])
    np.testing.assert_allclose(rows[:, 2:4], -rows[:, :2], atol=1e-12)
    np.testing.assert_allclose(rows[:, 4], -1.0, atol=1e-12)


def test_export_grid_trained_field(angle_model):
    field, _, avg = angle_model
    res = 21
    cols, rows = export_field_grid(field, (-5.0, 5.0, -5.0, 5.0), res)
    assert cols == ["x1", "x2", "f1", "f2", "lambda_max", "V"]
    assert rows.shape == (res * res, 6)
    # the equilibrium row carries a numerically zero field
    mid = (res // 2) * res + res // 2
    np.testing.assert_allclose(rows[mid, :2], [0.0, 0.0], atol=1e-12)
    assert np.linalg.norm(rows[mid, 2:4]) <= 1e-8
    # lambda_max column agrees with direct evaluation
    for i in (0, mid, res * res - 1):
        assert abs(rows[i, 4] - max_contraction_eigenvalue(field, rows[i, :2])) <= 1e-10
    # numerical gradient of the exported potential reproduces -f
    h = 10.0 / (res - 1)
    V = rows[:, 5].reshape(res, res)
    f1 = rows[:, 2].reshape(res, res)
    f2 = rows[:, 3].reshape(res, res)
    dV2, dV1 = np.gradient(V, h)
    scale = max(np.abs(rows[:, 2:4]).max(), 1.0)
    assert np.abs(dV1[1:-1, 1:-1] + f1[1:-1, 1:-1]).max() <= 0.02 * scale
    assert np.abs(dV2[1:-1, 1:-1] + f2[1:-1, 1:-1]).max() <= 0.02 * scale


def test_export_grid_separable_has_no_potential():
    fm = features.sample_feature_map(KernelKind("gaussian_separable", 3.0), 30, 2, seed=1)
    proj = features.build_vanishing_projector(fm, np.zeros((1, 2)))
    f = TrainedField(fm, proj, np.zeros(60), np.zeros((1, 2)))
    cols, rows = export_field_grid(f, (-1.0, 1.0, -1.0, 1.0), 3)
    assert "V" not in cols
    assert rows.shape == (9, 5)


def test_export_grid_validation():
    f = Linear(-np.eye(2))
    with pytest.raises(DimensionError):
        export_field_grid(f, (0.0, 1.0, 0.0), 4)
    with pytest.raises(DataError):
        export_field_grid(f, (1.0, 0.0, 0.0, 1.0), 4)
    with pytest.raises(DataError):
        export_field_grid(f, (0.0, 1.0, 0.0, 1.0), 1)
    with pytest.raises(DimensionError):
        export_field_grid(lambda x: np.zeros(3), (0.0, 1.0, 0.0, 1.0), 4)


def test_contraction_tube(decay_model):
    """Inside the region where the contraction certificate holds, two
    nearby rollouts can only shrink toward each other."""
    field, report, avg, train, _ = decay_model
    assert field.tau == pytest.approx(0.3)
    cp = subsample_constraint_points(avg, 60)
    lams = np.array([max_contraction_eigenvalue(field, c) for c in cp])
    assert lams.max() <= -0.3 + 1e-5

    tgrid = np.linspace(0.0, 6.0, 301)
    st = IntegratorSettings(goal_radius=0.0, horizon=6.0, rel_tol=1e-8, abs_tol=1e-10)
    x0 = avg.positions[0]
    ra = rollout(field, x0, st, t_eval=tgrid)
    rb = rollout(field, x0 + np.array([0.0, 1.0]), st, t_eval=tgrid)
    sep = np.linalg.norm(ra.states - rb.states, axis=1)
    inside = np.array(
        [max_contraction_eigenvalue(field, x) <= -0.3 for x in ra.states]
    ) & np.array(
        [max_contraction_eigenvalue(field, x) <= -0.3 for x in rb.states]
    )
    assert inside.mean() > 0.9
    d = np.diff(sep)
    assert d[inside[:-1]].max() <= 1e-12
    assert sep[-1] < 0.1 * sep[0]
