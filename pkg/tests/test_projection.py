import numpy as np
import pytest

from config import Config
from errors import InfeasibleConstraintError, InvalidArgumentError, ProjectionNonConvergenceError
from field import CellField, Mesh
from logger import solver_logger
from oracles.projection_oracles import bisection_multiplier, dense_dual_projection, entropy_projection
from polytope import Polytope
from projection import (
    GlobalConstraints,
    _illinois,
    at_least,
    constraint_values,
    dual_objective,
    project,
    project_multi,
    project_single,
)


def test_constraint_values_examples(segment, rng):
    mesh = Mesh(3.0, 1.0, 3, 1)
    psi = CellField.zeros(mesh, 1)
    C = GlobalConstraints([[1.0]], [1.0])
    np.testing.assert_allclose(constraint_values(segment, psi, C), [1.5], atol=1e-14)

    P = Polytope(np.eye(3))
    small = Mesh(1.0, 1.0, 2, 2)
    psi = CellField(small, rng.normal(size=(4, 3)))
    W = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 2.0]])
    C = GlobalConstraints(W, [1.0, 1.0])
    expected = sum(0.25 * (W @ P.map_points(psi.values[e])) for e in range(4))
    np.testing.assert_allclose(constraint_values(P, psi, C), expected, atol=1e-14)


def test_global_constraints_validation():
    with pytest.raises(InvalidArgumentError):
        GlobalConstraints([[0.0, 0.0]], [1.0])
    with pytest.raises(InvalidArgumentError):
        GlobalConstraints([[1.0, 0.0]], [1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        GlobalConstraints([[1.0, np.inf]], [1.0])

    C = GlobalConstraints.from_rows([([1.0, 0.0], 0.5), at_least([0.0, 1.0], 0.2)])
    assert C.count == 2
    np.testing.assert_array_equal(C.W[1], [0.0, -1.0])
    assert C.b[1] == -0.2
    with pytest.raises(ValueError):
        C.b[0] = 3.0
    assert GlobalConstraints.empty(3).count == 0


def test_feasibility_certificate():
    simplex = Polytope(np.eye(4))
    C = GlobalConstraints(np.eye(4)[1:], [0.18, 0.36, 0.36])
    assert C.check_feasible(simplex, 3.0) > 0

    impossible = GlobalConstraints([[-1.0, 0.0, 0.0, 0.0]], [-3.5])   # ∫η₁ ≥ 3.5 > |Ω|
    with pytest.raises(InfeasibleConstraintError):
        impossible.check_feasible(simplex, 3.0)
    with pytest.raises(InfeasibleConstraintError):
        C.check_feasible(simplex, 3.0, interior_point=np.full(4, 0.25))


# ----------------------------------------------------------------------
# 单约束
# ----------------------------------------------------------------------
def test_project_single_active(segment):
    mesh = Mesh(3.0, 1.0, 6, 2)
    psi = CellField.constant(mesh, 1.0)
    result = project_single(segment, psi, [1.0], 0.5 * mesh.area)
    assert result.mu[0] == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(segment.map_points(result.psi.values), 0.5, atol=1e-9)
    assert abs(result.violation[0]) <= 1e-10


def test_project_single_inactive(segment):
    mesh = Mesh(3.0, 1.0, 6, 2)
    psi = CellField.constant(mesh, -2.0)
    result = project_single(segment, psi, [1.0], 0.5 * mesh.area)
    assert result.mu[0] == 0.0
    np.testing.assert_array_equal(result.psi.values, psi.values)
    assert result.psi is not psi


def test_project_single_matches_bisection(rng, unit_square):
    mesh = Mesh(1.0, 1.0, 3, 3)
    psi = CellField.constant(mesh, rng.normal(size=2))
    w = np.array([1.0, 0.0])
    start = float(constraint_values(unit_square, psi, GlobalConstraints([w], [0.0]))[0])
    b = 0.6 * start
    result = project_single(unit_square, psi, w, b, tol_g=1e-13)
    assert result.mu[0] > 0
    assert result.mu[0] == pytest.approx(bisection_multiplier(unit_square, psi, w, b), abs=1e-10)


def test_constraint_function_is_nonincreasing(rng):
    P = Polytope(np.eye(3))
    mesh = Mesh(1.0, 1.0, 4, 4)
    psi = CellField(mesh, rng.normal(size=(16, 3)))
    w = np.array([0.0, 1.0, 0.5])
    C = GlobalConstraints([w], [0.0])
    values = [constraint_values(P, psi.with_values(psi.values - mu * w), C)[0] for mu in np.linspace(0, 20, 81)]
    assert np.all(np.diff(values) <= 1e-14)


def test_unreachable_bound_is_infeasible(segment):
    mesh = Mesh(1.0, 1.0, 2, 1)
    with pytest.raises(InfeasibleConstraintError):
        project_single(segment, CellField.zeros(mesh, 1), [1.0], -0.1)


# ----------------------------------------------------------------------
# 多约束
# ----------------------------------------------------------------------
def test_project_multi_with_one_constraint_matches_single(rng):
    P = Polytope(np.eye(3))
    mesh = Mesh(1.0, 1.0, 4, 4)
    psi = CellField(mesh, rng.normal(size=(16, 3)))
    w = np.array([0.0, 1.0, 0.0])
    single = project_single(P, psi, w, 0.2, tol_g=1e-13)
    multi = project_multi(P, psi, GlobalConstraints([w], [0.2]), tol_g=1e-13)
    np.testing.assert_allclose(multi.mu, single.mu, atol=1e-10)
    np.testing.assert_allclose(multi.psi.values, single.psi.values, atol=1e-10)


def test_project_multi_with_slack_constraint(rng):
    P = Polytope(np.eye(3))
    mesh = Mesh(1.0, 1.0, 2, 2)
    psi = CellField(mesh, rng.normal(size=(4, 3)) + [0.0, 1.0, 0.0])
    C = GlobalConstraints([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.2, 0.99])
    result = project_multi(P, psi, C)
    assert result.mu[1] == 0.0
    single = project_single(P, psi, C.W[0], C.b[0])
    np.testing.assert_allclose(result.psi.values, single.psi.values, atol=1e-9)


def test_project_multi_matches_dense_dual(unit_square):
    mesh = Mesh(1.0, 1.0, 1, 1)
    psi = CellField(mesh, np.array([[1.0, 1.0]]))
    C = GlobalConstraints(np.eye(2), [0.3, 0.3])
    result = project_multi(unit_square, psi, C, tol_g=1e-12)
    assert np.all(result.mu > 0)
    np.testing.assert_allclose(result.mu, dense_dual_projection(unit_square, psi, C), atol=1e-6)


def test_project_multi_minimizes_bregman_distance(hexagon):
    mesh = Mesh(1.0, 1.0, 1, 1)
    psi = CellField(mesh, np.array([[1.5, 0.8]]))
    C = GlobalConstraints([[1.0, 0.0], [0.0, 1.0]], [0.2, 0.1])
    result = project_multi(hexagon, psi, C, tol_g=1e-12)
    eta = hexagon.map_points(result.psi.values)[0]
    np.testing.assert_allclose(eta, entropy_projection(hexagon, psi.values[0], C.W, C.b), atol=1e-6)


def test_projection_result_invariants(rng):
    P = Polytope(np.eye(4))
    mesh = Mesh(3.0, 1.0, 6, 2)
    psi = CellField(mesh, rng.normal(size=(12, 4)))
    C = GlobalConstraints(np.eye(4)[1:], [0.18, 0.36, 0.36])
    result = project(P, psi, C)
    assert result.sweeps >= 1
    assert np.all(result.mu >= 0)
    assert np.all(result.violation <= 1e-10)
    np.testing.assert_allclose(result.violation, constraint_values(P, result.psi, C) - C.b)
    assert np.all(np.abs(result.mu * result.violation) <= 1e-10 * np.maximum(1.0, np.abs(C.b)))


def test_feasible_input_is_returned_unchanged():
    P = Polytope(np.eye(4))
    mesh = Mesh(3.0, 1.0, 6, 2)
    psi = CellField.constant(mesh, [10.0, 0.0, 0.0, 0.0])
    C = GlobalConstraints(np.eye(4)[1:], [0.18, 0.36, 0.36])
    result = project(P, psi, C)
    np.testing.assert_array_equal(result.mu, 0.0)
    np.testing.assert_array_equal(result.psi.values, psi.values)


def test_sweep_limit_raises_with_violations(unit_square):
    mesh = Mesh(1.0, 1.0, 1, 1)
    psi = CellField(mesh, np.array([[1.0, 1.0]]))
    C = GlobalConstraints(np.eye(2), [0.3, 0.3])
    with pytest.raises(ProjectionNonConvergenceError) as info:
        project_multi(unit_square, psi, C, max_sweeps=1)
    assert len(info.value.violations) == 2


def test_project_dispatch(segment):
    mesh = Mesh(1.0, 1.0, 2, 1)
    psi = CellField.constant(mesh, 0.5)
    empty = project(segment, psi, GlobalConstraints.empty(1))
    assert empty.sweeps == 0 and empty.mu.size == 0
    np.testing.assert_array_equal(empty.psi.values, psi.values)
    with pytest.raises(InvalidArgumentError):
        project_multi(segment, psi, GlobalConstraints.empty(1))


# ----------------------------------------------------------------------
# 对偶目标
# ----------------------------------------------------------------------
def test_dual_objective_at_zero(unit_square, rng):
    mesh = Mesh(1.0, 1.0, 2, 2)
    psi = CellField(mesh, rng.normal(size=(4, 2)))
    C = GlobalConstraints(np.eye(2), [0.3, 0.3])
    expected = -0.25 * float(np.sum(unit_square.conjugate_values(psi.values)))
    assert dual_objective(unit_square, psi, C, [0.0, 0.0]) == pytest.approx(expected, abs=1e-14)


def test_dual_objective_peaks_at_multiplier(segment):
    mesh = Mesh(3.0, 1.0, 6, 2)
    psi = CellField.constant(mesh, 1.0)
    C = GlobalConstraints([[1.0]], [0.5 * mesh.area])
    samples = {mu: dual_objective(segment, psi, C, [mu]) for mu in (0.0, 0.5, 1.0, 1.5, 2.0)}
    assert max(samples, key=samples.get) == 1.0
    # 凹性
    assert samples[1.0] >= 0.5 * (samples[0.5] + samples[1.5])


def test_dual_objective_gradient(unit_square, rng):
    mesh = Mesh(1.0, 1.0, 2, 2)
    psi = CellField(mesh, rng.normal(size=(4, 2)))
    C = GlobalConstraints([[1.0, 0.0], [1.0, 1.0]], [0.3, 0.8])
    mu = np.array([0.4, 0.2])
    step = 1e-6
    fd = np.array([
        (dual_objective(unit_square, psi, C, mu + step * e) - dual_objective(unit_square, psi, C, mu - step * e))
        / (2 * step) for e in np.eye(2)
    ])
    shifted = psi.with_values(psi.values - mu @ C.W)
    np.testing.assert_allclose(fd, constraint_values(unit_square, shifted, C) - C.b, atol=1e-6)


# ----------------------------------------------------------------------
# 随机实例
# ----------------------------------------------------------------------
def _random_instance(rng, n_min=1):
    n = int(rng.integers(n_min, 4))
    q = 2 if n == 1 else int(rng.integers(n + 1, 8))
    while True:
        try:
            P = Polytope(rng.uniform(-1.0, 1.0, size=(n, q)))
            break
        except InvalidArgumentError:
            continue
    return P


@pytest.mark.parametrize("seed", range(4))
def test_project_single_on_random_instances(seed):
    rng = np.random.default_rng(100 + seed)
    mesh = Mesh(1.0, 1.0, 3, 2)
    for _ in range(25):
        P = _random_instance(rng)
        psi = CellField(mesh, rng.normal(scale=2.0, size=(mesh.cell_count, P.dim)))
        w = rng.normal(size=P.dim)
        current = float(constraint_values(P, psi, GlobalConstraints([w], [0.0]))[0])
        lowest = mesh.area * float(np.min(w @ P.vertices))
        t = rng.uniform(0.1, 0.9)
        b = t * lowest + (1.0 - t) * current

        tol_g = 1e-12
        result = project_single(P, psi, w, b, tol_g=tol_g)
        assert result.mu[0] > 0
        assert result.violation[0] <= tol_g
        assert abs(result.mu[0] * result.violation[0]) <= tol_g * max(1.0, abs(b))
        reference = bisection_multiplier(P, psi, w, b)
        assert result.mu[0] == pytest.approx(reference, abs=1e-10 * max(1.0, reference))


@pytest.mark.parametrize("seed", range(4))
def test_project_multi_on_random_single_cells(seed):
    rng = np.random.default_rng(200 + seed)
    mesh = Mesh(1.0, 1.0, 1, 1)
    for _ in range(25):
        P = _random_instance(rng, n_min=2)
        W = rng.choice([-1.0, 1.0], size=2)[:, None] * np.eye(P.dim)[:2]
        # 严格可行：一个内点满足所有约束并留有余量
        inner = P.map_points(rng.normal(size=P.dim))
        b = W @ inner + rng.uniform(0.01, 0.05, size=2)
        C = GlobalConstraints(W, b)
        psi = CellField(mesh, rng.normal(scale=2.0, size=(1, P.dim)))

        tol_g = 1e-12
        result = project_multi(P, psi, C, tol_g=tol_g, max_sweeps=5000)
        assert np.all(result.mu >= 0)
        assert np.all(result.violation <= tol_g)
        assert np.all(np.abs(result.mu * result.violation) <= tol_g * np.maximum(1.0, np.abs(b)))
        np.testing.assert_allclose(result.mu, dense_dual_projection(P, psi, C), atol=1e-6)


def test_illinois_warns_when_iterations_run_out(monkeypatch):
    events = []
    monkeypatch.setattr(Config, "ILLINOIS_MAX_ITER", 2)
    monkeypatch.setattr(solver_logger, "log_warning_event",
                        lambda event, details=None: events.append((event, details)))

    def f(mu):
        return np.exp(-mu) - 0.5

    mu, f_mu = _illinois(f, 0.0, f(0.0), 4.0, f(4.0), 1e-15)
    assert abs(f_mu) > 1e-15
    assert [event for event, _ in events] == ["ILLINOIS_MAX_ITER"]
    assert events[0][1]["mu"] == mu

