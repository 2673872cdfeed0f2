import numpy as np
import pytest
from pydantic import ValidationError

from decorators import problem_builder
from errors import InfeasibleConstraintError, InvalidArgumentError
from field import CellField, Mesh
from problems.cantilever import ConstraintRow, loaded_cells, split_list
from problems.isotropic_cantilever import IsotropicCantileverConfig, build_isotropic_cantilever
from problems.orthotropic_cantilever import OrthotropicCantileverConfig, build_orthotropic_cantilever
from projection import constraint_values, project
from registry import plugin_registry


# ----------------------------------------------------------------------
# 各向同性
# ----------------------------------------------------------------------
def test_isotropic_polytope_and_constraints():
    problem, P, C = build_isotropic_cantilever(nx=12, ny=4)
    assert P.dim == 4 and P.vertex_count == 4
    assert P.row_rank == 3
    np.testing.assert_array_equal(C.W, np.eye(4)[1:])
    np.testing.assert_allclose(C.b, [0.18, 0.36, 0.36])
    assert problem.polytope is P and problem.constraints is C
    assert problem.mesh.cell_count == 48


def test_uniform_start_activates_every_bound():
    problem, P, C = build_isotropic_cantilever(nx=12, ny=4)
    np.testing.assert_allclose(constraint_values(P, problem.psi0, C), [0.75, 0.75, 0.75], atol=1e-12)

    result = project(P, problem.psi0, C)
    assert np.all(result.mu > 0)
    eta = P.map_points(result.psi.values)
    volumes = problem.mesh.cell_area * eta.sum(axis=0)
    np.testing.assert_allclose(volumes[1:], C.b, atol=1e-8)
    assert volumes[0] == pytest.approx(problem.mesh.area - 0.9, abs=1e-8)


def test_void_dominant_start_is_feasible():
    problem, P, C = build_isotropic_cantilever(nx=12, ny=4, psi0=[5.0, 0.0, 0.0, 0.0])
    result = project(P, problem.psi0, C)
    np.testing.assert_array_equal(result.mu, 0.0)


def test_isotropic_config_validation():
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(bounds="0.1, 0.2")
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(gamma_d="front")
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(gamma_d="")
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(load_center="4.0, 0.5")
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(psi0="0, 0, 0, 0", psi0_file="psi0.txt")
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(mesh_size=0.1)


def test_config_parses_comma_lists():
    cfg = IsotropicCantileverConfig(E="1e-6, 2, 4", bounds="0.5,0.5", gamma_f="top", load_vector="1, 0")
    assert cfg.E == [1e-6, 2.0, 4.0]
    assert cfg.bounds == [0.5, 0.5]
    assert cfg.gamma_f == ["top"]
    assert cfg.load_vector == (1.0, 0.0)
    assert split_list(" left , , right ") == ["left", "right"]
    assert split_list([1, 2]) == [1, 2]


def test_unsatisfiable_bounds_rejected():
    # ∫η_2 ≤ −0.1 在单纯形上不可满足
    with pytest.raises(InfeasibleConstraintError):
        build_isotropic_cantilever(nx=12, ny=4, bounds=[-0.1, 0.36, 0.36])


# ----------------------------------------------------------------------
# 正交各向异性
# ----------------------------------------------------------------------
def test_orthotropic_polytope_and_constraint():
    problem, P, C = build_orthotropic_cantilever(nx=12, ny=4)
    assert P.is_full_dimensional
    assert P.vertex_count == 9
    np.testing.assert_array_equal(P.vertices[:, -1], [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(C.W, [[-1.0, 0.0, 0.0]])
    assert C.b[0] == pytest.approx(-0.9)


def test_orthotropic_start_leans_towards_first_direction():
    problem, P, _ = build_orthotropic_cantilever(nx=12, ny=4)
    weights = P.barycentric(problem.psi0.values[0])
    assert np.argmax(weights) == 0
    assert np.all(weights > 0)


def test_pure_void_design_has_finite_compliance():
    problem, P, _ = build_orthotropic_cantilever(nx=12, ny=4)
    eta = CellField(problem.mesh, P.map_points(np.tile([30.0, 0.0, 0.0], (problem.mesh.cell_count, 1))))
    assert np.all(eta.values[:, 0] > 0.999)
    F, grad = problem.evaluate(eta)
    assert np.isfinite(F) and F > 0
    assert np.all(np.isfinite(grad.values))


def test_orthotropic_report():
    problem, P, _ = build_orthotropic_cantilever(nx=12, ny=4)
    eta = CellField(problem.mesh, P.map_points(problem.psi0.values))
    info = problem.report(eta)
    assert 0.0 < info["mean_saturation"] <= 1.0
    assert info["phase_volumes"].shape == (3,)


def test_orthotropic_config_validation():
    with pytest.raises(ValidationError):
        OrthotropicCantileverConfig(num_angles=2)
    with pytest.raises(ValidationError):
        OrthotropicCantileverConfig(void_fraction=1.0)
    with pytest.raises(ValidationError):
        OrthotropicCantileverConfig(nx=0)


# ----------------------------------------------------------------------
# 载荷区域与初始场
# ----------------------------------------------------------------------
def test_loaded_cells_inside_disc():
    mesh = Mesh(3.0, 1.0, 96, 32)
    cells = loaded_cells(mesh, (2.9, 0.5), 0.05)
    d = np.linalg.norm(mesh.cell_centroids() - [2.9, 0.5], axis=1)
    assert cells.size > 0
    np.testing.assert_array_equal(np.sort(cells), np.flatnonzero(d <= 0.05))


def test_loaded_cells_falls_back_to_nearest_cell():
    mesh = Mesh(3.0, 1.0, 12, 4)
    cells = loaded_cells(mesh, (2.9, 0.5), 0.05)
    assert cells.tolist() == [mesh.nearest_cell((2.9, 0.5))]


def test_psi0_file(tmp_path, rng):
    values = rng.normal(size=(48, 4))
    path = tmp_path / "psi0.txt"
    np.savetxt(path, values)
    problem, _, _ = build_isotropic_cantilever(nx=12, ny=4, psi0_file=path)
    np.testing.assert_allclose(problem.psi0.values, values)

    np.savetxt(path, values[:, :3])
    with pytest.raises(InvalidArgumentError):
        build_isotropic_cantilever(nx=12, ny=4, psi0_file=path)


def test_constant_psi0_channel_count_checked():
    with pytest.raises(InvalidArgumentError):
        build_orthotropic_cantilever(nx=12, ny=4, psi0=[0.0, 0.0])


# ----------------------------------------------------------------------
# 注册
# ----------------------------------------------------------------------
def test_builders_are_registered():
    iso = plugin_registry.get_problem("isotropic_cantilever_2d")
    ortho = plugin_registry.get_problem("orthotropic_cantilever_2d")
    assert iso["builder"] is build_isotropic_cantilever
    assert iso["config"] is IsotropicCantileverConfig
    assert ortho["config"] is OrthotropicCantileverConfig
    assert build_isotropic_cantilever.problem_name == "isotropic_cantilever_2d"
    assert plugin_registry.get_problem("missing") is None


def test_builder_accepts_config_with_overrides():
    cfg = IsotropicCantileverConfig(nx=12, ny=4)
    problem, _, _ = build_isotropic_cantilever(cfg, nx=6, ny=2)
    assert problem.mesh.cell_count == 12


def test_duplicate_problem_name_rejected():
    with pytest.raises(ValueError):
        plugin_registry.register_problem("isotropic_cantilever_2d", lambda cfg: None,
                                         IsotropicCantileverConfig, "elsewhere")
    assert plugin_registry.get_problem("isotropic_cantilever_2d")["builder"] is build_isotropic_cantilever


def test_problem_builder_needs_pydantic_model():
    with pytest.raises(TypeError):
        problem_builder("broken", config=dict)


# ----------------------------------------------------------------------
# 自定义多面体与约束行
# ----------------------------------------------------------------------
def test_polytope_file_replaces_builtin(tmp_path):
    path = tmp_path / "octagon.txt"
    P_default = build_orthotropic_cantilever(nx=12, ny=4)[1]
    path.write_text(P_default.to_text(), encoding="utf-8")
    _, P, _ = build_orthotropic_cantilever(nx=12, ny=4, polytope=str(path))
    np.testing.assert_allclose(P.vertices, P_default.vertices, atol=1e-15)


def test_polytope_dimension_must_match_material(tmp_path):
    path = tmp_path / "triangle.txt"
    path.write_text("1 0 0\n0 1 0\n0 0 1\n", encoding="utf-8")
    with pytest.raises(InvalidArgumentError):
        build_isotropic_cantilever(nx=12, ny=4, polytope=str(path))


def test_constraint_rows_replace_defaults():
    rows = [ConstraintRow(weights="0, 1, 1, 1", bound=0.9),
            ConstraintRow(weights=[1, 0, 0, 0], bound=2.0, sense="ge")]
    _, _, C = build_isotropic_cantilever(nx=12, ny=4, constraints=rows)
    np.testing.assert_array_equal(C.W, [[0.0, 1.0, 1.0, 1.0], [-1.0, 0.0, 0.0, 0.0]])
    np.testing.assert_allclose(C.b, [0.9, -2.0])


def test_constraint_row_length_checked():
    with pytest.raises(InvalidArgumentError):
        build_orthotropic_cantilever(nx=12, ny=4, constraints=[ConstraintRow(weights=[1, 0], bound=0.5)])


def test_constraint_row_validation():
    with pytest.raises(ValidationError):
        ConstraintRow(weights="0, 0", bound=1.0)
    with pytest.raises(ValidationError):
        ConstraintRow(weights=[1.0], bound=1.0, sense="eq")
    with pytest.raises(ValidationError):
        IsotropicCantileverConfig(polytope="no_such_file.txt")
    w, b = ConstraintRow(weights=[0.0, 1.0], bound=0.2, sense="ge").as_row()
    np.testing.assert_array_equal(w, [0.0, -1.0])
    assert b == -0.2
