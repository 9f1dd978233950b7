import numpy as np
import pytest

from schwarzlab import assembly, linalg
from schwarzlab.errors import UsageError
from schwarzlab.mesh import build_coefficient_field, build_structured_mesh


def unit_field(m):
    return build_coefficient_field(m, 1.0)


def test_five_point_stencil():
    m = build_structured_mesh(2)
    A = assembly.assemble_stiffness(m, unit_field(m))
    c = m.node_id(1, 1)
    assert A[c, c] == pytest.approx(4.0, abs=1e-14)
    for nb in (m.node_id(0, 1), m.node_id(2, 1), m.node_id(1, 0), m.node_id(1, 2)):
        assert A[c, nb] == pytest.approx(-1.0, abs=1e-14)
    for nb in (m.node_id(0, 0), m.node_id(2, 2), m.node_id(0, 2), m.node_id(2, 0)):
        assert A[c, nb] == pytest.approx(0.0, abs=1e-14)


def test_stiffness_linear_in_alpha():
    m = build_structured_mesh(4)
    rng = np.random.default_rng(2)
    vals = rng.uniform(0.5, 5.0, m.n_elements)
    from schwarzlab.mesh import CoefficientField
    A1 = assembly.assemble_stiffness(m, CoefficientField(values=vals))
    A3 = assembly.assemble_stiffness(m, CoefficientField(values=3.0 * vals))
    assert abs(A3 - 3.0 * A1).max() <= 1e-12


def test_row_sums_vanish():
    m = build_structured_mesh(8)
    A = assembly.assemble_stiffness(m, unit_field(m))
    assert np.abs(A @ np.ones(m.n_nodes)).max() <= 1e-12


def test_stiffness_exactly_symmetric():
    m = build_structured_mesh(5)
    rng = np.random.default_rng(4)
    from schwarzlab.mesh import CoefficientField
    A = assembly.assemble_stiffness(
        m, CoefficientField(values=rng.uniform(1.0, 1e6, m.n_elements)))
    assert (A != A.T).nnz == 0


def test_linear_functions_harmonic():
    m = build_structured_mesh(6)
    A = assembly.assemble_stiffness(m, unit_field(m))
    u = 2.0 * m.vertices[:, 0] - 0.5 * m.vertices[:, 1] + 1.0
    r = A @ u
    assert np.abs(r[m.interior_nodes]).max() <= 1e-12


def test_load_zero():
    m = build_structured_mesh(4)
    assert np.all(assembly.assemble_load(m, 0.0) == 0.0)


def test_load_interior_entry():
    m = build_structured_mesh(2)
    b = assembly.assemble_load(m, 1.0)
    assert b[m.node_id(1, 1)] == pytest.approx(0.25, abs=1e-15)


def test_load_total_mass():
    m = build_structured_mesh(7)
    assert assembly.assemble_load(m, 3.0).sum() == pytest.approx(3.0, abs=1e-13)


def test_dirichlet_n2_system():
    m = build_structured_mesh(2)
    sys_ = assembly.build_system(m, unit_field(m))
    assert sys_.n_dofs == 1
    assert sys_.A[0, 0] == pytest.approx(4.0)
    assert sys_.b[0] == pytest.approx(0.25)
    assert sys_.b[0] / sys_.A[0, 0] == pytest.approx(0.0625)


def test_dirichlet_dof_maps():
    m = build_structured_mesh(4)
    sys_ = assembly.build_system(m, unit_field(m))
    assert sys_.n_dofs == 9
    assert np.all(sys_.global_to_interior[m.boundary_mask] == -1)
    assert np.array_equal(sys_.interior_nodes, m.interior_nodes)


def test_solution_has_square_symmetry():
    m = build_structured_mesh(4)
    sys_ = assembly.build_system(m, unit_field(m))
    x = linalg.spd_solve(linalg.spd_factorize(sys_.A), sys_.b)
    u = np.zeros(m.n_nodes)
    u[sys_.interior_nodes] = x
    grid = u.reshape(5, 5)
    assert np.abs(grid - grid.T).max() <= 1e-12          # mirror across the diagonal
    assert np.abs(grid - grid[::-1, ::-1]).max() <= 1e-12  # half turn


def test_high_contrast_remains_spd():
    m = build_structured_mesh(8)
    f = build_coefficient_field(m, 1.0, [(0.25, 0.25, 0.75, 0.75, 1e6)])
    sys_ = assembly.build_system(m, f)
    linalg.spd_factorize(sys_.A)  # must not raise


def test_field_size_mismatch():
    m = build_structured_mesh(4)
    from schwarzlab.mesh import CoefficientField
    with pytest.raises(UsageError):
        assembly.assemble_stiffness(m, CoefficientField(values=np.ones(3)))
