"""P1 finite element assembly with homogeneous Dirichlet boundary conditions."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import UsageError


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Stiffness matrix and load restricted to interior dofs."""

    A: sp.csr_matrix
    b: np.ndarray
    interior_nodes: np.ndarray       # interior dof -> global node id
    global_to_interior: np.ndarray   # global node id -> interior dof, -1 on boundary

    @property
    def n_dofs(self):
        return self.interior_nodes.shape[0]


def assemble_stiffness(mesh, field):
    """Assemble the weighted P1 stiffness matrix over all nodes (no BCs)."""
    if field.values.shape[0] != mesh.n_elements:
        raise UsageError("coefficient field does not match the mesh")
    tri = mesh.triangles
    p = mesh.vertices
    x = p[tri, 0]
    y = p[tri, 1]
    # gradient coefficients of the barycentric functions
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    scale = field.values / (2.0 * area2)  # alpha_K / (4 |K|)
    kloc = scale[:, None, None] * (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :])

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    A = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    A = (A + A.T) * 0.5  # enforce exact symmetry
    return A


def triangle_areas(mesh):
    tri = mesh.triangles
    p = mesh.vertices
    x = p[tri, 0]
    y = p[tri, 1]
    return 0.5 * np.abs((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                        - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))


def assemble_load(mesh, f):
    """Load vector for constant f: one third of the incident area per node."""
    areas = triangle_areas(mesh)
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.triangles.ravel(), np.repeat(areas / 3.0, 3))
    return f * b


def apply_dirichlet(A_full, b_full, mesh):
    """Eliminate boundary rows/columns, keeping the SPD interior block."""
    interior = mesh.interior_nodes
    g2i = np.full(mesh.n_nodes, -1, dtype=np.int64)
    g2i[interior] = np.arange(interior.shape[0])
    A = A_full[interior][:, interior].tocsr()
    b = np.asarray(b_full, dtype=float)[interior]
    return LinearSystem(A=A, b=b, interior_nodes=interior, global_to_interior=g2i)


def build_system(mesh, field, f=1.0):
    """Convenience: assemble and eliminate in one step."""
    A_full = assemble_stiffness(mesh, field)
    b_full = assemble_load(mesh, f)
    return apply_dirichlet(A_full, b_full, mesh)
