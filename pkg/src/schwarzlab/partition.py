"""Square subdomain decomposition, overlap, interfaces and weighted trace forms.

Subdomains are H_cells x H_cells blocks of fine cells. An interface is the
open edge shared by two edge-adjacent subdomains: its node list excludes the
endpoint coarse vertices and is ordered from the lower-left endpoint towards
the upper-right one.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True, eq=False)
class Interface:
    index: int
    i: int                    # subdomain on the left / below
    j: int                    # subdomain on the right / above
    orientation: str          # 'v' (vertical edge) or 'h' (horizontal edge)
    nodes: np.ndarray         # interior nodes, ordered along the edge
    endpoints: tuple          # (start, end) coarse-vertex node ids
    elem_pairs: np.ndarray    # (M+1, 2) elements adjacent to each fine segment,
                              # column 0 in subdomain i, column 1 in subdomain j


@dataclass(frozen=True, eq=False)
class Partition:
    mesh: object
    H_cells: int
    ns: int                               # subdomains per side
    subdomain_elements: list
    subdomain_closure_nodes: list
    subdomain_interior_nodes: list
    subdomain_boundary_nodes: list
    coarse_vertex_nodes: np.ndarray       # interior coarse vertices, (by, bx) order
    interfaces: list
    interface_lookup: dict                # ('v'|'h', bx, by) -> interface index
    interfaces_of_subdomain: list
    h_i: float

    @property
    def n_subdomains(self):
        return self.ns * self.ns

    @property
    def n_coarse_vertices(self):
        return self.coarse_vertex_nodes.shape[0]

    def subdomain_index(self, bx, by):
        return by * self.ns + bx


@dataclass(frozen=True, eq=False)
class OverlapSet:
    delta_layers: int
    node_sets: list  # per subdomain, global ids of nodes strictly inside Omega_i'


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """Per-subdomain nodal weights theta_i on interior nodes, summing to one."""
    node_sets: list   # global node ids where theta_i is nonzero
    values: list      # matching theta values (1, 1/2 or 1/4)


@dataclass(frozen=True, eq=False)
class TraceForms:
    """1D weighted forms of an interface eigenproblem on its interior nodes."""
    abar: np.ndarray       # (M, M) tridiagonal stiffness with max-coefficient weights
    bdiag: np.ndarray      # (M,) diagonal of the weighted trace inner product
    seg_coeffs: np.ndarray  # (M+1,) per-segment coefficient (max of the two sides)


def build_partition(mesh, H_cells):
    n = mesh.n
    if H_cells < 1 or n % H_cells != 0:
        raise UsageError(f"mesh size {n} is not divisible by H_cells={H_cells}")
    ns = n // H_cells
    if ns < 2:
        raise UsageError("need at least 2 subdomains per side")
    H = H_cells

    def node(ix, iy):
        return iy * (n + 1) + ix

    sub_elems, sub_closure, sub_interior, sub_boundary = [], [], [], []
    for by in range(ns):
        for bx in range(ns):
            ix = np.arange(bx * H, (bx + 1) * H)
            iy = np.arange(by * H, (by + 1) * H)
            cgx, cgy = np.meshgrid(ix, iy)
            cells = (cgy * n + cgx).ravel()
            elems = np.sort(np.concatenate([2 * cells, 2 * cells + 1]))
            sub_elems.append(elems)

            nx = np.arange(bx * H, (bx + 1) * H + 1)
            ny = np.arange(by * H, (by + 1) * H + 1)
            ngx, ngy = np.meshgrid(nx, ny)
            closure = np.sort((ngy * (n + 1) + ngx).ravel())
            igx, igy = np.meshgrid(nx[1:-1], ny[1:-1])
            interior = np.sort((igy * (n + 1) + igx).ravel())
            sub_closure.append(closure)
            sub_interior.append(interior)
            sub_boundary.append(np.setdiff1d(closure, interior, assume_unique=True))

    interfaces = []
    lookup = {}
    for by in range(ns):
        for bx in range(ns):
            if bx < ns - 1:
                X = (bx + 1) * H
                iy = np.arange(by * H + 1, (by + 1) * H)
                nodes = np.array([node(X, y) for y in iy])
                ends = (node(X, by * H), node(X, (by + 1) * H))
                segs_iy = np.arange(by * H, (by + 1) * H)
                pairs = np.column_stack([
                    2 * (segs_iy * n + X - 1),        # lower triangle of left cell
                    2 * (segs_iy * n + X) + 1,        # upper triangle of right cell
                ])
                idx = len(interfaces)
                interfaces.append(Interface(idx, by * ns + bx, by * ns + bx + 1, "v",
                                            nodes, ends, pairs))
                lookup[("v", bx, by)] = idx
            if by < ns - 1:
                Y = (by + 1) * H
                ix = np.arange(bx * H + 1, (bx + 1) * H)
                nodes = np.array([node(x, Y) for x in ix])
                ends = (node(bx * H, Y), node((bx + 1) * H, Y))
                segs_ix = np.arange(bx * H, (bx + 1) * H)
                pairs = np.column_stack([
                    2 * ((Y - 1) * n + segs_ix) + 1,  # upper triangle of cell below
                    2 * (Y * n + segs_ix),            # lower triangle of cell above
                ])
                idx = len(interfaces)
                interfaces.append(Interface(idx, by * ns + bx, (by + 1) * ns + bx, "h",
                                            nodes, ends, pairs))
                lookup[("h", bx, by)] = idx

    by_sub = [[] for _ in range(ns * ns)]
    for gam in interfaces:
        by_sub[gam.i].append(gam.index)
        by_sub[gam.j].append(gam.index)

    coarse = np.array([node(bx * H, by * H)
                       for by in range(1, ns) for bx in range(1, ns)], dtype=np.int64)

    return Partition(mesh=mesh, H_cells=H_cells, ns=ns,
                     subdomain_elements=sub_elems,
                     subdomain_closure_nodes=sub_closure,
                     subdomain_interior_nodes=sub_interior,
                     subdomain_boundary_nodes=sub_boundary,
                     coarse_vertex_nodes=coarse,
                     interfaces=interfaces,
                     interface_lookup=lookup,
                     interfaces_of_subdomain=by_sub,
                     h_i=mesh.h * math.sqrt(2.0))


def vertex_incidence(partition, vertex_node):
    """Interfaces and subdomains meeting an interior coarse vertex.

    Returns (list of (interface index, endpoint position 0|1), list of
    subdomain indices of the four blocks around the vertex).
    """
    n = partition.mesh.n
    H = partition.H_cells
    iy, ix = divmod(int(vertex_node), n + 1)
    bx, by = ix // H, iy // H
    if ix % H or iy % H or not (0 < bx < partition.ns and 0 < by < partition.ns):
        raise UsageError("node is not an interior coarse vertex")
    lk = partition.interface_lookup
    incid = [
        (lk[("v", bx - 1, by - 1)], 1),  # vertical edge below the vertex
        (lk[("v", bx - 1, by)], 0),      # vertical edge above
        (lk[("h", bx - 1, by - 1)], 1),  # horizontal edge to the left
        (lk[("h", bx, by - 1)], 0),      # horizontal edge to the right
    ]
    subs = [partition.subdomain_index(bx - 1, by - 1),
            partition.subdomain_index(bx, by - 1),
            partition.subdomain_index(bx - 1, by),
            partition.subdomain_index(bx, by)]
    return incid, subs


def extend_overlap(partition, delta_layers):
    """Overlapping dof sets: nodes strictly inside each subdomain extended by
    delta_layers cells in every direction (clipped to the domain)."""
    if delta_layers < 0:
        raise UsageError("overlap must be nonnegative")
    mesh = partition.mesh
    n = mesh.n
    H = partition.H_cells
    gx = np.round(mesh.vertices[:, 0] / mesh.h).astype(int)
    gy = np.round(mesh.vertices[:, 1] / mesh.h).astype(int)
    interior = ~mesh.boundary_mask
    sets = []
    for by in range(partition.ns):
        for bx in range(partition.ns):
            lo_x, hi_x = bx * H - delta_layers, (bx + 1) * H + delta_layers
            lo_y, hi_y = by * H - delta_layers, (by + 1) * H + delta_layers
            inside = ((gx > lo_x) & (gx < hi_x) & (gy > lo_y) & (gy < hi_y) & interior)
            sets.append(np.flatnonzero(inside))
    return OverlapSet(delta_layers=delta_layers, node_sets=sets)


def node_coefficient_sums(mesh, field):
    """For every node, the sum of coefficient values over incident elements."""
    sums = np.zeros(mesh.n_nodes)
    np.add.at(sums, mesh.triangles.ravel(), np.repeat(field.values, 3))
    return sums


def compute_beta(mesh, field, partition):
    """Weight beta_k per interface node: coefficient sum over all incident elements."""
    sums = node_coefficient_sums(mesh, field)
    return [sums[gam.nodes] for gam in partition.interfaces]


def build_trace_forms(mesh, field, partition, interface):
    """1D stiffness with per-segment max coefficients and the weighted diagonal."""
    segc = np.maximum(field.values[interface.elem_pairs[:, 0]],
                      field.values[interface.elem_pairs[:, 1]])
    M = interface.nodes.shape[0]
    h = mesh.h
    abar = np.zeros((M, M))
    for t in range(M):
        abar[t, t] = (segc[t] + segc[t + 1]) / h
        if t + 1 < M:
            abar[t, t + 1] = -segc[t + 1] / h
            abar[t + 1, t] = -segc[t + 1] / h
    beta = node_coefficient_sums(mesh, field)[interface.nodes]
    bdiag = beta / partition.h_i
    return TraceForms(abar=abar, bdiag=bdiag, seg_coeffs=segc)


def build_partition_of_unity(partition, overlap):
    """theta_i = reciprocal of the number of subdomain closures containing the node.

    Gives 1 strictly inside a subdomain, 1/2 on interface nodes and 1/4 at
    interior cross points; requires at least one layer of overlap so every
    closure node carries a local dof.
    """
    if overlap.delta_layers < 1:
        raise UsageError("partition of unity requires overlap of at least one layer")
    mesh = partition.mesh
    counts = np.zeros(mesh.n_nodes, dtype=np.int64)
    for closure in partition.subdomain_closure_nodes:
        counts[closure] += 1
    interior = ~mesh.boundary_mask
    node_sets, values = [], []
    for closure in partition.subdomain_closure_nodes:
        keep = closure[interior[closure]]
        node_sets.append(keep)
        values.append(1.0 / counts[keep])
    return PartitionOfUnity(node_sets=node_sets, values=values)
