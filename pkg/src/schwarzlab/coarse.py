"""Coarse space construction: multiscale hats plus harmonic enrichment.

All basis vectors are global nodal vectors that vanish on the domain boundary
and are discrete harmonic inside every subdomain. Enrichment traces come
either from interface eigenproblems (spectral), from weighted 1D solves with
prescribed right-hand-side families (non-spectral), or exhaust the full
interface space (optimal).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import NumericalError, UsageError
from .mesh import CoefficientField
from .partition import build_trace_forms, vertex_incidence

NONSPECTRAL_KINDS = ("alternating", "sine", "hierarchical")
COARSE_KINDS = ("ms", "shem", "nshem-alt", "nshem-sin", "nshem-hier", "ohem")
_NSHEM_FAMILY = {"nshem-alt": "alternating", "nshem-sin": "sine", "nshem-hier": "hierarchical"}


@dataclass(frozen=True, eq=False)
class InterfaceSpectrum:
    interface: int
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns, B-orthonormal traces
    bdiag: np.ndarray
    abar: np.ndarray


@dataclass(frozen=True, eq=False)
class CoarseSpace:
    kind: str
    vectors: np.ndarray        # (dim, n_nodes) global nodal vectors
    tags: list                 # ('ms', vertex) | (kind, interface, k)
    m_by_interface: dict
    lambda_m_plus_1: float     # min excluded eigenvalue, inf if none excluded
    ms_rows: dict              # vertex node id -> row
    enrich_rows: dict          # interface index -> list of rows ordered by k

    @property
    def dim(self):
        return self.vectors.shape[0]


def solve_interface_eigenproblem(forms, interface_index=0):
    """Full ascending B-orthonormal eigenbasis of the weighted trace forms."""
    res = linalg.dense_sym_generalized_eig(forms.abar, forms.bdiag)
    return InterfaceSpectrum(interface=interface_index,
                             eigenvalues=res.eigenvalues,
                             eigenvectors=res.eigenvectors,
                             bdiag=forms.bdiag,
                             abar=forms.abar)


class SkeletonOperators:
    """Shared machinery: subdomain harmonic extensions and interface forms.

    Factorizations and spectra are built lazily and cached; the object is
    effectively immutable once the caches are warm.
    """

    def __init__(self, mesh, field, partition):
        self.mesh = mesh
        self.field = field
        self.partition = partition
        self.A_full = None
        self._sub_cache = {}
        self._forms_cache = {}
        self._spectrum_cache = {}
        self._homogeneous_spectrum_cache = {}
        from .assembly import assemble_stiffness
        self.A_full = assemble_stiffness(mesh, field)

    # -- subdomain harmonic extension -------------------------------------

    def _sub_factor(self, i):
        if i not in self._sub_cache:
            interior = self.partition.subdomain_interior_nodes[i]
            rows = self.A_full[interior].tocsr()
            A_ii = rows[:, interior].tocsr()
            F = linalg.spd_factorize(A_ii)
            self._sub_cache[i] = (interior, rows, F)
        return self._sub_cache[i]

    def harmonic_extend(self, i, g):
        """Discrete harmonic extension into subdomain i.

        g is a full-length nodal vector whose values on the subdomain
        boundary are the prescribed data; returns the extension values at
        the subdomain's interior nodes.
        """
        interior, rows, F = self._sub_factor(i)
        gb = np.asarray(g, dtype=float).copy()
        gb[interior] = 0.0
        return F.solve(-(rows @ gb))

    def extend_into(self, v, subdomains):
        """Fill the interior values of v in the given subdomains, in place."""
        for i in subdomains:
            interior = self.partition.subdomain_interior_nodes[i]
            v[interior] = self.harmonic_extend(i, v)
        return v

    # -- interface forms and spectra --------------------------------------

    def trace_forms(self, t):
        if t not in self._forms_cache:
            self._forms_cache[t] = build_trace_forms(
                self.mesh, self.field, self.partition, self.partition.interfaces[t])
        return self._forms_cache[t]

    def spectrum(self, t):
        if t not in self._spectrum_cache:
            self._spectrum_cache[t] = solve_interface_eigenproblem(self.trace_forms(t), t)
        return self._spectrum_cache[t]

    def homogeneous_spectrum(self, t):
        """Spectrum of the same interface under a unit coefficient."""
        if t not in self._homogeneous_spectrum_cache:
            ones = CoefficientField(values=np.ones(self.mesh.n_elements))
            forms = build_trace_forms(self.mesh, ones, self.partition,
                                      self.partition.interfaces[t])
            self._homogeneous_spectrum_cache[t] = solve_interface_eigenproblem(forms, t)
        return self._homogeneous_spectrum_cache[t]

    def interface_size(self, t):
        return self.partition.interfaces[t].nodes.shape[0]

    # -- trace construction -----------------------------------------------

    def ms_edge_trace(self, t, endpoint_pos):
        """Coefficient-weighted 1D harmonic ramp: 1 at one endpoint, 0 at the other."""
        forms = self.trace_forms(t)
        M = forms.bdiag.shape[0]
        rhs = np.zeros(M)
        if endpoint_pos == 0:
            rhs[0] = forms.seg_coeffs[0] / self.mesh.h
        else:
            rhs[-1] = forms.seg_coeffs[-1] / self.mesh.h
        return np.linalg.solve(forms.abar, rhs)

    def lift_interface_trace(self, t, trace):
        """Harmonic lift of interface values: zero on the rest of both
        subdomain boundaries and on all other subdomains."""
        gam = self.partition.interfaces[t]
        v = np.zeros(self.mesh.n_nodes)
        v[gam.nodes] = trace
        return self.extend_into(v, (gam.i, gam.j))


# -- basis builders --------------------------------------------------------

def build_multiscale_basis(ops):
    """One hat per interior coarse vertex: weighted 1D ramps on the four
    incident edges, harmonically extended into the four incident subdomains."""
    vectors, tags = [], []
    for vx in ops.partition.coarse_vertex_nodes:
        incid, subs = vertex_incidence(ops.partition, vx)
        v = np.zeros(ops.mesh.n_nodes)
        v[vx] = 1.0
        for t, pos in incid:
            v[ops.partition.interfaces[t].nodes] = ops.ms_edge_trace(t, pos)
        ops.extend_into(v, subs)
        vectors.append(v)
        tags.append(("ms", int(vx)))
    return vectors, tags


def build_spectral_basis(ops, m_by_interface):
    """Harmonic lifts of the first m_ij eigenfunctions of each interface."""
    vectors, tags = [], []
    for t in range(len(ops.partition.interfaces)):
        m = m_by_interface.get(t, 0)
        M = ops.interface_size(t)
        if m > M:
            raise UsageError(f"interface {t} has only {M} modes, requested {m}")
        if m == 0:
            continue
        spec = ops.spectrum(t)
        for k in range(m):
            vectors.append(ops.lift_interface_trace(t, spec.eigenvectors[:, k]))
            tags.append(("spectral", t, k))
    return vectors, tags


def nonspectral_profile(kind, k, t_values):
    """Right-hand-side family g^k sampled at interface parameters in (0,1)."""
    t = np.asarray(t_values, dtype=float)
    if kind == "alternating":
        piece = np.ceil(t * k).astype(int) - 1
        return np.where(piece % 2 == 0, 1.0, -1.0)
    if kind == "sine":
        return np.sin(k * math.pi * t)
    if kind == "hierarchical":
        level = int(math.floor(math.log2(k))) + 1
        j = k - 2 ** (level - 1) + 1
        center = (2 * j - 1) / 2 ** level
        halfwidth = 2.0 ** (-level)
        return np.maximum(0.0, 1.0 - np.abs(t - center) / halfwidth)
    raise UsageError(f"unknown non-spectral family {kind!r}")


def build_nonspectral_basis(ops, kind, m_by_interface):
    """Enrichment without eigensolves: solve the weighted 1D problem with
    b-form data g^k and lift harmonically."""
    if kind not in NONSPECTRAL_KINDS:
        raise UsageError(f"unknown non-spectral family {kind!r}")
    vectors, tags = [], []
    for t in range(len(ops.partition.interfaces)):
        m = m_by_interface.get(t, 0)
        M = ops.interface_size(t)
        if m > M:
            raise UsageError(f"interface {t} has only {M} modes, requested {m}")
        if m == 0:
            continue
        forms = ops.trace_forms(t)
        params = np.arange(1, M + 1) / (M + 1)
        traces = []
        for k in range(1, m + 1):
            rhs = forms.bdiag * nonspectral_profile(kind, k, params)
            phi = np.linalg.solve(forms.abar, rhs)
            # unit b-norm keeps the basis well scaled across contrasts
            phi /= math.sqrt(float(phi @ (forms.bdiag * phi)))
            traces.append(phi)
        _check_trace_independence(traces, forms.bdiag, t)
        for k, trace in enumerate(traces):
            vectors.append(ops.lift_interface_trace(t, trace))
            tags.append((f"nonspectral-{kind}", t, k))
    return vectors, tags


def _check_trace_independence(traces, bdiag, t, ceiling=1e12):
    if len(traces) < 2:
        return
    Phi = np.column_stack(traces)
    G = Phi.T @ (bdiag[:, None] * Phi)
    d = 1.0 / np.sqrt(np.diag(G))
    G = G * d[:, None] * d[None, :]  # scale invariance: check the correlation
    w = np.linalg.eigvalsh(G)
    if w[0] <= 0 or w[-1] / w[0] > ceiling:
        raise NumericalError(f"near-dependent enrichment traces on interface {t}")


def select_adaptive(eigenvalues, tau, min_one=True):
    """Number of modes with eigenvalue at or below the threshold."""
    if tau <= 0:
        raise UsageError("adaptive threshold must be positive")
    m = int(np.count_nonzero(np.asarray(eigenvalues) <= tau))
    if min_one and m == 0:
        m = 1
    return m


def _lambda_m_plus_1(ops, m_by_interface):
    lam = math.inf
    for t in range(len(ops.partition.interfaces)):
        m = m_by_interface.get(t, 0)
        if m < ops.interface_size(t):
            lam = min(lam, float(ops.spectrum(t).eigenvalues[m]))
    return lam


def build_coarse_space(ops, kind, m=0, adaptive=None):
    """Assemble a complete coarse space of the requested kind.

    kind is one of ms | shem | nshem-alt | nshem-sin | nshem-hier | ohem.
    For shem, adaptive may be a dict {tau, min_one, laplacian_relative} that
    overrides the uniform enrichment count m.
    """
    if kind not in COARSE_KINDS:
        raise UsageError(f"unknown coarse space kind {kind!r}")
    nt = len(ops.partition.interfaces)
    if kind == "ms":
        m_by = {t: 0 for t in range(nt)}
    elif kind == "ohem":
        m_by = {t: ops.interface_size(t) for t in range(nt)}
    elif kind == "shem" and adaptive is not None:
        tau = adaptive.get("tau", 1.0 / 32.0)
        min_one = adaptive.get("min_one", True)
        relative = adaptive.get("laplacian_relative", False)
        m_by = {}
        for t in range(nt):
            thr = tau
            if relative:
                thr = tau * float(ops.homogeneous_spectrum(t).eigenvalues[0])
            m_by[t] = select_adaptive(ops.spectrum(t).eigenvalues, thr, min_one)
    else:
        m_by = {t: min(int(m), ops.interface_size(t)) for t in range(nt)}

    vectors, tags = build_multiscale_basis(ops)
    if kind in _NSHEM_FAMILY:
        enrich, etags = build_nonspectral_basis(ops, _NSHEM_FAMILY[kind], m_by)
    elif kind == "ms":
        enrich, etags = [], []
    else:
        enrich, etags = build_spectral_basis(ops, m_by)
    vectors.extend(enrich)
    tags.extend(etags)

    ms_rows = {tag[1]: r for r, tag in enumerate(tags) if tag[0] == "ms"}
    enrich_rows = {}
    for r, tag in enumerate(tags):
        if tag[0] != "ms":
            enrich_rows.setdefault(tag[1], []).append(r)

    return CoarseSpace(kind=kind,
                       vectors=np.array(vectors) if vectors else np.zeros((0, ops.mesh.n_nodes)),
                       tags=tags,
                       m_by_interface=m_by,
                       lambda_m_plus_1=_lambda_m_plus_1(ops, m_by),
                       ms_rows=ms_rows,
                       enrich_rows=enrich_rows)


def build_ohem(ops):
    """Full enrichment: the coarse space spans every discrete harmonic function."""
    return build_coarse_space(ops, "ohem")


# -- interpolation and decomposition --------------------------------------

def coarse_interpolate(ops, coarse, u):
    """I0 u = I_ms u + Pi_m (u - I_ms u), eigenfunction-based projection.

    Requires an eigenfunction-based space (ms, shem or ohem); the projection
    is undefined for the non-spectral bases.
    """
    if coarse.kind not in ("ms", "shem", "ohem"):
        raise UsageError("coarse interpolation needs an eigenfunction-based coarse space")
    u = np.asarray(u, dtype=float)
    u0 = np.zeros_like(u)
    for vx, row in coarse.ms_rows.items():
        uv = u[vx]
        if uv != 0.0:
            u0 += uv * coarse.vectors[row]
    w = u - u0
    for t, rows in coarse.enrich_rows.items():
        spec = ops.spectrum(t)
        gam = ops.partition.interfaces[t]
        trace = w[gam.nodes]
        mcount = len(rows)
        coeffs = spec.eigenvectors[:, :mcount].T @ (spec.bdiag * trace)
        for k, row in enumerate(rows):
            if coeffs[k] != 0.0:
                u0 += coeffs[k] * coarse.vectors[row]
    return u0


def verify_stable_decomposition(ops, coarse, pou, u):
    """Split u into coarse part and local pieces, measuring the energy ratio.

    Returns (u0, [u_i], ratio) with ratio =
    (a(u0,u0) + sum_i a(u_i,u_i)) / a(u,u); the local pieces are nodal
    interpolants of theta_i * (u - u0) and sum exactly to u - u0.
    """
    u = np.asarray(u, dtype=float)
    u0 = coarse_interpolate(ops, coarse, u)
    w = u - u0
    A = ops.A_full
    locals_ = []
    total = np.zeros_like(w)
    energy_local = 0.0
    for nodes, theta in zip(pou.node_sets, pou.values):
        ui = np.zeros_like(w)
        ui[nodes] = theta * w[nodes]
        total += ui
        energy_local += float(ui @ (A @ ui))
        locals_.append(ui)
    scale = max(np.abs(w).max(), 1.0)
    if np.abs(total - w).max() > 1e-12 * scale:
        raise NumericalError("partition of unity pieces do not sum to the residual")
    e_u = float(u @ (A @ u))
    if e_u == 0.0:
        raise UsageError("stable decomposition is undefined for zero energy input")
    ratio = (float(u0 @ (A @ u0)) + energy_local) / e_u
    return u0, locals_, ratio


def harmonicity_residual(ops, v):
    """Largest interior stiffness residual of v over all subdomains."""
    worst = 0.0
    for i in range(ops.partition.n_subdomains):
        interior = ops.partition.subdomain_interior_nodes[i]
        r = ops.A_full[interior] @ v
        if r.size:
            worst = max(worst, float(np.abs(r).max()))
    return worst
