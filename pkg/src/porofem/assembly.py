"""Sparse operator assembly on the P2-vector / P1-scalar element pair.

Builds the matrices of the two-field formulation (elasticity block,
divergence coupling, scalar mass and stiffness), load vectors including
boundary tractions and fluxes, and the constraint machinery that reduces
a full linear system to its free unknowns.

Displacement dofs are interleaved: dof(node, comp) = 2*node + comp, with
quadratic nodes ordered vertices-first then edge midpoints.  Scalar dofs
coincide with vertex indices.  The monolithic layout is [u | xi | eta].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .elements import (
    AffineMaps,
    edge_quadrature,
    edge_trace_p1,
    edge_trace_p2,
    eval_basis,
    physical_points,
    triangle_quadrature,
)
from .mesh import BoundarySegment, Mesh
from .model import (
    BoundaryConditionSpec,
    DerivedCoeffs,
    MaterialParams,
    SourceFunctions,
)

__all__ = [
    "DofMap",
    "SingularConstraintsError",
    "assemble_elasticity",
    "assemble_div",
    "assemble_scalar_mass",
    "assemble_scalar_stiffness",
    "assemble_vector_mass",
    "assemble_domain_load",
    "assemble_boundary_load",
    "assemble_gravity_load",
    "assemble_load",
    "rigid_motion_basis",
    "AffineConstraint",
    "ConstraintSet",
    "build_constraints",
    "ReducedSystem",
    "apply_constraints",
]


class SingularConstraintsError(RuntimeError):
    """Raised when a constraint block is rank deficient."""


@dataclass(frozen=True)
class DofMap:
    """Degree-of-freedom numbering for one mesh.

    Attributes:
        mesh: the underlying triangulation.
        triangle_p2: (F, 6) quadratic node ids per triangle, vertices then
            the midpoints opposite each vertex (matching the P2 basis order).
        triangle_u: (F, 12) interleaved displacement dofs per triangle.
        n_p2_nodes: number of quadratic nodes (vertices + edges).
        n_u: displacement dof count, 2 * n_p2_nodes.
        n_scalar: scalar dof count (= vertex count).
    """

    mesh: Mesh
    triangle_p2: np.ndarray
    triangle_u: np.ndarray
    n_p2_nodes: int
    n_u: int
    n_scalar: int

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        midpoint_nodes = mesh.edge_nodes[mesh.triangle_edges]
        triangle_p2 = np.hstack([mesh.triangles, midpoint_nodes]).astype(np.int64)
        comps = np.array([0, 1], dtype=np.int64)
        triangle_u = (2 * triangle_p2[:, :, None] + comps).reshape(len(triangle_p2), 12)
        n_p2 = mesh.n_vertices + mesh.n_edges
        return cls(
            mesh=mesh,
            triangle_p2=triangle_p2,
            triangle_u=triangle_u,
            n_p2_nodes=n_p2,
            n_u=2 * n_p2,
            n_scalar=mesh.n_vertices,
        )

    def u_dofs(self, nodes: np.ndarray, comp: int) -> np.ndarray:
        """Interleaved displacement dofs of the given component at nodes."""
        return 2 * np.asarray(nodes, dtype=np.int64) + comp

    @property
    def xi_offset(self) -> int:
        return self.n_u

    @property
    def eta_offset(self) -> int:
        return self.n_u + self.n_scalar

    @property
    def n_monolithic(self) -> int:
        return self.n_u + 2 * self.n_scalar

    @property
    def n_step1(self) -> int:
        """Size of the displacement/xi saddle block."""
        return self.n_u + self.n_scalar


def _scatter(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, shape) -> sp.csr_matrix:
    mat = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return mat.tocsr()


def _pair_indices(dofs_i: np.ndarray, dofs_j: np.ndarray):
    rows = np.broadcast_to(dofs_i[:, :, None], dofs_i.shape + (dofs_j.shape[1],))
    cols = np.broadcast_to(dofs_j[:, None, :], (dofs_j.shape[0],) + (dofs_i.shape[1], dofs_j.shape[1]))
    return rows, cols


def assemble_elasticity(mesh: Mesh, dofmap: DofMap, mu: float = 1.0, min_degree: int = 2) -> sp.csr_matrix:
    """Elasticity block A with A[2i+a, 2j+b] = mu * (eps(phi_j e_b), eps(phi_i e_a)).

    Symmetric positive semidefinite; its kernel on the unconstrained space
    is spanned by the rigid motions.
    """
    rule = triangle_quadrature(min_degree)
    _, ref_grads = eval_basis("P2", rule.points)
    maps = AffineMaps.from_mesh(mesh)
    grads = maps.physical_gradients(ref_grads)  # (F, nq, 6, 2)
    w = rule.weights
    det = maps.det
    gx = grads[..., 0]
    gy = grads[..., 1]

    def integ(ti, tj):
        return np.einsum("q,fqi,fqj,f->fij", w, ti, tj, det, optimize=True)

    kxx = integ(gx, gx) + 0.5 * integ(gy, gy)
    kyy = integ(gy, gy) + 0.5 * integ(gx, gx)
    kxy = 0.5 * integ(gy, gx)
    kyx = 0.5 * integ(gx, gy)
    n_tri = mesh.n_triangles
    local = np.zeros((n_tri, 12, 12))
    local[:, 0::2, 0::2] = kxx
    local[:, 1::2, 1::2] = kyy
    local[:, 0::2, 1::2] = kxy
    local[:, 1::2, 0::2] = kyx
    local *= mu
    rows, cols = _pair_indices(dofmap.triangle_u, dofmap.triangle_u)
    return _scatter(rows, cols, local, (dofmap.n_u, dofmap.n_u))


def assemble_div(mesh: Mesh, dofmap: DofMap, min_degree: int = 2) -> sp.csr_matrix:
    """Divergence coupling B with B[j, 2i+a] = (d_a phi_i, psi_j)."""
    rule = triangle_quadrature(min_degree)
    _, ref_grads = eval_basis("P2", rule.points)
    p1_vals, _ = eval_basis("P1", rule.points)
    maps = AffineMaps.from_mesh(mesh)
    grads = maps.physical_gradients(ref_grads)  # (F, nq, 6, 2)
    local = np.einsum("q,qj,fqia,f->fjia", rule.weights, p1_vals, grads, maps.det, optimize=True)
    local = local.reshape(mesh.n_triangles, 3, 12)
    rows, cols = _pair_indices(mesh.triangles, dofmap.triangle_u)
    return _scatter(rows, cols, local, (dofmap.n_scalar, dofmap.n_u))


def assemble_scalar_mass(mesh: Mesh, dofmap: DofMap, min_degree: int = 2) -> sp.csr_matrix:
    """P1 mass matrix M with M[i, j] = (psi_j, psi_i)."""
    rule = triangle_quadrature(min_degree)
    vals, _ = eval_basis("P1", rule.points)
    maps = AffineMaps.from_mesh(mesh)
    local = np.einsum("q,qi,qj,f->fij", rule.weights, vals, vals, maps.det, optimize=True)
    rows, cols = _pair_indices(mesh.triangles, mesh.triangles)
    return _scatter(rows, cols, local, (dofmap.n_scalar, dofmap.n_scalar))


def assemble_scalar_stiffness(
    mesh: Mesh, dofmap: DofMap, coeff: float = 1.0, min_degree: int = 1
) -> sp.csr_matrix:
    """P1 stiffness S with S[i, j] = coeff * (grad psi_j, grad psi_i).

    The coefficient is the mobility K/mu_f in the flow equation.
    """
    rule = triangle_quadrature(min_degree)
    _, ref_grads = eval_basis("P1", rule.points)
    maps = AffineMaps.from_mesh(mesh)
    grads = maps.physical_gradients(ref_grads)
    local = coeff * np.einsum(
        "q,fqia,fqja,f->fij", rule.weights, grads, grads, maps.det, optimize=True
    )
    rows, cols = _pair_indices(mesh.triangles, mesh.triangles)
    return _scatter(rows, cols, local, (dofmap.n_scalar, dofmap.n_scalar))


def assemble_vector_mass(mesh: Mesh, dofmap: DofMap, min_degree: int = 4) -> sp.csr_matrix:
    """P2 vector mass matrix, block-diagonal over components."""
    rule = triangle_quadrature(min_degree)
    vals, _ = eval_basis("P2", rule.points)
    maps = AffineMaps.from_mesh(mesh)
    block = np.einsum("q,qi,qj,f->fij", rule.weights, vals, vals, maps.det, optimize=True)
    local = np.zeros((mesh.n_triangles, 12, 12))
    local[:, 0::2, 0::2] = block
    local[:, 1::2, 1::2] = block
    rows, cols = _pair_indices(dofmap.triangle_u, dofmap.triangle_u)
    return _scatter(rows, cols, local, (dofmap.n_u, dofmap.n_u))


def assemble_domain_load(
    mesh: Mesh,
    dofmap: DofMap,
    closure: Callable,
    t: float,
    space: str = "vector",
    min_degree: int = 6,
) -> np.ndarray:
    """Domain load (f, v) against P2 vectors or (phi, psi) against P1 scalars."""
    rule = triangle_quadrature(min_degree)
    pts = physical_points(mesh, rule.points)
    n_tri, nq = pts.shape[0], pts.shape[1]
    flat = pts.reshape(-1, 2)
    maps = AffineMaps.from_mesh(mesh)
    w, det = rule.weights, maps.det
    if space == "vector":
        data = np.asarray(closure(flat, t), dtype=float).reshape(n_tri, nq, 2)
        vals, _ = eval_basis("P2", rule.points)
        local = np.einsum("q,fqa,qi,f->fia", w, data, vals, det, optimize=True)
        out = np.zeros(dofmap.n_u)
        np.add.at(out, dofmap.triangle_u, local.reshape(n_tri, 12))
    elif space == "scalar":
        data = np.asarray(closure(flat, t), dtype=float).reshape(n_tri, nq)
        vals, _ = eval_basis("P1", rule.points)
        local = np.einsum("q,fq,qj,f->fj", w, data, vals, det, optimize=True)
        out = np.zeros(dofmap.n_scalar)
        np.add.at(out, mesh.triangles, local)
    else:
        raise ValueError(f"unknown load space {space!r}")
    return out


def assemble_boundary_load(
    mesh: Mesh,
    dofmap: DofMap,
    closures: Mapping[BoundarySegment, Optional[Callable]],
    t: float,
    space: str = "vector",
    min_degree: int = 5,
) -> np.ndarray:
    """Boundary load <f1, v> (P2 traces) or <phi1, psi> (P1 traces).

    Integrates over every tagged edge of segments whose closure is not
    None; segments absent from the mapping contribute nothing.
    """
    rule = edge_quadrature(min_degree)
    s = rule.points[:, 1]
    w = rule.weights
    tr_p2 = edge_trace_p2(s)
    tr_p1 = edge_trace_p1(s)
    out = np.zeros(dofmap.n_u if space == "vector" else dofmap.n_scalar)
    if space not in ("vector", "scalar"):
        raise ValueError(f"unknown load space {space!r}")
    for tag in sorted(closures, key=int):
        closure = closures[tag]
        if closure is None:
            continue
        eids = mesh.edges_with_tag(tag)
        if eids.size == 0:
            continue
        va = mesh.vertices[mesh.edges[eids, 0]]
        vb = mesh.vertices[mesh.edges[eids, 1]]
        length = np.linalg.norm(vb - va, axis=1)
        pts = va[:, None, :] * (1.0 - s)[None, :, None] + vb[:, None, :] * s[None, :, None]
        ne, nq = pts.shape[0], pts.shape[1]
        if space == "vector":
            data = np.asarray(closure(pts.reshape(-1, 2), t), dtype=float).reshape(ne, nq, 2)
            local = np.einsum("q,eqa,qi,e->eia", w, data, tr_p2, length, optimize=True)
            nodes = np.column_stack(
                [mesh.edges[eids, 0], mesh.edges[eids, 1], mesh.edge_nodes[eids]]
            )
            comps = np.array([0, 1], dtype=np.int64)
            dofs = (2 * nodes[:, :, None] + comps).reshape(ne, 6)
            np.add.at(out, dofs, local.reshape(ne, 6))
        else:
            data = np.asarray(closure(pts.reshape(-1, 2), t), dtype=float).reshape(ne, nq)
            local = np.einsum("q,eq,qj,e->ej", w, data, tr_p1, length, optimize=True)
            np.add.at(out, mesh.edges[eids], local)
    return out


def assemble_gravity_load(mesh: Mesh, dofmap: DofMap, params: MaterialParams) -> np.ndarray:
    """Gravity contribution (K/mu_f) * (rho_f g, grad psi_i) to the flow rhs."""
    rho_g = params.rho_g
    out = np.zeros(dofmap.n_scalar)
    if not np.any(rho_g):
        return out
    rule = triangle_quadrature(1)
    _, ref_grads = eval_basis("P1", rule.points)
    maps = AffineMaps.from_mesh(mesh)
    grads = maps.physical_gradients(ref_grads)
    coeff = params.K / params.mu_f
    local = coeff * np.einsum(
        "q,a,fqja,f->fj", rule.weights, rho_g, grads, maps.det, optimize=True
    )
    np.add.at(out, mesh.triangles, local)
    return out


def assemble_load(
    mesh: Mesh,
    dofmap: DofMap,
    sources: SourceFunctions,
    bcs: BoundaryConditionSpec,
    params: MaterialParams,
    t: float,
    min_degree: int = 6,
) -> tuple[np.ndarray, np.ndarray]:
    """Full right-hand sides at time t.

    Returns (rhs_mech, rhs_flow) with rhs_mech = (f, v) + <f1, v> over
    traction-carrying segments and rhs_flow = (phi, psi) + <phi1, psi> over
    flux segments plus the gravity term (K/mu_f)(rho_f g, grad psi).
    Entries at constrained dofs are present but ignored by the reduction.
    """
    rhs_mech = assemble_domain_load(mesh, dofmap, sources.f, t, "vector", min_degree)
    tractions = {tag: bc.traction for tag, bc in bcs.mechanical.items()}
    rhs_mech += assemble_boundary_load(mesh, dofmap, tractions, t, "vector")
    rhs_flow = assemble_domain_load(mesh, dofmap, sources.phi, t, "scalar", min_degree)
    fluxes = {
        tag: (bc.value if bc.kind == "flux" else None) for tag, bc in bcs.flow.items()
    }
    rhs_flow += assemble_boundary_load(mesh, dofmap, fluxes, t, "scalar")
    rhs_flow += assemble_gravity_load(mesh, dofmap, params)
    return rhs_mech, rhs_flow


def rigid_motion_basis(mesh: Mesh, dofmap: DofMap) -> np.ndarray:
    """Nodal coefficients of the rigid motions (1,0), (0,1), (-x2, x1).

    Returns a (3, n_u) array; these fields span the kernel of the strain
    operator and of the elasticity matrix.
    """
    coords = mesh.p2_node_coords()
    basis = np.zeros((3, dofmap.n_u))
    basis[0, 0::2] = 1.0
    basis[1, 1::2] = 1.0
    basis[2, 0::2] = -coords[:, 1]
    basis[2, 1::2] = coords[:, 0]
    return basis


@dataclass(frozen=True)
class AffineConstraint:
    """A linear combination constraint sum_k coeffs[k] * x[dofs[k]] = value."""

    dofs: tuple[int, ...]
    coeffs: tuple[float, ...]
    value: float


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Constraints in monolithic [u | xi | eta] numbering.

    Attributes:
        n_dofs: size of the monolithic layout.
        dirichlet_dofs / dirichlet_values: single-dof prescriptions
            (displacement components; in decoupled mode also eta values at
            pressure-Dirichlet vertices).
        affine: combination constraints (monolithic mode pressure rows
            kappa1*xi_b + kappa2*eta_b = p_D).
        rigid_rows: optional (3, n_dofs) sparse rows (r_i, .)_{L2} enforcing
            rigid-motion orthogonality for pure-traction mechanics.
        pressure_vertices: vertex ids carrying pressure-Dirichlet data, in
            the order their eta/affine constraints are listed.
    """

    n_dofs: int
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    affine: tuple[AffineConstraint, ...]
    rigid_rows: Optional[sp.csr_matrix]
    pressure_vertices: np.ndarray

    def restrict(self, lo: int, hi: int) -> "ConstraintSet":
        """Project the set onto the dof window [lo, hi), renumbered from 0.

        Single-dof constraints outside the window are dropped; affine
        constraints and rigid rows are kept only when their whole support
        lies inside the window.
        """
        keep = (self.dirichlet_dofs >= lo) & (self.dirichlet_dofs < hi)
        affine = tuple(
            AffineConstraint(tuple(d - lo for d in c.dofs), c.coeffs, c.value)
            for c in self.affine
            if all(lo <= d < hi for d in c.dofs)
        )
        rigid = None
        if self.rigid_rows is not None:
            csr = self.rigid_rows.tocsc()
            outside = np.setdiff1d(np.arange(self.n_dofs), np.arange(lo, hi))
            norm_out = np.zeros(self.rigid_rows.shape[0])
            if outside.size:
                norm_out = np.abs(csr[:, outside]).sum(axis=1).A.ravel()
            if np.all(norm_out == 0.0):
                rigid = csr[:, lo:hi].tocsr()
        pv = self.pressure_vertices
        return ConstraintSet(
            n_dofs=hi - lo,
            dirichlet_dofs=self.dirichlet_dofs[keep] - lo,
            dirichlet_values=self.dirichlet_values[keep],
            affine=affine,
            rigid_rows=rigid,
            pressure_vertices=pv,
        )


def _segment_vertices(mesh: Mesh, tag: BoundarySegment) -> np.ndarray:
    eids = mesh.edges_with_tag(tag)
    return np.unique(mesh.edges[eids].ravel())


def build_constraints(
    mesh: Mesh,
    dofmap: DofMap,
    bcs: BoundaryConditionSpec,
    coeffs: DerivedCoeffs,
    t: float,
    theta_mode: str = "monolithic",
    xi_known: Optional[np.ndarray] = None,
) -> ConstraintSet:
    """Constraints of the coupled problem at time t in monolithic numbering.

    Pressure-Dirichlet vertices yield, in "monolithic" mode, the affine
    rows kappa1*xi_b + kappa2*eta_b = p_D(x_b, t); in "decoupled" mode they
    become single-dof eta prescriptions eta_b = (p_D - kappa1*xi_b)/kappa2
    using the supplied xi_known values.  Rigid-motion rows are attached
    exactly when no displacement component is Dirichlet anywhere.
    """
    if theta_mode not in ("monolithic", "decoupled"):
        raise ValueError(f"unknown theta_mode {theta_mode!r}")
    coords = mesh.p2_node_coords()
    dir_map: dict[int, float] = {}
    for tag in sorted(bcs.mechanical, key=int):
        bc = bcs.mechanical[tag]
        nodes = mesh.nodes_on_segment(tag)
        for comp in (0, 1):
            closure = bc.dirichlet[comp]
            if closure is None:
                continue
            values = np.asarray(closure(coords[nodes], t), dtype=float)
            for node, val in zip(nodes, values):
                dof = 2 * int(node) + comp
                if dof not in dir_map:
                    dir_map[dof] = float(val)

    pressure_map: dict[int, float] = {}
    for tag in sorted(bcs.flow, key=int):
        bc = bcs.flow[tag]
        if bc.kind != "pressure":
            continue
        verts = _segment_vertices(mesh, tag)
        values = np.asarray(bc.value(mesh.vertices[verts], t), dtype=float)
        for vert, val in zip(verts, values):
            v = int(vert)
            if v not in pressure_map:
                pressure_map[v] = float(val)

    if pressure_map and coeffs.kappa2 == 0.0:
        raise ValueError(
            "pressure-Dirichlet data requires kappa2 > 0 (i.e. lam > 0); "
            "the eta elimination is undefined otherwise"
        )

    affine: list[AffineConstraint] = []
    pverts = np.array(sorted(pressure_map), dtype=np.int64)
    if theta_mode == "monolithic":
        for v in pverts:
            affine.append(
                AffineConstraint(
                    dofs=(dofmap.xi_offset + int(v), dofmap.eta_offset + int(v)),
                    coeffs=(coeffs.kappa1, coeffs.kappa2),
                    value=pressure_map[int(v)],
                )
            )
    else:
        if pverts.size and xi_known is None:
            raise ValueError("decoupled mode needs xi_known to eliminate eta values")
        for v in pverts:
            val = (pressure_map[int(v)] - coeffs.kappa1 * float(xi_known[int(v)])) / coeffs.kappa2
            dir_map[dofmap.eta_offset + int(v)] = val

    rigid = None
    if bcs.is_pure_traction():
        basis = rigid_motion_basis(mesh, dofmap)
        mass = assemble_vector_mass(mesh, dofmap)
        rows_u = mass.dot(basis.T).T  # (3, n_u)
        rigid = sp.hstack(
            [sp.csr_matrix(rows_u), sp.csr_matrix((3, 2 * dofmap.n_scalar))]
        ).tocsr()

    dir_dofs = np.array(sorted(dir_map), dtype=np.int64)
    dir_vals = np.array([dir_map[d] for d in dir_dofs], dtype=float)
    return ConstraintSet(
        n_dofs=dofmap.n_monolithic,
        dirichlet_dofs=dir_dofs,
        dirichlet_values=dir_vals,
        affine=tuple(affine),
        rigid_rows=rigid,
        pressure_vertices=pverts,
    )


class ReducedSystem:
    """Affine reduction of a sparse system, reusable across right-hand sides.

    The full unknown is recovered as x = T y + s where the columns of T
    correspond to master dofs and s carries prescribed slave values; the
    retained equations are the rows in keep_rows.  Extra constraint rows
    (rigid-motion or combination constraints) are enforced by Lagrange
    multipliers appended after the reduction.
    """

    def __init__(
        self,
        matrix: sp.spmatrix,
        masters: np.ndarray,
        keep_rows: np.ndarray,
        slaves: Optional[np.ndarray] = None,
        coupling: Optional[sp.spmatrix] = None,
        lag_rows: Optional[sp.spmatrix] = None,
        lag_rhs: Optional[np.ndarray] = None,
    ) -> None:
        matrix = matrix.tocsr()
        n_full = matrix.shape[0]
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError("reduction requires a square matrix")
        masters = np.asarray(masters, dtype=np.int64)
        keep_rows = np.asarray(keep_rows, dtype=np.int64)
        if masters.size != keep_rows.size:
            raise ValueError("master dof count must equal kept equation count")
        slaves = np.asarray(slaves, dtype=np.int64) if slaves is not None else np.empty(0, np.int64)
        if np.intersect1d(masters, slaves).size:
            raise SingularConstraintsError("a dof is both master and slave")
        if masters.size + slaves.size != n_full:
            raise ValueError("masters and slaves must partition the dofs")

        self.n_full = n_full
        self.masters = masters
        self.keep_rows = keep_rows
        self.slaves = slaves
        self.slave_values: Optional[np.ndarray] = None
        n_m = masters.size

        t_rows = [masters]
        t_cols = [np.arange(n_m, dtype=np.int64)]
        t_vals = [np.ones(n_m)]
        if coupling is not None and slaves.size:
            coup = coupling.tocoo()
            t_rows.append(slaves[coup.row])
            t_cols.append(coup.col.astype(np.int64))
            t_vals.append(coup.data)
        self.T = sp.coo_matrix(
            (np.concatenate(t_vals), (np.concatenate(t_rows), np.concatenate(t_cols))),
            shape=(n_full, n_m),
        ).tocsr()

        a_keep = matrix[keep_rows, :]
        self._a_slave = a_keep[:, slaves].tocsr() if slaves.size else None
        core = (a_keep @ self.T).tocsr()

        self.n_lag = 0
        self._lag = None
        self._lag_slave = None
        self._lag_rhs = np.empty(0)
        if lag_rows is not None and lag_rows.shape[0] > 0:
            lag = lag_rows.tocsr()
            self.n_lag = lag.shape[0]
            lag_red = (lag @ self.T).tocsr()
            gram = (lag_red @ lag_red.T).toarray()
            eigs = np.linalg.eigvalsh(gram)
            if eigs[-1] <= 0.0 or eigs[0] < 1e-12 * eigs[-1]:
                raise SingularConstraintsError(
                    "constraint rows are linearly dependent after elimination"
                )
            self._lag = lag
            self._lag_red = lag_red
            self._lag_slave = lag[:, slaves].tocsr() if slaves.size else None
            self._lag_rhs = (
                np.asarray(lag_rhs, dtype=float) if lag_rhs is not None else np.zeros(self.n_lag)
            )
            col_block = lag[:, keep_rows].T.tocsr()
            core = sp.bmat([[core, col_block], [lag_red, None]], format="csr")
        self.matrix = core.tocsc()
        self.n_reduced = n_m + self.n_lag

    def _slave_vals(self, slave_values: Optional[np.ndarray]) -> np.ndarray:
        if slave_values is None:
            slave_values = self.slave_values
        if slave_values is None:
            raise ValueError("slave values required but none given or stored")
        vals = np.asarray(slave_values, dtype=float)
        if vals.shape != self.slaves.shape:
            raise ValueError("slave value vector has wrong length")
        return vals

    def reduce_rhs(self, rhs: np.ndarray, slave_values: Optional[np.ndarray] = None) -> np.ndarray:
        """Right-hand side of the reduced system for given slave values."""
        top = np.asarray(rhs, dtype=float)[self.keep_rows].copy()
        bottom = self._lag_rhs.copy()
        if self.slaves.size:
            vals = self._slave_vals(slave_values)
            top -= self._a_slave @ vals
            if self._lag_slave is not None:
                bottom -= self._lag_slave @ vals
        return np.concatenate([top, bottom]) if self.n_lag else top

    def expand(self, solution: np.ndarray, slave_values: Optional[np.ndarray] = None) -> np.ndarray:
        """Recover the full dof vector from a reduced solution."""
        y = np.asarray(solution, dtype=float)[: self.masters.size]
        x = self.T @ y
        if self.slaves.size:
            x[self.slaves] += self._slave_vals(slave_values)
        return x

    def multipliers(self, solution: np.ndarray) -> np.ndarray:
        return np.asarray(solution, dtype=float)[self.masters.size :]


def apply_constraints(
    matrix: sp.spmatrix, rhs: np.ndarray, constraints: ConstraintSet
) -> ReducedSystem:
    """Reduce (matrix, rhs) by the constraint set.

    Single-dof constraints are eliminated symmetrically (row/column removal
    with right-hand-side correction); affine combination constraints and
    rigid-motion rows are appended as Lagrange multipliers.  The returned
    system carries .matrix and .rhs; expand() reproduces all constraints.
    """
    n = matrix.shape[0]
    if constraints.n_dofs != n:
        raise ValueError(
            f"constraint layout ({constraints.n_dofs} dofs) does not match matrix ({n})"
        )
    slaves = constraints.dirichlet_dofs
    if np.unique(slaves).size != slaves.size:
        raise SingularConstraintsError("duplicate single-dof constraints")
    masters = np.setdiff1d(np.arange(n, dtype=np.int64), slaves)

    lag_rows = []
    lag_rhs = []
    for c in constraints.affine:
        row = sp.csr_matrix(
            (np.asarray(c.coeffs, dtype=float), (np.zeros(len(c.dofs), np.int64), np.asarray(c.dofs))),
            shape=(1, n),
        )
        lag_rows.append(row)
        lag_rhs.append(c.value)
    if constraints.rigid_rows is not None:
        lag_rows.append(constraints.rigid_rows)
        lag_rhs.extend([0.0] * constraints.rigid_rows.shape[0])
    lag = sp.vstack(lag_rows).tocsr() if lag_rows else None

    system = ReducedSystem(
        matrix,
        masters=masters,
        keep_rows=masters,
        slaves=slaves,
        coupling=None,
        lag_rows=lag,
        lag_rhs=np.asarray(lag_rhs, dtype=float) if lag_rhs else None,
    )
    system.rhs = system.reduce_rhs(np.asarray(rhs, dtype=float), constraints.dirichlet_values)
    system.slave_values = constraints.dirichlet_values
    return system
