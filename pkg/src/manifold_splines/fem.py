"""Finite element operators on triangulated surfaces.

P1 elements with a lumped mass matrix.  An optional anisotropy deforms
each triangle in an orthonormal frame of its tangent plane aligned with
the chart (symmetric orthogonalization of the chart axis directions),
so the deformation depends only on the composition of chart rotation
and anisotropy angle.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import _kernels
from .errors import MeshValidationError, ModelError
from .mesh import TriangleMesh


@dataclass(frozen=True)
class AnisotropyParams:
    """Local deformation: rotation by ``angle`` then axis scaling.

    The scaling is diag(exp(log_ratio/2), exp(-log_ratio/2)), so the
    determinant is 1 and log_ratio is the log of the axis ratio.  The
    model is invariant under angle -> angle + pi, so angles are compared
    in the canonical range (-pi/2, pi/2].
    """

    angle: float
    log_ratio: float

    def canonical(self) -> "AnisotropyParams":
        a = self.angle - math.pi * math.floor(self.angle / math.pi)
        if a > math.pi / 2.0:
            a -= math.pi
        return AnisotropyParams(a, self.log_ratio)

    def deformation(self) -> np.ndarray:
        """The 2x2 map applied to tangent-frame coordinates."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot_t = np.array([[c, s], [-s, c]])
        scale_inv = np.array(
            [math.exp(-self.log_ratio / 2.0), math.exp(self.log_ratio / 2.0)]
        )
        return scale_inv[:, None] * rot_t


@dataclass(frozen=True, eq=False)
class FemOperators:
    """Assembled operators for one mesh and anisotropy.

    Attributes
    ----------
    mass : (m,) array
        Diagonal of the lumped mass matrix.
    stiffness : csr matrix
        Gradient inner-product matrix; rows sum to zero.
    whitened : csr matrix
        Mass-whitened stiffness, symmetric PSD with a simple zero
        eigenvalue for connected meshes.
    precision_core : csr matrix
        stiffness @ mass^-1 @ stiffness.
    const_mode : (m,) array
        The constant eigenvector, normalized so const_mode' M const_mode = 1.
    """

    mesh: TriangleMesh
    aniso: AnisotropyParams | None
    mass: np.ndarray
    stiffness: sparse.csr_matrix
    whitened: sparse.csr_matrix
    precision_core: sparse.csr_matrix
    const_mode: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.mass.shape[0]

    @property
    def sqrt_mass(self) -> np.ndarray:
        return np.sqrt(self.mass)

    @property
    def mass_times_const(self) -> np.ndarray:
        """M @ const_mode, the vector spanning the precision null space."""
        return self.mass * self.const_mode

    @property
    def total_area(self) -> float:
        return float(self.mass.sum())


def _plane_coords(mesh: TriangleMesh) -> np.ndarray:
    """Per-triangle 2-D coordinates in an edge-aligned orthonormal frame."""
    v = mesh.vertices[mesh.triangles]
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    n1 = np.linalg.norm(e1, axis=1)
    f1 = e1 / n1[:, None]
    e2_perp = e2 - np.einsum("ij,ij->i", e2, f1)[:, None] * f1
    n2 = np.linalg.norm(e2_perp, axis=1)
    f2 = e2_perp / np.maximum(n2, 1e-300)[:, None]
    coords = np.zeros((v.shape[0], 3, 2))
    coords[:, 1, 0] = n1
    coords[:, 2, 0] = np.einsum("ij,ij->i", e2, f1)
    coords[:, 2, 1] = np.einsum("ij,ij->i", e2, f2)
    return coords


def _chart_frame_coords(mesh: TriangleMesh) -> np.ndarray:
    """Per-triangle 2-D coordinates in the symmetrized chart frame.

    The frame is the orthonormal factor of the polar decomposition of
    the chart-axis directions, so rotating the chart rotates the frame
    by exactly the same angle.
    """
    v = mesh.vertices[mesh.triangles]
    e = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)  # (t, 3, 2)
    u = mesh.triangle_chart_coords()
    du = np.stack([u[:, 1] - u[:, 0], u[:, 2] - u[:, 0]], axis=2)  # (t, 2, 2)
    det = du[:, 0, 0] * du[:, 1, 1] - du[:, 0, 1] * du[:, 1, 0]
    bad = np.abs(det) <= 1e-300
    if bad.any():
        raise MeshValidationError(
            f"triangle {int(np.argmax(bad))} has degenerate chart coordinates"
        )
    inv = np.empty_like(du)
    inv[:, 0, 0] = du[:, 1, 1] / det
    inv[:, 0, 1] = -du[:, 0, 1] / det
    inv[:, 1, 0] = -du[:, 1, 0] / det
    inv[:, 1, 1] = du[:, 0, 0] / det
    jac = np.einsum("tik,tkj->tij", e, inv)  # chart axes in 3-D, (t, 3, 2)

    gram = np.einsum("tki,tkj->tij", jac, jac)
    tr = gram[:, 0, 0] + gram[:, 1, 1]
    det_g = gram[:, 0, 0] * gram[:, 1, 1] - gram[:, 0, 1] * gram[:, 1, 0]
    if np.any(det_g <= 0.0):
        raise MeshValidationError(
            f"triangle {int(np.argmax(det_g <= 0.0))} has a singular chart metric"
        )
    sqrt_det = np.sqrt(det_g)
    denom = np.sqrt(tr + 2.0 * sqrt_det)
    # sqrt of a 2x2 SPD matrix: (G + sqrt(det G) I) / sqrt(tr G + 2 sqrt(det G))
    root = gram + sqrt_det[:, None, None] * np.eye(2)[None, :, :]
    root /= denom[:, None, None]
    inv_root = np.empty_like(root)
    inv_root[:, 0, 0] = root[:, 1, 1] / sqrt_det
    inv_root[:, 0, 1] = -root[:, 0, 1] / sqrt_det
    inv_root[:, 1, 0] = -root[:, 1, 0] / sqrt_det
    inv_root[:, 1, 1] = root[:, 0, 0] / sqrt_det
    frame = np.einsum("tik,tkj->tij", jac, inv_root)  # orthonormal (t, 3, 2)

    coords = np.zeros((v.shape[0], 3, 2))
    coords[:, 1, :] = np.einsum("tki,tk->ti", frame, v[:, 1] - v[:, 0])
    coords[:, 2, :] = np.einsum("tki,tk->ti", frame, v[:, 2] - v[:, 0])
    return coords


def assemble(mesh: TriangleMesh, aniso: AnisotropyParams | None = None) -> FemOperators:
    """Assemble lumped mass, stiffness, and derived operators.

    With anisotropy, triangle vertices are mapped through the
    deformation in the chart-aligned tangent frame before the standard
    flat-triangle element formulas are applied.
    """
    if aniso is None:
        coords = _plane_coords(mesh)
    else:
        if mesh.chart is None:
            raise MeshValidationError("anisotropy requires chart coordinates")
        coords = _chart_frame_coords(mesh)
        coords = np.einsum("ab,tib->tia", aniso.deformation(), coords)

    areas, elem = _kernels.element_arrays(coords)
    tiny = areas <= 1e-14 * areas.mean()
    if tiny.any():
        raise MeshValidationError(
            f"triangle {int(np.argmax(tiny))} degenerates under the deformation"
        )

    m = mesh.n_vertices
    tris = mesh.triangles
    mass = np.zeros(m)
    np.add.at(mass, tris.ravel(), np.repeat(areas / 3.0, 3))

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    stiffness = sparse.coo_matrix(
        (elem.ravel(), (rows, cols)), shape=(m, m)
    ).tocsr()
    stiffness.sum_duplicates()

    inv_sqrt_diag = sparse.diags(1.0 / np.sqrt(mass))
    whitened = sparse.csr_matrix(inv_sqrt_diag @ stiffness @ inv_sqrt_diag)
    core = stiffness @ sparse.diags(1.0 / mass) @ stiffness
    core = sparse.csr_matrix((core + core.T) * 0.5)
    const = np.full(m, 1.0 / math.sqrt(mass.sum()))
    return FemOperators(
        mesh=mesh,
        aniso=aniso,
        mass=mass,
        stiffness=stiffness,
        whitened=whitened,
        precision_core=core,
        const_mode=const,
    )


def compute_phi0(ops: FemOperators) -> np.ndarray:
    """The constant mode, normalized so that phi0' M phi0 = 1."""
    return ops.const_mode.copy()


def dense_sigma_oracle(ops: FemOperators, max_vertices: int = 4000) -> np.ndarray:
    """Dense prior covariance (unit variance parameter) by eigendecomposition.

    Inverse-squares the positive eigenvalues of the whitened operator
    and zeroes the constant mode.  Guarded to small meshes; used as the
    reference against which the sparse paths are tested.
    """
    m = ops.n_vertices
    if m > max_vertices:
        raise ModelError(
            f"dense covariance limited to {max_vertices} vertices, got {m}"
        )
    s_dense = ops.whitened.toarray()
    eigvals, eigvecs = np.linalg.eigh(s_dense)
    threshold = 1e-9 * eigvals[-1]
    null = eigvals <= threshold
    if null.sum() != 1:
        raise ModelError(
            f"expected exactly one zero eigenvalue, found {int(null.sum())}"
        )
    f = np.where(null, 0.0, 1.0 / np.where(null, 1.0, eigvals) ** 2)
    inv_sqrt = 1.0 / np.sqrt(ops.mass)
    half = eigvecs * f[None, :]
    return (inv_sqrt[:, None] * half) @ (eigvecs.T * inv_sqrt[None, :])


def export_operators(ops: FemOperators, directory) -> dict:
    """Write mass, stiffness, whitened, and core matrices in Matrix Market form."""
    from scipy.io import mmwrite

    os.makedirs(directory, exist_ok=True)
    paths = {}
    named = {
        "mass": sparse.diags(ops.mass).tocoo(),
        "stiffness": ops.stiffness.tocoo(),
        "whitened": ops.whitened.tocoo(),
        "precision_core": ops.precision_core.tocoo(),
    }
    for name, mat in named.items():
        path = os.path.join(os.fspath(directory), f"{name}.mtx")
        mmwrite(path, mat)
        paths[name] = path
    return paths
