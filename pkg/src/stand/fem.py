"""Linear static model of a frame with 3D Timoshenko beam elements.

Element dofs are ordered ``(u, v, w, rx, ry, rz)`` at end a, then at end b,
in member-local axes. Local y is the section height direction, so bending
in the local x-y plane uses ``iz = width * height**3 / 12`` (the strong
axis for beams) and bending in the x-z plane uses ``iy = height * width**3 / 12``.
Support nodes are fully fixed and their dofs removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import SparseSpd, from_lower_triplets
from .structgen import LOCAL_AXES, BeamParams, FrameModel, is_connected

DOFS_PER_NODE = 6


@dataclass(frozen=True)
class SectionProperties:
    area: float
    iy: float
    iz: float
    torsion: float
    shear_area_y: float
    shear_area_z: float


@dataclass(frozen=True)
class LineLoad:
    """Uniform load of ``intensity`` N/m on a member, along a global unit vector."""

    member: int
    intensity: float
    direction: tuple[float, float, float]

    def __post_init__(self):
        if not np.isfinite(self.intensity):
            raise ValueError("line load intensity must be finite")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise ValueError("line load direction must be a unit vector")


@dataclass(frozen=True)
class DofMap:
    """Free-dof index of every (node, local dof); -1 on supports."""

    node_dofs: np.ndarray  # (n_nodes, 6)
    n: int

    def member_dofs(self, members: np.ndarray) -> np.ndarray:
        return self.node_dofs[members].reshape(len(members), 12)


def section_properties(params: BeamParams) -> SectionProperties:
    w, h = params.width, params.height
    a, b = max(w, h), min(w, h)
    torsion = a * b**3 * (1.0 / 3.0 - 0.21 * (b / a) * (1.0 - b**4 / (12.0 * a**4)))
    area = w * h
    shear = params.shear_correction * area
    return SectionProperties(
        area=area,
        iy=h * w**3 / 12.0,
        iz=w * h**3 / 12.0,
        torsion=torsion,
        shear_area_y=shear,
        shear_area_z=shear,
    )


def element_stiffness_local(params: BeamParams, length, section: SectionProperties | None = None):
    """12x12 Timoshenko space-frame stiffness in local axes.

    ``length`` may be an array, in which case a stack ``(m, 12, 12)`` is returned.
    """
    L = np.asarray(length, dtype=float)
    if np.any(L <= 0):
        raise ValueError("member length must be positive")
    sec = section or section_properties(params)
    E, G = params.young_modulus, params.shear_modulus
    scalar = L.ndim == 0
    L = np.atleast_1d(L)
    k = np.zeros((len(L), 12, 12))

    ea = E * sec.area / L
    gj = G * sec.torsion / L
    k[:, 0, 0] = k[:, 6, 6] = ea
    k[:, 0, 6] = k[:, 6, 0] = -ea
    k[:, 3, 3] = k[:, 9, 9] = gj
    k[:, 3, 9] = k[:, 9, 3] = -gj

    # x-y plane: v (1, 7) and rz (5, 11); x-z plane: w (2, 8) and ry (4, 10).
    # The x-z plane flips the sign of the translation/rotation coupling.
    for (t1, r1, t2, r2), inertia, shear_area, s in (
        ((1, 5, 7, 11), sec.iz, sec.shear_area_y, 1.0),
        ((2, 4, 8, 10), sec.iy, sec.shear_area_z, -1.0),
    ):
        phi = 12.0 * E * inertia / (G * shear_area * L**2)
        ei = E * inertia / (1.0 + phi)
        a = 12.0 * ei / L**3
        b = s * 6.0 * ei / L**2
        c = (4.0 + phi) * ei / L
        d = (2.0 - phi) * ei / L
        entries = {
            (t1, t1): a, (t2, t2): a, (t1, t2): -a,
            (t1, r1): b, (t1, r2): b, (t2, r1): -b, (t2, r2): -b,
            (r1, r1): c, (r2, r2): c, (r1, r2): d,
        }  # fmt: skip
        for (i, j), v in entries.items():
            k[:, i, j] = v
            k[:, j, i] = v
    return k[0] if scalar else k


def rotation_blocks(rotation: np.ndarray) -> np.ndarray:
    """Block-diagonal 12x12 transformation from 3x3 direction cosines."""
    r = np.asarray(rotation, dtype=float)
    t = np.zeros(r.shape[:-2] + (12, 12))
    for b in range(4):
        t[..., 3 * b : 3 * b + 3, 3 * b : 3 * b + 3] = r
    return t


def element_stiffness_global(k_local: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    eye = np.broadcast_to(np.eye(3), r.shape)
    if not np.allclose(r @ np.swapaxes(r, -1, -2), eye, atol=1e-12, rtol=0):
        raise ValueError("member axes are not orthonormal")
    t = rotation_blocks(r)
    return np.swapaxes(t, -1, -2) @ k_local @ t


def element_matrices(frame: FrameModel) -> np.ndarray:
    """Global-axis stiffness of every member, shape ``(m, 12, 12)``."""
    k_local = element_stiffness_local(frame.params, frame.lengths)
    return element_stiffness_global(k_local, LOCAL_AXES[frame.member_axis])


def build_dofmap(frame: FrameModel) -> DofMap:
    node_dofs = np.full((frame.n_nodes, DOFS_PER_NODE), -1, dtype=np.int64)
    free = frame.free_nodes
    node_dofs[free] = np.arange(len(free) * DOFS_PER_NODE).reshape(-1, DOFS_PER_NODE)
    return DofMap(node_dofs, len(free) * DOFS_PER_NODE)


def assemble_stiffness(frame: FrameModel) -> tuple[SparseSpd, DofMap]:
    if len(frame.supports) == 0:
        raise ValueError("frame has no supports; stiffness would be singular")
    if not is_connected(frame):
        raise ValueError("frame is disconnected")
    dofmap = build_dofmap(frame)
    ke = element_matrices(frame)
    dofs = dofmap.member_dofs(frame.members)
    rows = np.broadcast_to(dofs[:, :, None], ke.shape)
    cols = np.broadcast_to(dofs[:, None, :], ke.shape)
    keep = (cols >= 0) & (rows >= cols) & (ke != 0.0)
    K = from_lower_triplets(dofmap.n, rows[keep], cols[keep], ke[keep])
    return K, dofmap


def _load_arrays(frame: FrameModel, loads) -> tuple[np.ndarray, np.ndarray]:
    if not loads:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 3))
    members = np.array([ld.member for ld in loads], dtype=np.int64)
    if members.min() < 0 or members.max() >= frame.n_members:
        bad = members[(members < 0) | (members >= frame.n_members)][0]
        raise ValueError(f"line load on unknown member {bad}")
    q = np.array([ld.intensity for ld in loads])[:, None] * np.array([ld.direction for ld in loads], dtype=float)
    return members, q


def fixed_end_forces_uniform(q_global, length, rotation) -> np.ndarray:
    """Equivalent nodal loads (global axes) of uniform line loads.

    ``q_global`` is the load per unit length as a global vector (or a stack
    of them); the returned 12-vectors are forces and moments at ends a, b.
    """
    q_global = np.asarray(q_global, dtype=float)
    R = np.asarray(rotation, dtype=float)
    L = np.asarray(length, dtype=float)[..., None]
    q = np.einsum("...ij,...j->...i", R, q_global)
    qx, qy, qz = q[..., 0:1], q[..., 1:2], q[..., 2:3]
    f = np.zeros(q.shape[:-1] + (12,))
    half, m = L / 2.0, L**2 / 12.0
    f[..., [0]] = f[..., [6]] = qx * half
    f[..., [1]] = f[..., [7]] = qy * half
    f[..., [2]] = f[..., [8]] = qz * half
    f[..., [5]] = qy * m
    f[..., [11]] = -qy * m
    f[..., [4]] = -qz * m
    f[..., [10]] = qz * m
    t = rotation_blocks(R)
    return np.einsum("...ji,...j->...i", t, f)


def member_load_forces(frame: FrameModel, loads) -> tuple[np.ndarray, np.ndarray]:
    """(member ids, equivalent global 12-vectors) for a list of ``LineLoad``."""
    members, q = _load_arrays(frame, loads)
    fe = fixed_end_forces_uniform(q, frame.lengths[members], LOCAL_AXES[frame.member_axis[members]])
    return members, fe


def assemble_load_vector(frame: FrameModel, dofmap: DofMap, loads) -> np.ndarray:
    f = np.zeros(dofmap.n)
    members, fe = member_load_forces(frame, loads)
    if len(members) == 0:
        return f
    dofs = dofmap.member_dofs(frame.members[members])
    keep = dofs >= 0
    np.add.at(f, dofs[keep], fe[keep])
    return f


def applied_force(frame: FrameModel, loads) -> np.ndarray:
    """Total external force vector (N) of a list of line loads."""
    members, q = _load_arrays(frame, loads)
    return (q * frame.lengths[members][:, None]).sum(axis=0)


@dataclass
class Reactions:
    support_nodes: np.ndarray
    forces: np.ndarray  # (n_supports, 6) reaction forces/moments on the structure
    applied: np.ndarray  # (3,) total applied load
    scale: float  # sum of absolute applied line-load resultants

    @property
    def total(self) -> np.ndarray:
        return self.forces[:, :3].sum(axis=0)

    def imbalance(self) -> np.ndarray:
        """Per-axis ``|sum(reactions) + sum(applied)|`` relative to the load scale."""
        if self.scale == 0.0:
            return np.abs(self.total + self.applied)
        return np.abs(self.total + self.applied) / self.scale


def reactions(frame: FrameModel, dofmap: DofMap, u, loads) -> Reactions:
    u = np.asarray(u, dtype=float)
    full = np.zeros((frame.n_nodes, DOFS_PER_NODE))
    free = dofmap.node_dofs >= 0
    full[free] = u[dofmap.node_dofs[free]]

    ke = element_matrices(frame)
    ue = full[frame.members].reshape(-1, 12)
    internal = np.einsum("mij,mj->mi", ke, ue)
    members, fe = member_load_forces(frame, loads)
    np.subtract.at(internal, members, fe)

    nodal = np.zeros((frame.n_nodes, DOFS_PER_NODE))
    np.add.at(nodal, frame.members[:, 0], internal[:, :6])
    np.add.at(nodal, frame.members[:, 1], internal[:, 6:])

    _, q = _load_arrays(frame, loads)
    lengths = frame.lengths[members]
    return Reactions(
        support_nodes=frame.supports,
        forces=nodal[frame.supports],
        applied=applied_force(frame, loads),
        scale=float((np.linalg.norm(q, axis=1) * lengths).sum()),
    )
