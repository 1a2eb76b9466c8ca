import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stand.fem import (
    LineLoad,
    applied_force,
    assemble_load_vector,
    assemble_stiffness,
    build_dofmap,
    element_stiffness_global,
    element_stiffness_local,
    fixed_end_forces_uniform,
    reactions,
    section_properties,
)
from stand.loads import EXPOSITION, Wind, action_to_member_loads, pressure_coefficient
from stand.solvers import cholesky
from stand.structgen import (
    LOCAL_AXES,
    BeamParams,
    FrameModel,
    GridSpec,
    extract_frame,
    generate_grid,
    generate_structure,
)

P = BeamParams(width=0.3, height=0.5, young_modulus=3e10, density=2500)

params_st = st.builds(
    BeamParams,
    width=st.floats(0.2, 0.4),
    height=st.floats(0.4, 0.6),
    young_modulus=st.floats(2.5e10, 4.3e10),
    density=st.floats(2000, 2600),
)


def rot_z(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, s, 0], [-s, c, 0], [0, 0, 1]])


def rigid_modes(length):
    """Rigid-body displacement vectors of a member from (0,0,0) to (L,0,0)."""
    modes = []
    for t in np.eye(3):
        modes.append(np.concatenate([t, np.zeros(3), t, np.zeros(3)]))
    for w in np.eye(3):
        ub = np.cross(w, [length, 0.0, 0.0])
        modes.append(np.concatenate([np.zeros(3), w, ub, w]))
    return np.array(modes)


def column(params, length=3.0):
    """One vertical member fixed at its base."""
    return FrameModel(
        nodes=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, length]]),
        members=np.array([[0, 1]]),
        member_axis=np.array([2]),
        supports=np.array([0]),
        slabs=[],
        walls=[],
        params=params,
    )


def test_section_properties():
    s = section_properties(P)
    assert s.area == pytest.approx(0.15, rel=1e-15)
    assert s.iz == pytest.approx(3.125e-3, rel=1e-15)
    assert s.iy == pytest.approx(0.5 * 0.3**3 / 12, rel=1e-15)
    assert s.shear_area_y == s.shear_area_z == pytest.approx(5 / 6 * 0.15)
    sq = section_properties(BeamParams(width=0.4, height=0.4, young_modulus=3e10, density=2500))
    assert sq.torsion == pytest.approx(0.1406 * 0.4**4, rel=0.01)


def test_torsion_close_to_exact_series():
    # exact: J = a b^3 [1/3 - 64/pi^5 (b/a) sum tanh(n pi a / 2b) / n^5], n odd
    for w, h in [(0.2, 0.6), (0.3, 0.5), (0.4, 0.4), (0.2, 0.4)]:
        a, b = max(w, h), min(w, h)
        n = np.arange(1, 200, 2)
        exact = a * b**3 * (1 / 3 - 64 / np.pi**5 * (b / a) * np.sum(np.tanh(n * np.pi * a / (2 * b)) / n**5))
        J = section_properties(BeamParams(width=w, height=h, young_modulus=3e10, density=2500)).torsion
        assert abs(J - exact) / exact < 0.01


def test_axial_entry():
    k = element_stiffness_local(P, 5.0)
    assert k[0, 0] == pytest.approx(9.0e8, rel=1e-15)
    assert k[0, 6] == pytest.approx(-9.0e8, rel=1e-15)


def test_euler_bernoulli_limit():
    s = dataclasses.replace(section_properties(P), shear_area_y=np.inf, shear_area_z=np.inf)
    L, E = 4.0, P.young_modulus
    k = element_stiffness_local(P, L, s)
    for (t1, r1, t2, r2), I, sign in (((1, 5, 7, 11), s.iz, 1), ((2, 4, 8, 10), s.iy, -1)):
        expect = {
            (t1, t1): 12 * E * I / L**3,
            (t1, t2): -12 * E * I / L**3,
            (t1, r1): sign * 6 * E * I / L**2,
            (t1, r2): sign * 6 * E * I / L**2,
            (r1, r1): 4 * E * I / L,
            (r1, r2): 2 * E * I / L,
        }
        for (i, j), v in expect.items():
            assert abs(k[i, j] - v) <= 1e-8 * abs(v)


@given(params_st, st.floats(3.0, 6.0))
@settings(max_examples=30, deadline=None)
def test_element_spectrum_and_rigid_modes(params, L):
    k = element_stiffness_local(params, L)
    assert np.array_equal(k, k.T)
    ev = np.linalg.eigvalsh(k)
    zero = np.abs(ev) <= 1e-6 * ev.max()
    assert zero.sum() == 6
    assert np.all(ev[~zero] > 0)
    for v in rigid_modes(L):
        assert np.linalg.norm(k @ v) <= 1e-8 * np.linalg.norm(k) * np.linalg.norm(v)


def test_vectorized_lengths():
    ks = element_stiffness_local(P, np.array([3.0, 4.0]))
    assert np.array_equal(ks[1], element_stiffness_local(P, 4.0))
    with pytest.raises(ValueError):
        element_stiffness_local(P, 0.0)


def test_global_transform_properties():
    k = element_stiffness_local(P, 4.0)
    assert np.array_equal(element_stiffness_global(k, np.eye(3)), k)
    twice = element_stiffness_global(element_stiffness_global(k, rot_z(90)), rot_z(90))
    assert np.allclose(twice, element_stiffness_global(k, rot_z(180)), rtol=0, atol=1e-6 * np.abs(k).max())
    rng = np.random.default_rng(0)
    for _ in range(5):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        kg = element_stiffness_global(k, q)
        assert np.trace(kg) == pytest.approx(np.trace(k), rel=1e-12)
        assert np.allclose(kg, kg.T, rtol=0, atol=1e-6)
        ev = np.linalg.eigvalsh(kg)
        assert (np.abs(ev) <= 1e-6 * ev.max()).sum() == 6
    with pytest.raises(ValueError):
        element_stiffness_global(k, np.diag([1.0, 2.0, 1.0]))


@pytest.mark.parametrize("axis, inertia", [(0, "iz"), (1, "iy")])
def test_cantilever_tip_load_oracle(axis, inertia):
    """Tip load on a column: bending plus shear deflection, closed form."""
    L, F = 3.0, 1e4
    frame = column(P, L)
    K, dofmap = assemble_stiffness(frame)
    assert K.n == 6
    assert np.array_equal(K.to_dense(), element_matrices_free_block(frame))
    f = np.zeros(6)
    f[axis] = F
    u = cholesky(K, "natural").solve(f)
    s = section_properties(P)
    G = P.shear_modulus
    expect = F * L**3 / (3 * P.young_modulus * getattr(s, inertia)) + F * L / (G * s.shear_area_y)
    assert u[axis] == pytest.approx(expect, rel=1e-10)


def element_matrices_free_block(frame):
    k = element_stiffness_global(element_stiffness_local(frame.params, frame.lengths[0]), LOCAL_AXES[2])
    return k[6:, 6:]


def test_cantilever_uniform_load_oracle():
    L, q = 4.0, 2500.0
    frame = column(P, L)
    K, dofmap = assemble_stiffness(frame)
    f = assemble_load_vector(frame, dofmap, [LineLoad(0, q, (1.0, 0.0, 0.0))])
    u = cholesky(K, "natural").solve(f)
    s = section_properties(P)
    EI, GAs = P.young_modulus * s.iz, P.shear_modulus * s.shear_area_y
    assert u[0] == pytest.approx(q * L**4 / (8 * EI) + q * L**2 / (2 * GAs), rel=1e-10)
    # rotation of the tip about global y (x-displacement grows with z)
    assert u[4] == pytest.approx(q * L**3 / (6 * EI), rel=1e-10)


def test_fixed_end_forces_textbook():
    # beam along +x, 1000 N/m downward, 4 m
    fe = fixed_end_forces_uniform([0.0, 0.0, -1000.0], 4.0, LOCAL_AXES[0])
    assert fe[2] == pytest.approx(-2000.0) and fe[8] == pytest.approx(-2000.0)
    # hogging end moments: +wL^2/12 about y at a, -wL^2/12 at b
    assert fe[4] == pytest.approx(4000.0 / 3.0) and fe[10] == pytest.approx(-4000.0 / 3.0)
    assert np.count_nonzero(np.abs(fe) > 1e-9) == 4
    assert not np.any(fixed_end_forces_uniform([0.0, 0.0, 0.0], 4.0, LOCAL_AXES[0]))


@given(st.floats(-1e5, 1e5), st.floats(0.5, 10), st.integers(0, 2), st.integers(0, 2))
def test_fixed_end_force_resultant(p, L, axis, direction):
    q = np.zeros(3)
    q[direction] = p
    fe = fixed_end_forces_uniform(q, L, LOCAL_AXES[axis])
    assert np.allclose(fe[0:3] + fe[6:9], q * L, rtol=1e-12, atol=1e-9)
    # axial load produces no end moments
    if direction == [0, 1, 2][axis]:
        assert np.allclose(fe[[3, 4, 5, 9, 10, 11]], 0)


def test_cube_frame_dofs_and_spd():
    f = extract_frame(generate_grid(GridSpec(1, 1, 1)), P)
    K, dofmap = assemble_stiffness(f)
    assert K.n == 24
    assert sorted(dofmap.node_dofs[dofmap.node_dofs >= 0].tolist()) == list(range(24))
    assert np.all(dofmap.node_dofs[f.supports] == -1)
    assert np.all(np.linalg.eigvalsh(K.to_dense()) > 0)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_assembly_invariants(nx, ny, nz, seed):
    frame = generate_structure(GridSpec(nx, ny, nz, seed))
    K, dofmap = assemble_stiffness(frame)
    assert K.n == frame.n_dofs == 6 * len(frame.free_nodes)
    assert K.is_symmetric()
    cholesky(K, "amd")  # raises unless PD
    degree = np.bincount(frame.members.ravel(), minlength=frame.n_nodes)
    assert degree.max() <= 6
    assert np.diff(K.indptr).max() <= 6 * (1 + degree.max())


def test_assembly_errors():
    frame = column(P)
    with pytest.raises(ValueError, match="supports"):
        assemble_stiffness(dataclasses.replace(frame, supports=np.array([], dtype=np.int64)))
    split = FrameModel(
        nodes=np.array([[0, 0, 0], [0, 0, 3], [5, 0, 0], [5, 0, 3.0]]),
        members=np.array([[0, 1], [2, 3]]),
        member_axis=np.array([2, 2]),
        supports=np.array([0, 2]),
        slabs=[],
        walls=[],
        params=P,
    )
    with pytest.raises(ValueError, match="disconnected"):
        assemble_stiffness(split)
    with pytest.raises(ValueError, match="unknown member"):
        assemble_load_vector(frame, build_dofmap(frame), [LineLoad(5, 1.0, (0, 0, -1.0))])


def test_load_vector_linearity_and_locality():
    frame = extract_frame(generate_grid(GridSpec(1, 1, 2)), P)
    dm = build_dofmap(frame)
    assert not assemble_load_vector(frame, dm, []).any()
    assert len(assemble_load_vector(frame, dm, [])) == dm.n
    a = [LineLoad(m, 100.0 * (m + 1), (0, 0, -1.0)) for m in range(frame.n_members)]
    b = [LineLoad(m, 50.0, (1.0, 0, 0)) for m in range(0, frame.n_members, 2)]
    fa, fb = assemble_load_vector(frame, dm, a), assemble_load_vector(frame, dm, b)
    assert np.allclose(assemble_load_vector(frame, dm, a + b), fa + fb, rtol=1e-14, atol=0)
    top = [m for m in range(frame.n_members) if np.all(frame.nodes[frame.members[m], 2] == 2.0)][0]
    f = assemble_load_vector(frame, dm, [LineLoad(top, 1000.0, (0, 1.0, 0))])
    allowed = set(dm.node_dofs[frame.members[top]].ravel().tolist())
    assert set(np.flatnonzero(f).tolist()) <= allowed


def test_line_load_validation():
    with pytest.raises(ValueError):
        LineLoad(0, np.inf, (0, 0, 1.0))
    with pytest.raises(ValueError):
        LineLoad(0, 1.0, (0, 0, 2.0))


def solve_frame(frame, loads):
    K, dm = assemble_stiffness(frame)
    f = assemble_load_vector(frame, dm, loads)
    return dm, cholesky(K, "amd").solve(f)


def test_self_weight_reactions_equal_total_weight():
    frame = generate_structure(GridSpec(3, 2, 3, seed=5))
    pg = 9.81 * frame.params.density * frame.params.width * frame.params.height
    loads = [LineLoad(m, pg, (0, 0, -1.0)) for m in range(frame.n_members)]
    dm, u = solve_frame(frame, loads)
    r = reactions(frame, dm, u, loads)
    weight = pg * frame.lengths.sum()
    assert r.total[2] == pytest.approx(weight, rel=1e-9)
    assert np.all(r.imbalance() < 1e-9)
    assert applied_force(frame, loads)[2] == pytest.approx(-weight, rel=1e-12)


def test_zero_load_zero_reactions():
    frame = extract_frame(generate_grid(GridSpec(1, 1, 1)), P)
    dm = build_dofmap(frame)
    r = reactions(frame, dm, np.zeros(dm.n), [])
    assert not r.forces.any()


def test_wind_reactions_panel_oracle():
    frame = extract_frame(generate_grid(GridSpec(1, 1, 1)), P)
    action = Wind(27.0, "III", "+x")
    loads = action_to_member_loads(frame, action)
    dm, u = solve_frame(frame, loads)
    r = reactions(frame, dm, u, loads)
    cat = EXPOSITION["III"]
    t = np.log(max(1.0, cat.z_min) / cat.z0)
    q = 0.5 * 1.25 * 27.0**2 * cat.k**2 * t * (7 + t)
    # h = d = 1: windward pushes +x, leeward suction also pulls +x; lateral cancel
    total = q * (pressure_coefficient("windward", 1, 1) - pressure_coefficient("leeward", 1, 1)) * 1.0
    assert r.total[0] == pytest.approx(-total, rel=1e-9)
    assert abs(r.total[1]) <= 1e-9 * total
    assert np.all(r.imbalance() < 1e-9)


def test_system_superposition():
    frame = generate_structure(GridSpec(3, 3, 2, seed=11))
    K, dm = assemble_stiffness(frame)
    rng = np.random.default_rng(0)
    f1, f2 = rng.standard_normal(K.n), rng.standard_normal(K.n)
    fac = cholesky(K, "amd")
    u = fac.solve(f1 + f2)
    assert np.linalg.norm(u - fac.solve(f1) - fac.solve(f2)) <= 1e-10 * np.linalg.norm(u)
