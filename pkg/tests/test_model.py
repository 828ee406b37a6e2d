import threading

import numpy as np
import pytest
from scipy.optimize import minimize as scipy_minimize

import diskrod.model as model
from diskrod.errors import DimensionMismatch, NonFiniteEnergy, SolverNotConverged
from diskrod.model import (ActuationState, ManipulatorConfig, WarmStartCache,
                           forward, slack_path_length, solve_equilibrium,
                           tendon_hole_positions, tendon_path_length,
                           total_energy)
from diskrod.model import _energy_and_gradient
from conftest import actuation


# ------------------------------------------------------------- configuration

def test_config_derived_quantities(config):
    assert config.n_segments == 8
    assert config.segment_length_mm == pytest.approx(70.0)
    assert config.n_elements == 32
    assert np.allclose(config.disk_arc_positions_mm, np.arange(9) * 70.0)
    d4 = config.backbone_diameter_mm ** 4
    assert config.bending_stiffness == pytest.approx(60000.0 * np.pi * d4 / 64.0)
    assert config.torsion_stiffness == pytest.approx(23000.0 * np.pi * d4 / 32.0)


def test_config_rejects_nonpositive():
    with pytest.raises(ValueError):
        ManipulatorConfig(backbone_length_mm=0.0)
    with pytest.raises(ValueError):
        ManipulatorConfig(n_disks=1)
    with pytest.raises(ValueError):
        ManipulatorConfig(elements_per_segment=0)


def test_actuation_bounds():
    with pytest.raises(ValueError):
        ActuationState(tendon_mm=141.0)
    with pytest.raises(ValueError):
        ActuationState(tendon_mm=-1.0)
    with pytest.raises(ValueError):
        actuation(0.0, d5=-95.0)
    ActuationState(tendon_mm=140.0, disk_angles_deg=(90.0,) * 9)  # boundary ok


# ------------------------------------------------------------- hole geometry

def straight_shape(config):
    return solve_equilibrium(config, ActuationState(
        tendon_mm=0.0), warm_start=np.zeros(3 * config.n_elements)).shape


def test_hole_positions_straight(config, solve_cached):
    shape = solve_cached(0.0).shape
    holes = tendon_hole_positions(shape, config, ActuationState(0.0))
    assert np.allclose(holes[:, 0], 34.0)
    assert np.allclose(holes[:, 1], 0.0)


def test_hole_positions_single_rotation(config, solve_cached):
    shape = solve_cached(0.0).shape
    holes = tendon_hole_positions(shape, config, actuation(0.0, d5=90.0))
    assert np.allclose(holes[5], [0.0, 34.0, -280.0], atol=1e-9)
    others = np.delete(np.arange(10), 5)
    assert np.allclose(holes[others][:, 0], 34.0)


def test_hole_positions_mirror(config, solve_cached):
    shape = solve_cached(0.0).shape
    plus = tendon_hole_positions(shape, config, actuation(0.0, d5=90.0))
    minus = tendon_hole_positions(shape, config, actuation(0.0, d5=-90.0))
    assert np.allclose(plus[5] * np.array([1, -1, 1]), minus[5])


def test_path_length_straight_is_backbone(config, solve_cached):
    shape = solve_cached(0.0).shape
    assert tendon_path_length(shape, config, ActuationState(0.0)) == pytest.approx(560.0)


def test_path_length_single_kink_formula(config, solve_cached):
    shape = solve_cached(0.0).shape
    got = tendon_path_length(shape, config, actuation(0.0, d5=90.0))
    # chord formula on the two affected 70 mm segments
    kink = np.sqrt(70.0 ** 2 + 2.0 * 34.0 ** 2 * (1.0 - np.cos(np.pi / 2)))
    assert got == pytest.approx(560.0 + 2.0 * (kink - 70.0))


def test_path_length_permutation_of_equal_angles(config, solve_cached):
    shape = solve_cached(0.0).shape
    a = tendon_path_length(shape, config, actuation(0.0, d3=45.0, d6=45.0))
    b = tendon_path_length(shape, config, actuation(0.0, d3=45.0, d6=45.0))
    assert a == b
    # swapping which of two symmetric disks carries the angle keeps the set
    c = tendon_path_length(shape, config, actuation(0.0, d4=30.0, d6=30.0))
    d = tendon_path_length(shape, config, actuation(0.0, d6=30.0, d4=30.0))
    assert c == d


# -------------------------------------------------------------------- energy

def test_energy_reference_state(config):
    dof = np.zeros(3 * config.n_elements)
    e0 = total_energy(dof, config, ActuationState(0.0))
    # elastic and tendon terms vanish; what remains is the gravity reference
    masses = config.node_masses_g()
    heights = -np.arange(config.n_elements + 1) * config.element_length_mm
    expected = 1e-3 * 9.81 * float(masses @ heights)
    assert e0 == pytest.approx(expected, rel=1e-12)


def test_energy_taut_tendon_closed_form(config):
    dof = np.zeros(3 * config.n_elements)
    e0 = total_energy(dof, config, ActuationState(0.0))
    e10 = total_energy(dof, config, ActuationState(10.0))
    assert e10 - e0 == pytest.approx(0.5 * config.tendon_stiffness_n_per_mm * 100.0)


def test_energy_uniform_bend_closed_form(config):
    kappa = 0.001
    dof = np.zeros((config.n_elements, 3))
    dof[:, 0] = kappa
    act = ActuationState(0.0)
    e = total_energy(dof, config, act)
    elastic = 0.5 * config.bending_stiffness * kappa ** 2 * 560.0
    # subtract gravity of the reconstructed bent shape and slack-tendon term
    psi = dof * config.element_length_mm
    energy, _, path = _energy_and_gradient(
        psi.reshape(-1), config, np.zeros(9),
        slack_path_length(config, act), config.node_masses_g(), want_grad=False)
    assert e == pytest.approx(energy)
    dof_straight = np.zeros_like(dof)
    gravity_bent = e - elastic - 0.5 * config.tendon_stiffness_n_per_mm * max(
        0.0, path - slack_path_length(config, act)) ** 2
    assert np.isfinite(gravity_bent)
    # elastic part isolated: zero-gravity config makes it exact
    cfg0 = ManipulatorConfig(gravity_m_per_s2=(0.0, 0.0, 0.0))
    e_nograv = total_energy(dof, cfg0, ActuationState(0.0))
    tendon = 0.5 * cfg0.tendon_stiffness_n_per_mm * max(
        0.0, path - slack_path_length(cfg0, act)) ** 2
    assert e_nograv - tendon == pytest.approx(elastic, rel=1e-12)


def test_energy_dimension_mismatch(config):
    with pytest.raises(DimensionMismatch):
        total_energy(np.zeros(5), config, ActuationState(0.0))


def test_gradient_matches_finite_differences(config):
    rng = np.random.default_rng(12)
    act = actuation(80.0, d4=50.0, d7=-30.0)
    theta = np.deg2rad(act.disk_angles_deg)
    l_ref = slack_path_length(config, act) - act.tendon_mm
    masses = config.node_masses_g()
    psi = rng.normal(0.0, 0.04, 3 * config.n_elements)
    _, grad, _ = _energy_and_gradient(psi, config, theta, l_ref, masses)
    h = 1e-6
    for i in rng.choice(len(psi), size=12, replace=False):
        up, dn = psi.copy(), psi.copy()
        up[i] += h
        dn[i] -= h
        eu, _, _ = _energy_and_gradient(up, config, theta, l_ref, masses, want_grad=False)
        ed, _, _ = _energy_and_gradient(dn, config, theta, l_ref, masses, want_grad=False)
        assert grad[i] == pytest.approx((eu - ed) / (2 * h), rel=1e-5, abs=1e-8)


# -------------------------------------------------------------- equilibrium

def test_unloaded_rod_stays_straight():
    cfg = ManipulatorConfig(gravity_m_per_s2=(0.0, 0.0, 0.0))
    report = solve_equilibrium(cfg, ActuationState(0.0))
    assert report.converged
    n_nodes = cfg.n_elements + 1
    expected = np.column_stack([np.zeros(n_nodes), np.zeros(n_nodes),
                                -np.arange(n_nodes) * cfg.element_length_mm])
    assert np.abs(report.shape.dense_curve.points - expected).max() <= 1e-6


def test_symmetric_pull_is_planar(config, solve_cached):
    report = solve_cached(100.0)
    assert report.converged
    assert np.abs(report.shape.dense_curve.points[:, 1]).max() <= 1e-3
    xs = report.shape.dense_curve.points[:, 0]
    assert xs[-1] > 100.0  # bends toward the tendon side


def planar_oracle_centers(config, delta):
    """Independent 2D elastica (angle per element, arc-chord kinematics)."""
    n, length = config.n_elements, config.element_length_mm
    ei = config.bending_stiffness
    kt = config.tendon_stiffness_n_per_mm
    g = abs(config.gravity_m_per_s2[2])
    masses = config.node_masses_g()
    r = config.tendon_hole_radius_mm
    disk_nodes = config.disk_node_indices
    l_ref = config.backbone_length_mm - delta

    def geometry(kappas):
        phi = 0.0
        pts = np.zeros((n + 1, 2))
        phis = np.zeros(n + 1)
        for k in range(n):
            kap = kappas[k]
            if abs(kap) < 1e-12:
                step = np.array([length * np.sin(phi), -length * np.cos(phi)])
            else:
                step = np.array([
                    (np.cos(phi) - np.cos(phi + kap * length)) / kap,
                    -(np.sin(phi + kap * length) - np.sin(phi)) / kap,
                ])
            pts[k + 1] = pts[k] + step
            phi += kap * length
            phis[k + 1] = phi
        return pts, phis

    def energy(kappas):
        pts, phis = geometry(kappas)
        e = 0.5 * length * ei * float(kappas @ kappas)
        e += 1e-3 * g * float(masses @ pts[:, 1])
        holes = [(r, 0.0)]
        for node in disk_nodes:
            holes.append((pts[node, 0] + r * np.cos(phis[node]),
                          pts[node, 1] + r * np.sin(phis[node])))
        holes = np.asarray(holes)
        path = float(np.linalg.norm(np.diff(holes, axis=0), axis=1).sum())
        stretch = path - l_ref
        if stretch > 0:
            e += 0.5 * kt * stretch ** 2
        return e

    res = scipy_minimize(energy, np.zeros(n), method="L-BFGS-B",
                         options=dict(maxiter=20000, ftol=1e-15, gtol=1e-8))
    pts, phis = geometry(res.x)
    centers = pts[np.concatenate(([0], disk_nodes))]
    return centers, phis


def test_planar_oracle_agreement(config, solve_cached):
    centers2d, phis = planar_oracle_centers(config, 100.0)
    report = solve_cached(100.0)
    full = report.shape.disk_centers[:, [0, 2]]
    assert np.abs(full - centers2d).max() <= 1.0
    # monotone tangent-angle progression toward the tendon side
    assert np.all(np.diff(phis) >= -1e-10)


def test_mirror_symmetry(config, solve_cached):
    plus = solve_cached(100.0, actuation(100.0, d4=60.0).disk_angles_deg)
    minus = solve_cached(100.0, actuation(100.0, d4=-60.0).disk_angles_deg)
    mirror = plus.shape.dense_curve.points * np.array([1.0, -1.0, 1.0])
    tol = 10 * max(plus.gradient_inf_norm, model.GRAD_TOL_MJ_PER_RAD)
    assert np.abs(mirror - minus.shape.dense_curve.points).max() <= 1e-3 + tol


def test_energy_consistency_of_report(config, solve_cached):
    act = actuation(100.0, d5=-70.0)
    report = solve_cached(100.0, act.disk_angles_deg)
    assert report.energy_mj == pytest.approx(
        total_energy(report.dof, config, act), abs=1e-9)
    theta = np.deg2rad(act.disk_angles_deg)
    l_ref = slack_path_length(config, act) - act.tendon_mm
    masses = config.node_masses_g()
    psi = report.dof.reshape(-1) * config.element_length_mm
    h = 1e-6
    fd = np.zeros_like(psi)
    for i in range(len(psi)):
        up, dn = psi.copy(), psi.copy()
        up[i] += h
        dn[i] -= h
        eu, _, _ = _energy_and_gradient(up, config, theta, l_ref, masses, want_grad=False)
        ed, _, _ = _energy_and_gradient(dn, config, theta, l_ref, masses, want_grad=False)
        fd[i] = (eu - ed) / (2 * h)
    fd_norm = np.abs(fd).max()
    assert abs(report.gradient_inf_norm - fd_norm) <= 0.1 * max(fd_norm, 1e-4)


def test_inextensibility(config, solve_cached):
    for key in [(100.0, (0.0,) * 9),
                (120.0, actuation(120.0, d5=80.0).disk_angles_deg)]:
        report = solve_cached(*key)
        assert report.shape.dense_curve.length == pytest.approx(560.0, rel=1e-3)


def test_inextensibility_deep_bend_refined():
    # chord sampling undershoots the material arc by (kappa*l)^2/24 per
    # element; the deepest pull needs a finer discretization to stay in bound
    cfg = ManipulatorConfig(elements_per_segment=8)
    report = solve_equilibrium(cfg, actuation(140.0, d5=90.0))
    assert report.converged
    assert report.shape.dense_curve.length == pytest.approx(560.0, rel=1e-3)


def test_repeated_solves_bit_identical(config):
    act = actuation(70.0, d3=20.0)
    a = solve_equilibrium(config, act)
    b = solve_equilibrium(config, act)
    assert np.array_equal(a.shape.dense_curve.points, b.shape.dense_curve.points)
    assert a.energy_mj == b.energy_mj


def test_forward_cache_returns_identical_shape(config):
    cache = WarmStartCache()
    act = actuation(60.0, d6=-40.0)
    s1 = forward(config, act, cache)
    s2 = forward(config, act, cache)
    assert np.array_equal(s1.dense_curve.points, s2.dense_curve.points)


def test_forward_sweep_continuity(config):
    cache = WarmStartCache()
    tips = []
    for deg in np.arange(-90.0, 91.0, 5.0):
        shape = forward(config, actuation(100.0, d4=float(deg)), cache)
        tips.append(shape.disk_centers[-1])
    steps = np.linalg.norm(np.diff(np.asarray(tips), axis=0), axis=1)
    assert steps.max() < 30.0


def test_proximal_disk_behaves_like_base_rotation(config, solve_cached):
    base = solve_cached(100.0).shape.disk_centers
    rot = solve_cached(100.0, actuation(100.0, d2=90.0).disk_angles_deg).shape.disk_centers

    def pair_dists(c, idx):
        return np.array([np.linalg.norm(c[i] - c[j])
                         for k, i in enumerate(idx) for j in idx[k + 1:]])

    distal = [6, 7, 8, 9]
    rel = np.abs(pair_dists(rot, distal) - pair_dists(base, distal)) / pair_dists(base, distal)
    assert rel.max() < 0.15  # distal arm keeps its shape
    assert abs(rot[4][1]) > 10.0  # but its plane swings out


def test_distal_disk_moves_tip_most(config, solve_cached):
    base = solve_cached(100.0).shape.disk_centers
    rot = solve_cached(100.0, actuation(100.0, d8=20.0).disk_angles_deg).shape.disk_centers
    tip_move = np.linalg.norm(rot[9] - base[9])
    assert tip_move > 10.0
    for i in range(1, 7):
        assert np.linalg.norm(rot[i] - base[i]) < 0.35 * tip_move


def test_shape_invariants(config, solve_cached):
    shape = solve_cached(120.0, actuation(120.0, d5=80.0).disk_angles_deg).shape
    assert np.allclose(shape.disk_centers[0], 0.0)
    assert np.allclose(shape.disk_frames[0], np.eye(3))
    gaps = np.linalg.norm(np.diff(shape.disk_centers[1:], axis=0), axis=1)
    assert np.all(gaps <= 70.0 + 1e-9)
    assert np.all(gaps >= 35.0)
    for fr in shape.disk_frames:
        assert np.abs(fr @ fr.T - np.eye(3)).max() <= 1e-9


def test_non_finite_energy_raises():
    cfg = ManipulatorConfig(gravity_m_per_s2=(0.0, 0.0, float("nan")))
    with pytest.raises(NonFiniteEnergy):
        solve_equilibrium(cfg, ActuationState(0.0))


def test_warm_start_dimension_mismatch(config):
    with pytest.raises(DimensionMismatch):
        solve_equilibrium(config, ActuationState(0.0), warm_start=np.zeros(7))
    with pytest.raises(DimensionMismatch):
        total_energy(np.zeros(3 * config.n_elements), config,
                     ActuationState(0.0, (0.0,) * 5))


def test_solver_budget_reports_not_converged(config, monkeypatch):
    monkeypatch.setattr(model, "MAX_ITERATIONS", 2)
    report = solve_equilibrium(config, actuation(100.0, d5=-70.0))
    assert not report.converged  # reported, not raised
    with pytest.raises(SolverNotConverged):
        forward(config, actuation(100.0, d5=-70.0))


def test_concurrent_forward_calls(config):
    cache = WarmStartCache()
    errors = []

    def run(deg):
        try:
            forward(config, actuation(50.0, d5=float(deg)), cache)
        except Exception as exc:  # noqa: BLE001 - collected for the assertion
            errors.append(exc)

    threads = [threading.Thread(target=run, args=(d,)) for d in (10.0, 20.0, 30.0)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
