import csv
import math

import numpy as np
import pytest

from monoped_codesign import codesign as cd
from monoped_codesign import sim
from monoped_codesign.controller import ControlParams
from monoped_codesign.fivebar import LegGeometry, forward_kinematics, inverse_kinematics, jacobian

NOMINAL_CTRL = ControlParams(197.4, 7.7, 11.0, 4.2, 1.5)


@pytest.fixture(scope="module")
def design(nominal_design):
    return nominal_design


def _state_in_air(design, foot, base_vel=(0.0, 0.0), joint_vel=(0.0, 0.0), z=1.0):
    th = inverse_kinematics(design.geom, foot)
    return sim.SimState((0.0, z, *th), (*base_vel, *joint_vel))


def _momentum_x(state, design, h=1e-3):
    # kinetic energy is quadratic in the velocities, so this difference is exact
    def ke(vx):
        q_dot = (vx, *state.q_dot[1:])
        return sim.mechanical_energy(sim.SimState(state.q, q_dot, passive=state.passive,
                                                  passive_dot=state.passive_dot), design)[0]
    vx = state.q_dot[0]
    return (ke(vx + h) - ke(vx - h)) / (2 * h)


# ---------------------------------------------------------------- single steps

def test_ballistic_oracle(design):
    v0 = (0.7, 2.0)
    s = _state_in_air(design, (0.02, -0.35), v0)
    for _ in range(200):
        s = sim.step(s, (0.0, 0.0), design)
    t = 0.2
    assert s.time == pytest.approx(t)
    assert abs(s.q[0] - v0[0] * t) <= 1e-5
    assert abs(s.q[1] - (1.0 + v0[1] * t - 0.5 * sim.GRAVITY * t * t)) <= 1e-5
    # zero joint rates and uniform gravity: no internal motion, base x-rate exact
    assert abs(s.q_dot[0] - v0[0]) <= 1e-6


def test_flight_energy_and_momentum(design):
    s = _state_in_air(design, (0.02, -0.35), (0.3, 1.0), (15.0, -9.0), z=2.0)
    e0 = sum(sim.mechanical_energy(s, design))
    p0 = _momentum_x(s, design)
    worst_e = worst_p = worst_c = 0.0
    for _ in range(500):
        s = sim.step(s, (0.0, 0.0), design)
        worst_e = max(worst_e, abs(sum(sim.mechanical_energy(s, design)) - e0) / abs(e0))
        worst_p = max(worst_p, abs(_momentum_x(s, design) - p0))
        worst_c = max(worst_c, sim.closure_residual(s, design))
    assert not s.in_contact
    assert worst_e <= 1e-3
    assert worst_p <= 1e-6 * max(1.0, abs(p0))
    assert worst_c <= 1e-9


def test_zero_dt_is_identity(design):
    s = _state_in_air(design, (0.02, -0.35), (0.3, 1.0), (1.0, -2.0))
    s2 = sim.step(s, (3.0, -1.0), design, dt=0.0)
    assert s2.q == pytest.approx(s.q, abs=1e-15)
    assert s2.q_dot == pytest.approx(s.q_dot, abs=1e-15)


def test_negative_dt_rejected(design):
    with pytest.raises(ValueError):
        sim.step(sim.initial_state(design), (0, 0), design, dt=-1e-3)


def _static_torques(design, q):
    """Hip torques holding the leg still with the whole weight on the foot.

    Q = dV/dq must be balanced by the ground force W = M g at the foot and
    the hip torques: tau = dV/dtheta - J^T (0, W)."""
    def V(q):
        return sim.mechanical_energy(sim.SimState(tuple(q), (0.0,) * 4), design)[1]
    h = 1e-6
    dV = np.array([(V(q + h * e) - V(q - h * e)) / (2 * h) for e in np.eye(4)])
    leg = forward_kinematics(design.geom, q[2], q[3])
    J = jacobian(design.geom, leg)
    return dV, dV[2:] - J.T @ np.array([0.0, design.total_mass * sim.GRAVITY])


def test_static_stand(design):
    M = design.total_mass
    k, _ = sim.ContactParams().gains(M)
    th = inverse_kinematics(design.geom, (0.0, -0.4))
    leg = forward_kinematics(design.geom, *th)
    pen = M * sim.GRAVITY / k
    z0 = -leg.foot[1] - pen
    q = np.array([-leg.foot[0], z0, *th])
    dV, tau = _static_torques(design, q)
    assert dV[1] == pytest.approx(M * sim.GRAVITY, rel=1e-6)  # oracle sanity: weight
    s = sim.SimState(tuple(q), (0.0,) * 4)
    zs, normal = [], []
    prev = None
    for _ in range(1000):
        s = sim.step(s, tuple(tau), design)
        zs.append(s.q[1])
        foot = np.array(s.foot_world)
        vel = (0.0, 0.0) if prev is None else tuple((foot - prev) / sim.DT)
        prev = foot
        normal.append(sim.contact_force(s.foot_world, vel, M)[1])
    assert max(abs(z - z0) for z in zs) < 1e-4
    assert np.mean(normal) == pytest.approx(M * sim.GRAVITY, rel=1e-3)


# ---------------------------------------------------------------- contact law

def test_contact_force_law():
    M = 3.0
    k, c = sim.ContactParams().gains(M)
    assert k == 5000 * M and c == pytest.approx(2 * math.sqrt(k * M))
    assert sim.contact_force((0.0, 0.01), (1.0, -1.0), M) == (0.0, 0.0, False)
    Ft, N, on = sim.contact_force((0.0, -0.001), (0.0, 0.0), M)
    assert on and N == pytest.approx(k * 0.001) and Ft == 0.0
    Ft, N, _ = sim.contact_force((0.0, -0.001), (0.5, -0.2), M)
    assert N == pytest.approx(k * 0.001 + c * 0.2)
    assert Ft == pytest.approx(-0.8 * N)
    Ft, N, _ = sim.contact_force((0.0, -0.001), (-0.5e-3, 0.0), M)
    assert Ft == pytest.approx(0.8 * N * 0.5)  # viscous below the slip speed
    # separating fast: the damper cannot pull
    assert sim.contact_force((0.0, -0.0001), (0.0, 5.0), M)[1] == pytest.approx(k * 0.0001)


def test_contact_params_validation():
    with pytest.raises(ValueError):
        sim.ContactParams(friction=-0.1)
    assert sim.ContactParams.from_dict({"friction": 0.5}).friction == 0.5


# ---------------------------------------------------------------- rollouts

def test_nominal_rollout_completes(design):
    r = sim.rollout(design, NOMINAL_CTRL)
    assert r.status == "completed"
    assert r.distance_x > 0
    assert r.liftoff_time < r.touchdown_time
    assert r.energy > 0
    assert len(r.trajectory) == r.steps


def test_rollout_log_invariants(design):
    r = sim.rollout(design, NOMINAL_CTRL)
    tr = r.trajectory
    assert np.all(tr["F_n"] >= 0)
    assert np.all(tr["closure_residual"] <= 1e-9)
    assert np.all(tr["F_n"][tr["contact"] == 0] == 0)
    peak_l, peak_r = design.act_l.peak_output_torque, design.act_r.peak_output_torque
    assert np.all(np.abs(tr["applied_l"]) <= peak_l + 1e-12)
    assert np.all(np.abs(tr["applied_r"]) <= peak_r + 1e-12)
    flight = tr["time"] >= r.liftoff_time
    assert np.all(tr["applied_l"][flight] == 0) and np.all(tr["applied_r"][flight] == 0)


def test_rollout_energy_matches_log(design):
    r = sim.rollout(design, NOMINAL_CTRL)
    assert abs(sim.trajectory_energy(r, design) - r.energy) <= 1e-9


def test_rollout_deterministic(design):
    a = sim.rollout(design, NOMINAL_CTRL)
    b = sim.rollout(design, NOMINAL_CTRL)
    assert (a.distance_x, a.energy, a.steps, a.status) == (b.distance_x, b.energy, b.steps, b.status)
    assert np.array_equal(a.trajectory.data, b.trajectory.data)
    c = sim.rollout(design, NOMINAL_CTRL, record=False)
    assert (c.distance_x, c.energy) == (a.distance_x, a.energy)


def test_passive_leg_does_not_jump(design):
    r = sim.rollout(design, ControlParams(K=0.0, C=0.0, T=0.0, l0=0.3, alpha0=0.0))
    assert r.status == "no_liftoff"
    assert r.distance_x == 0.0 and r.energy == 0.0


def test_vertical_hop_of_symmetric_leg(table):
    v = cd.CodesignVariables(**{**cd.NOMINAL.__dict__, "l3": 0.05})
    d = cd.build_design(v, table)
    d = sim.RobotDesign(LegGeometry(d.geom.l1, d.geom.l2, 0.0), d.act_l, d.act_l,
                        d.base_chassis_mass, d.link_masses, d.z0)
    r = sim.rollout(d, ControlParams(500.0, 2.0, 20.0, 3.0, 0.0))
    assert r.status == "completed"
    assert abs(r.distance_x) <= 1e-3


def test_unreachable_start_is_reported(design):
    far = sim.RobotDesign(design.geom, design.act_l, design.act_r, design.base_chassis_mass,
                          design.link_masses, design.geom.l1 + design.geom.l2)
    r = sim.rollout(far, NOMINAL_CTRL)
    assert r.status == "no_liftoff" and "unreachable" in r.detail


def test_random_designs_never_fail(table):
    rng = np.random.default_rng(11)
    statuses = []
    for _ in range(150):
        y = rng.uniform(size=13)
        v = cd.decode(y, cd.CASES["c"], table)
        ev = cd.evaluate(v, table, record=True)
        if ev.result is None:
            continue
        statuses.append(ev.result.status)
        tr = ev.result.trajectory
        if tr is not None and len(tr):
            assert np.all(tr["F_n"] >= 0)
            assert np.all(tr["closure_residual"] <= 1e-9)
    assert "sim_failure" not in statuses
    assert statuses.count("completed") > 30


def test_trajectory_csv(tmp_path, design):
    r = sim.rollout(design, NOMINAL_CTRL)
    n = sim.write_trajectory_csv(tmp_path / "t.csv", r)
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(sim.CSV_COLUMNS)
    assert n == r.steps == len(rows) - 1
    with pytest.raises(ValueError):
        sim.write_trajectory_csv(tmp_path / "u.csv", sim.rollout(design, NOMINAL_CTRL, record=False))


# ---------------------------------------------------------------- energy accounting

def test_accumulate_energy_cases():
    assert sim.accumulate_energy((1.0, 1.0), [[2.0, 0.0]], [[3.0, 0.0]], 0.001) == pytest.approx(0.006)
    tau = np.array([[1.0, -2.0], [-1.0, 0.0]])
    omega = np.array([[-1.0, 3.0], [2.0, 5.0]])
    assert sim.accumulate_energy((0.9, 0.9), tau, omega, 0.001) == 0.0
    with pytest.raises(ValueError):
        sim.accumulate_energy((1.0, 1.0), np.zeros((3, 2)), np.zeros((4, 2)), 0.001)


def test_accumulate_energy_against_loop():
    rng = np.random.default_rng(0)
    tau, omega = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
    eta = (0.93, 0.87)
    expected = 0.0
    for i in range(500):
        for j in range(2):
            if tau[i, j] * omega[i, j] > 0:
                expected += eta[j] * tau[i, j] * omega[i, j] * 1e-3
    assert sim.accumulate_energy(eta, tau, omega, 1e-3) == pytest.approx(expected, abs=1e-12)


def test_design_validation(design):
    with pytest.raises(ValueError):
        sim.RobotDesign(design.geom, design.act_l, design.act_r, 1.0, design.link_masses, -0.1)
    with pytest.raises(ValueError):
        sim.RobotDesign(design.geom, design.act_l, design.act_r, 1.0, (0.1, 0.1, 0.1), 0.3)
    expected = 1.0 + design.act_l.total_mass + design.act_r.total_mass + sum(design.link_masses)
    assert design.total_mass == pytest.approx(expected)
