import itertools

import numpy as np
import pytest

from morphsim.errors import OracleDiverged
from morphsim.grid import (
    NODE_CENTER_SLICE,
    augment,
    contiguity_pairs,
    regular_grid,
    transform_design,
)
from morphsim.oracle import (
    OracleConfig,
    end_to_end_angle,
    free_beam_network,
    run_stage1,
    simulate_oracle,
    simulate_oracle_batch,
    stage2_creep,
)


def test_zero_actuators_all_frames_identical():
    traj = simulate_oracle(regular_grid(50.0, 0.0), OracleConfig(gravity=(0.0, 0.0, 0.0)))
    assert len(traj.frames) == 12
    for f in traj.frames[1:]:
        assert np.abs(f.nodes - traj.frames[0].nodes).max() < 1e-9
        assert np.abs(f.edges - traj.frames[0].edges).max() < 1e-9


def test_free_beam_reaches_analytic_angle():
    # kappa_max * a * L = 1.95 deg/mm * 1.0 * 46.15 mm = 90 degrees
    net = free_beam_network(46.15, 1.0)
    state = run_stage1(net)
    angle = end_to_end_angle(state)
    assert angle == pytest.approx(90.0, rel=0.02)
    assert net.stretch_violation(state)[0] < 0.01


def test_frame_count_and_stress_schedule(jittered_design):
    traj = simulate_oracle(jittered_design)
    assert len(traj.frames) == 12  # 1 initial + 10 release + 1 creep
    acts = jittered_design.actuators()
    for t in range(11):
        expected = (1.0 - t / 10.0) * acts[:, None] * 1.95
        assert np.abs(traj.frames[t].edges[:, 36:48] - expected).max() < 1e-12
    assert np.all(traj.frames[11].edges[:, 36:48] == 0.0)


def test_stress_monotone_nonincreasing(jittered_design):
    traj = simulate_oracle(jittered_design)
    stress = np.stack([f.edges[:, 36:48] for f in traj.frames])
    assert np.all(stress >= 0.0)
    assert np.all(np.diff(stress, axis=0) <= 1e-12)


def test_stage2_zero_gravity_noop(jittered_design):
    cfg = OracleConfig(gravity=(0.0, 0.0, 0.0))
    from morphsim.oracle import BeamNetwork

    net = BeamNetwork([jittered_design], cfg)
    state = run_stage1(net)
    out = stage2_creep(state, cfg, net=net)
    assert np.array_equal(out.positions, state.positions)


def test_creep_sags_free_joints_down():
    traj = simulate_oracle(regular_grid(50.0, 0.0))
    centers = traj.frames[11].nodes[:, NODE_CENTER_SLICE]
    fixed = traj.frames[11].nodes[:, 27] == 1.0
    assert np.all(centers[~fixed, 2] < 0.0)
    assert np.allclose(centers[fixed, 2], 0.0, atol=1e-12)


def test_creep_scale_monotonicity():
    design = regular_grid(50.0, 0.5)
    sags = []
    for scale in (2.0, 4.0, 8.0):
        traj = simulate_oracle(design, OracleConfig(creep_compliance_scale=scale))
        dz = np.abs(
            traj.frames[11].nodes[:, NODE_CENTER_SLICE][:, 2]
            - traj.frames[10].nodes[:, NODE_CENTER_SLICE][:, 2]
        )
        free = traj.frames[10].nodes[:, 27] == 0.0
        sags.append(dz[free].mean())
    assert sags[0] <= sags[1] + 1e-9
    assert sags[1] <= sags[2] + 1e-9


def test_determinism_bit_identical(jittered_design):
    t1 = simulate_oracle(jittered_design)
    t2 = simulate_oracle(jittered_design)
    for f1, f2 in zip(t1.frames, t2.frames):
        assert np.array_equal(f1.nodes, f2.nodes)
        assert np.array_equal(f1.edges, f2.edges)


def test_equivariance_under_isometries(jittered_design):
    base = simulate_oracle(jittered_design)
    worst = 0.0
    for k, m in itertools.product(range(4), (False, True)):
        expected = augment(base, k, m)
        actual = simulate_oracle(transform_design(jittered_design, k, m))
        for f1, f2 in zip(expected.frames, actual.frames):
            worst = max(
                worst,
                np.abs(f1.nodes - f2.nodes).max(),
                np.abs(f1.edges - f2.edges).max(),
            )
            assert np.array_equal(f1.adjacency, f2.adjacency)
    assert worst < 1e-6


def test_junctions_never_dislocate(jittered_design):
    traj = simulate_oracle(jittered_design)
    pairs = contiguity_pairs(traj.frames[0])
    for f in traj.frames:
        assert pairs.distances(f).max() < 1e-6


def test_stage1_deflection_monotone_without_gravity(jittered_design):
    traj = simulate_oracle(jittered_design, OracleConfig(gravity=(0.0, 0.0, 0.0)))
    totals = [np.abs(f.nodes[:, NODE_CENTER_SLICE][:, 2]).sum() for f in traj.frames[:11]]
    assert all(b >= a - 1e-9 for a, b in zip(totals, totals[1:]))


def test_divergence_reports_frame_index():
    # an absurd creep step tears the structure apart in stage 2
    cfg = OracleConfig(gravity_dt=1.0)
    with pytest.raises(OracleDiverged) as err:
        simulate_oracle(regular_grid(50.0, 0.5), cfg)
    assert err.value.frame == 11


def test_batch_matches_single(jittered_design):
    designs = [regular_grid(50.0, 0.5), jittered_design, regular_grid(45.0, 1.0)]
    batch, failures = simulate_oracle_batch(designs)
    assert failures == []
    single = simulate_oracle(designs[1])
    for f1, f2 in zip(single.frames, batch[1].frames):
        assert np.array_equal(f1.nodes, f2.nodes)
        assert np.array_equal(f1.edges, f2.edges)


def test_batch_divergence_isolated():
    cfg = OracleConfig(gravity_dt=1.0)
    designs = [regular_grid(50.0, 0.5), regular_grid(45.0, 0.25)]
    trajectories, failures = simulate_oracle_batch(designs, cfg)
    assert len(failures) == 2
    assert all(t is None for t in trajectories)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(segments_per_beam=7).validate()
    with pytest.raises(ValueError):
        OracleConfig(bend_stiffness=0.0).validate()
    with pytest.raises(ValueError):
        OracleConfig(creep_compliance_scale=0.5).validate()
