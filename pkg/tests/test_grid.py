import dataclasses
import itertools

import numpy as np
import pytest

from morphsim.errors import ContiguityFailure, InvalidDesign
from morphsim.grid import (
    EPS_CONTIG,
    GridDesign,
    augment,
    build_graph,
    contiguity_pairs,
    grid_dimension,
    inverse_isometry,
    layout_hash,
    regular_grid,
    transform_design,
    transform_graph,
)
from morphsim.oracle import simulate_oracle


def test_build_graph_topology_counts():
    g = build_graph(regular_grid(50.0))
    assert (g.adjacency != 0).sum() == 24
    assert g.nodes.shape == (9, 28)
    assert g.edges.shape == (12, 52)
    degrees = sorted(np.count_nonzero(g.adjacency, axis=0).tolist())
    assert degrees == [2, 2, 2, 2, 3, 3, 3, 3, 4]


def test_build_graph_zero_actuators_zero_stress():
    g = build_graph(regular_grid(50.0, 0.0))
    assert g.edges[:, 36:48].shape == (12, 12)
    assert np.all(g.edges[:, 36:48] == 0.0)


def test_build_graph_fixed_joint_center_is_origin():
    g = build_graph(regular_grid(50.0))
    fixed_mask = g.nodes[:, 27] == 1.0
    assert int(fixed_mask.sum()) == 1
    assert np.allclose(g.nodes[fixed_mask, 24:27], 0.0)


def test_build_graph_deterministic(jittered_design):
    g1 = build_graph(jittered_design)
    g2 = build_graph(jittered_design)
    assert np.array_equal(g1.nodes, g2.nodes)
    assert np.array_equal(g1.edges, g2.edges)
    assert np.array_equal(g1.adjacency, g2.adjacency)


def _brute_force_coincidences(graph):
    """Independent oracle: every edge end corner within EPS of a node corner."""
    node_verts = graph.node_verts().reshape(-1, 3)
    edge_verts = graph.edge_verts()
    found = set()
    for e in range(12):
        for c in list(range(4)) + list(range(8, 12)):
            p = edge_verts[e, c]
            for k in range(72):
                if np.linalg.norm(node_verts[k] - p) <= EPS_CONTIG:
                    found.add((k, 72 + e * 12 + c))
    return found


def test_contiguity_pairs_count_and_set(jittered_design):
    g = build_graph(jittered_design)
    pairs = contiguity_pairs(g)
    assert len(pairs) == 96  # 12 beams x 2 ends x 4 corners
    assert set(map(tuple, pairs.pairs.tolist())) == _brute_force_coincidences(g)
    assert pairs.distances(g).max() == 0.0


def test_contiguity_invariant_under_rigid_transform(jittered_design):
    # matching is distance-based, so any raw isometry of the coordinates
    # (slots untouched) leaves the pair set unchanged
    g = build_graph(jittered_design)
    base = set(map(tuple, contiguity_pairs(g).pairs.tolist()))
    ang = 0.53
    rot = np.array(
        [
            [np.cos(ang), -np.sin(ang), 0.0],
            [np.sin(ang), np.cos(ang), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    shift = np.array([4.0, -2.0, 1.5])
    tg = g.copy()
    for sl in (slice(0, 24), slice(24, 27)):
        tg.nodes[:, sl] = (g.nodes[:, sl].reshape(9, -1, 3) @ rot.T + shift).reshape(9, -1)
    for sl in (slice(0, 36), slice(49, 52)):
        tg.edges[:, sl] = (g.edges[:, sl].reshape(12, -1, 3) @ rot.T + shift).reshape(12, -1)
    assert set(map(tuple, contiguity_pairs(tg).pairs.tolist())) == base


def test_contiguity_failure_on_displaced_endpoint():
    g = build_graph(regular_grid(50.0))
    g.edges[3, 0:3] += np.array([1.0, 0.0, 0.0])  # push one corner 1 mm off
    with pytest.raises(ContiguityFailure):
        contiguity_pairs(g)


def test_grid_dimension_regular():
    g = build_graph(regular_grid(50.0))
    assert grid_dimension(g) == pytest.approx(50.0 * np.sqrt(2.0), rel=1e-12)
    assert grid_dimension(g) > 0.0


def test_degenerate_positions_rejected():
    base = regular_grid(50.0)
    joints = list(base.joints)
    joints[0] = dataclasses.replace(joints[0], x=joints[1].x, y=joints[1].y)
    with pytest.raises(InvalidDesign):
        GridDesign(joints=tuple(joints), beams=base.beams).validate()


def test_augment_identity(jittered_design):
    traj = simulate_oracle(jittered_design)
    out = augment(traj, 0, False)
    for f1, f2 in zip(traj.frames, out.frames):
        assert np.array_equal(f1.nodes, f2.nodes)
        assert np.array_equal(f1.edges, f2.edges)
        assert np.array_equal(f1.adjacency, f2.adjacency)


def test_augment_group_size(jittered_design):
    g = build_graph(jittered_design)
    images = set()
    for k, m in itertools.product(range(4), (False, True)):
        images.add(transform_graph(g, k, m).nodes.tobytes())
    assert len(images) == 8


def test_augment_roundtrip_inverse(jittered_design):
    g = build_graph(jittered_design)
    for k, m in itertools.product(range(4), (False, True)):
        ki, mi = inverse_isometry(k, m)
        back = transform_graph(transform_graph(g, k, m), ki, mi)
        assert np.abs(back.nodes - g.nodes).max() < 1e-9
        assert np.abs(back.edges - g.edges).max() < 1e-9


def test_augment_matches_transformed_design(jittered_design):
    # the augmented graph is exactly the graph of the transformed design
    g = build_graph(jittered_design)
    for k, m in itertools.product(range(4), (False, True)):
        direct = build_graph(transform_design(jittered_design, k, m))
        via = transform_graph(g, k, m)
        assert np.abs(direct.nodes - via.nodes).max() < 1e-9
        assert np.abs(direct.edges - via.edges).max() < 1e-9
        assert np.array_equal(direct.adjacency, via.adjacency)


def test_vertex_metric_invariant_under_augmentation(jittered_design):
    # mean vertex distance between two frames is preserved by augmentation
    traj = simulate_oracle(jittered_design)
    a, b = traj.frames[0], traj.frames[10]
    metric = np.linalg.norm(a.all_vertices() - b.all_vertices(), axis=1).mean()
    ta = augment(traj, 3, True)
    metric_aug = np.linalg.norm(
        ta.frames[0].all_vertices() - ta.frames[10].all_vertices(), axis=1
    ).mean()
    assert metric_aug == pytest.approx(metric, abs=1e-9)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: GridDesign(joints=d.joints, beams=d.beams[:11]),  # 11 beams
        lambda d: GridDesign(  # two fixed joints
            joints=tuple(dataclasses.replace(j, fixed=True) for j in d.joints[:2])
            + d.joints[2:],
            beams=d.beams,
        ),
        lambda d: GridDesign(  # duplicate beam
            joints=d.joints,
            beams=d.beams[:11] + (dataclasses.replace(d.beams[0], id=11),),
        ),
        lambda d: GridDesign(  # non-neighbor beam
            joints=d.joints,
            beams=d.beams[:11] + (dataclasses.replace(d.beams[11], a=0, b=8),),
        ),
        lambda d: GridDesign(  # actuator out of range
            joints=d.joints,
            beams=d.beams[:11] + (dataclasses.replace(d.beams[11], actuator=1.5),),
        ),
    ],
)
def test_invalid_designs_rejected(mutate):
    with pytest.raises(InvalidDesign):
        mutate(regular_grid(50.0)).validate()


def test_design_json_roundtrip(jittered_design):
    text = jittered_design.to_json()
    back = GridDesign.from_json(text)
    assert back == jittered_design
    assert back.to_json() == text


def test_layout_hash_stable():
    assert layout_hash() == layout_hash()
    assert len(layout_hash()) == 16
