"""Acceptance suite: one test per release criterion.

The trained-model criteria share a pipeline of cached artifacts (dataset,
splits, checkpoints, reports) under tests/_acceptance_cache; delete that
directory to rebuild everything from scratch.  Criteria that need no
training run standalone.  Expect the first full run to take on the order of
an hour on a small CPU box; later runs reuse the cache.
"""

import dataclasses
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from morphsim import dataset as ds
from morphsim import training as tr
from morphsim.designops import TargetSpec, inverse_optimize, neighborhood
from morphsim.grid import (
    NODE_CENTER_SLICE,
    augment,
    build_graph,
    contiguity_pairs,
    regular_grid,
    transform_design,
)
from morphsim.model import build_engine, gather_pairs, load_model, save_model
from morphsim.normalize import ROLE_LAYOUTS
from morphsim.oracle import OracleConfig, end_to_end_angle, free_beam_network, run_stage1, simulate_oracle
from morphsim.training import Hyperparams, evaluate, train

CACHE = Path(__file__).parent / "_acceptance_cache"

# frozen pipeline configuration; changing any value invalidates the cache
DATASET_N = 2000
DATASET_SEED = 1000
TEST_COUNT = 400

HP_MAIN = Hyperparams(
    a=1.0,
    gamma=0.1,
    learning_rate=3e-4,
    batch_size=16,
    epochs=24,
    creep_epochs=16,
    seed=11,
    latent=32,
    hidden=(128, 64, 32, 16, 8),
    cutoff=0.999,
)
# ablations run on a reduced budget: relative comparisons, same seed/budget
ABLATION_SIZE = 400
ABLATION_EPOCHS = 18


def _cache_key() -> str:
    import hashlib

    desc = json.dumps(
        {
            "n": DATASET_N,
            "seed": DATASET_SEED,
            "test": TEST_COUNT,
            "hp": HP_MAIN.to_dict(),
            "ablation": [ABLATION_SIZE, ABLATION_EPOCHS],
            "oracle": OracleConfig().to_dict(),
        },
        sort_keys=True,
    )
    return hashlib.sha256(desc.encode()).hexdigest()[:12]


@pytest.fixture(scope="session")
def pipeline():
    """Dataset, trained models, and eval reports, cached across runs."""
    CACHE.mkdir(exist_ok=True)
    key = _cache_key()
    root = CACHE / key
    root.mkdir(exist_ok=True)

    data_path = root / "dataset.bin"
    if not data_path.exists():
        t0 = time.time()
        data = ds.generate_dataset(
            n=DATASET_N, seed=DATASET_SEED, batch_size=25, workers=2, log=print
        )
        data.save(data_path)
        print(f"dataset: {time.time()-t0:.0f}s")
    data = ds.Dataset.load(data_path)
    train_set, test_set = ds.split_dataset(data, test_count=TEST_COUNT)

    def get_model(name: str, hp: Hyperparams):
        path = root / f"{name}.ckpt"
        if not path.exists():
            t0 = time.time()
            model, history = train(train_set, hp, log=lambda m: print(f"[{name}] {m}"))
            model.meta["dataset_stats"] = ds.dataset_stats(train_set).to_dict()
            save_model(model, path)
            (root / f"{name}.history.json").write_text(json.dumps(history))
            print(f"{name}: trained in {time.time()-t0:.0f}s")
        return load_model(path)

    def get_report(name: str, model) -> tr.EvalReport:
        path = root / f"{name}.report.json"
        if not path.exists():
            report = evaluate(model, test_set)
            path.write_text(json.dumps(report.to_dict()))
            return report
        d = json.loads(path.read_text())
        d.pop("reference_points", None)
        return tr.EvalReport(**{k: v for k, v in d.items() if k != "extra"})

    main_model = get_model("main", HP_MAIN)
    main_report = get_report("main", main_model)

    hp_abl = dataclasses.replace(
        HP_MAIN, dataset_size=ABLATION_SIZE, epochs=ABLATION_EPOCHS, creep_epochs=12
    )
    abl_a1 = get_model("abl_a1", hp_abl)
    abl_a0 = get_model("abl_a0", dataclasses.replace(hp_abl, a=0.0))
    abl_g0 = get_model("abl_g0", dataclasses.replace(hp_abl, gamma=0.0))

    return {
        "train": train_set,
        "test": test_set,
        "main": main_model,
        "main_report": main_report,
        "abl_a1": abl_a1,
        "abl_a0": abl_a0,
        "abl_g0": abl_g0,
        "reports": get_report,
        "root": root,
    }


# -- criterion 1: gradient correctness -----------------------------------------


def test_c01_gradient_correctness(small_dataset):
    """Every tiny-engine parameter gradient matches central differences."""
    t_start = time.time()
    norms = ds.fit_normalizers(small_dataset, cutoff=0.98, augment_all=False)

    traj = small_dataset.trajectories[0]
    nodes, edges = traj.frames[0].nodes, traj.frames[0].edges
    t_nodes, t_edges = traj.frames[1].nodes, traj.frames[1].edges
    tables = gather_pairs(traj.frames[0].adjacency)
    pairs = contiguity_pairs(traj.frames[0])
    pair_index = tr._flat_pair_index([pairs], 1)

    def build(seed):
        eng = build_engine(norms, latent=4, hidden=(8, 4), seed=seed)
        for p in eng.parameters():
            p.data = p.data.astype(np.float64)
        return eng

    def loss_of(eng):
        total, _, _ = tr._batch_loss_tensors(
            eng, norms, nodes, edges, t_nodes, t_edges, tables, pair_index, 1, a=1.0
        )
        return total

    # pick a seed whose ReLU pre-activations keep a safe margin from the
    # finite-difference step, so the loss is smooth on the probed interval
    h = 1e-4
    engine = None
    for seed in range(50):
        cand = build(seed)
        margin = np.inf
        for net in (cand.in1, cand.in2):
            for mlp in net.mlps().values():
                # probe margins with the actual forward activations
                pass
        # cheap margin probe: perturbing the loss twice and checking smoothness
        # is unreliable; instead check pre-activation magnitudes directly
        margin = _min_preactivation(cand, norms, nodes, edges, tables)
        if margin > 50 * h:
            engine = cand
            break
    assert engine is not None, "no kink-free seed found"

    loss_t = loss_of(engine)
    loss_t.backward()
    params = engine.parameters()
    checked = 0
    worst = 0.0
    for p in params:
        flat = p.data.ravel()
        grads = p.grad.ravel() if p.grad is not None else np.zeros(flat.size)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = float(loss_of(engine).data)
            flat[i] = old - h
            lm = float(loss_of(engine).data)
            flat[i] = old
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(grads[i]), 1e-6)
            worst = max(worst, abs(fd - grads[i]) / denom)
            checked += 1
    elapsed = time.time() - t_start
    print(f"\nC1 gradient check: {checked} parameters, worst rel err {worst:.2e}, {elapsed:.0f}s")
    assert worst < 1e-4
    assert elapsed < 60.0


def _min_preactivation(engine, norms, nodes, edges, tables) -> float:
    """Smallest |pre-activation| across all ReLU layers of both INs."""
    from morphsim.model import engine_forward

    margin = [np.inf]

    import morphsim.nn as nnmod

    orig_relu = nnmod.relu

    def probed(t):
        margin[0] = min(margin[0], float(np.abs(t.data).min()))
        return orig_relu(t)

    nnmod.relu = probed
    try:
        engine_forward(engine, norms, nodes, edges, tables)
    finally:
        nnmod.relu = orig_relu
    return margin[0]


# -- criterion 2: oracle analytic check ----------------------------------------


def test_c02_oracle_analytic_beam():
    net = free_beam_network(46.15, 1.0)
    state = run_stage1(net)
    angle = end_to_end_angle(state)
    print(f"\nC2 free beam: {angle:.3f} deg (target 90 +- 2%)")
    assert angle == pytest.approx(90.0, rel=0.02)
    traj = simulate_oracle(regular_grid(50.0, 0.5))
    assert len(traj.frames) == 1 + 10 + 1


# -- criterion 3: equivariance suite --------------------------------------------


def test_c03_equivariance_oracle(jittered_design):
    base = simulate_oracle(jittered_design)
    worst = 0.0
    for k, m in itertools.product(range(4), (False, True)):
        expected = augment(base, k, m)
        actual = simulate_oracle(transform_design(jittered_design, k, m))
        for f1, f2 in zip(expected.frames, actual.frames):
            worst = max(worst, np.abs(f1.nodes - f2.nodes).max(), np.abs(f1.edges - f2.edges).max())
    print(f"\nC3 oracle equivariance: worst {worst:.2e} mm (< 1e-6)")
    assert worst < 1e-6


def test_c03_equivariance_surrogate(pipeline, jittered_design):
    model = pipeline["main"]
    base = model.rollout(build_graph(jittered_design))
    worst = 0.0
    for k, m in itertools.product(range(4), (False, True)):
        expected = augment(base, k, m)
        actual = model.rollout(build_graph(transform_design(jittered_design, k, m)))
        for f1, f2 in zip(expected.frames, actual.frames):
            worst = max(worst, np.abs(f1.nodes - f2.nodes).max(), np.abs(f1.edges - f2.edges).max())
    print(f"\nC3 surrogate equivariance: worst {worst:.2e} mm (< 1e-3)")
    assert worst < 1e-3


def test_c03_permutation_relabeling(pipeline, jittered_design):
    model = pipeline["main"]
    perm_j = {0: 2, 1: 5, 2: 8, 3: 1, 4: 4, 5: 7, 6: 0, 7: 3, 8: 6}
    perm_b = {i: (i * 5 + 3) % 12 for i in range(12)}
    relabeled = dataclasses.replace(
        jittered_design,
        joints=tuple(dataclasses.replace(j, id=perm_j[j.id]) for j in jittered_design.joints),
        beams=tuple(
            dataclasses.replace(b, id=perm_b[b.id], a=perm_j[b.a], b=perm_j[b.b])
            for b in jittered_design.beams
        ),
    )
    t1 = model.rollout(build_graph(jittered_design))
    t2 = model.rollout(build_graph(relabeled))
    worst = 0.0
    for f1, f2 in zip(t1.frames, t2.frames):
        for i in range(9):
            worst = max(worst, np.abs(f2.nodes[perm_j[i]] - f1.nodes[i]).max())
        for e in range(12):
            worst = max(worst, np.abs(f2.edges[perm_b[e]] - f1.edges[e]).max())
    print(f"\nC3 permutation relabeling: worst {worst:.2e} mm (< 1e-9)")
    assert worst < 1e-9


# -- criterion 4: learning acceptance -------------------------------------------


def test_c04_learning_acceptance(pipeline):
    report = pipeline["main_report"]
    rel = report.mean_relative_error
    ratio = report.mean_vertex_error_mm / report.baseline_mean_error_mm
    print(
        f"\nC4 held-out final-frame error: {report.mean_vertex_error_mm:.3f} mm "
        f"({100*rel:.2f}% of dimension, {100*ratio:.1f}% of identity baseline)"
    )
    assert report.n_trajectories == TEST_COUNT
    assert rel <= 0.05
    assert ratio <= 0.25


# -- criterion 5: dislocation penalty effect -------------------------------------


def test_c05_dislocation_penalty(pipeline):
    rep_a1 = pipeline["reports"]("abl_a1", pipeline["abl_a1"])
    rep_a0 = pipeline["reports"]("abl_a0", pipeline["abl_a0"])
    print(
        f"\nC5 dislocation: a=1 {rep_a1.mean_dislocation_mm:.3f} mm vs "
        f"a=0 {rep_a0.mean_dislocation_mm:.3f} mm"
    )
    assert rep_a1.mean_dislocation_mm <= 0.5 * rep_a0.mean_dislocation_mm


# -- criterion 6: noise injection effect -----------------------------------------


def test_c06_noise_injection(pipeline):
    rep_g1 = pipeline["reports"]("abl_a1", pipeline["abl_a1"])  # gamma = 0.1
    rep_g0 = pipeline["reports"]("abl_g0", pipeline["abl_g0"])
    print(
        f"\nC6 rollout error: gamma=0.1 {rep_g1.mean_vertex_error_mm:.3f} mm vs "
        f"gamma=0 {rep_g0.mean_vertex_error_mm:.3f} mm"
    )
    assert rep_g1.mean_vertex_error_mm <= rep_g0.mean_vertex_error_mm


# -- criterion 7: normalization ---------------------------------------------------


def test_c07_normalization(pipeline):
    from tests.test_dataset import collect_role_inputs

    sample = ds.Dataset(pipeline["train"].trajectories[:24], {})
    norms = ds.fit_normalizers(sample, cutoff=0.98)
    inputs = collect_role_inputs(sample)
    worst_mean, worst_std_lo, worst_std_hi = 0.0, 1.0, 1.0
    for role, raw in inputs.items():
        z = norms[role].transform(raw)
        worst_mean = max(worst_mean, float(np.abs(z.mean(axis=0)).max()))
        worst_std_lo = min(worst_std_lo, float(z.std(axis=0).min()))
        worst_std_hi = max(worst_std_hi, float(z.std(axis=0).max()))
    retained = norms.retained_dims()
    fractions = {r: retained[r] / ROLE_LAYOUTS[r].width for r in retained}
    print(
        f"\nC7 post-normalization |mean| max {worst_mean:.2e}, std in "
        f"[{worst_std_lo:.4f}, {worst_std_hi:.4f}]; retained fractions {fractions}"
    )
    assert worst_mean < 1e-6
    assert 0.99 < worst_std_lo and worst_std_hi < 1.01
    for frac in fractions.values():
        assert frac <= 0.70


# -- criterion 8: speed ------------------------------------------------------------


def test_c08_speed(pipeline):
    report = pipeline["main_report"]
    # oracle-vs-surrogate speedup on one design
    design = pipeline["test"].trajectories[0].design
    t0 = time.perf_counter()
    simulate_oracle(design)
    oracle_ms = (time.perf_counter() - t0) * 1000
    speedup = oracle_ms / report.rollout_ms_single
    print(
        f"\nC8 single rollout {report.rollout_ms_single:.1f} ms (<50), batch "
        f"{report.rollout_ms_batch:.2f} ms each (<10), oracle {oracle_ms:.0f} ms "
        f"(speedup {speedup:.0f}x >= 10x)"
    )
    assert report.rollout_ms_single < 50.0
    assert report.rollout_ms_batch < 10.0
    assert speedup >= 10.0


# -- criterion 9: inverse design ----------------------------------------------------


def test_c09_neighborhood_arithmetic():
    pool = neighborhood(regular_grid(50.0, 0.5), joint_step=2.0)
    print(f"\nC9 interior-actuator neighborhood: {len(pool)} candidates (= 89)")
    assert len(pool) == 89


def test_c09_self_target_recovery(pipeline):
    model = pipeline["main"]
    optimal = regular_grid(50.0, 0.5)
    final = model.rollout_batch([build_graph(optimal)], dtype=np.float32)[0].frames[-1]
    centers = final.nodes[:, NODE_CENTER_SLICE] + final.fixed_origin
    targets = TargetSpec.from_list(
        [{"joint": j, "x": centers[j, 0], "y": centers[j, 1], "z": centers[j, 2]} for j in range(9)]
    )
    # perturb two actuators by 0.25 and ask the optimizer to recover
    beams = list(optimal.beams)
    beams[2] = dataclasses.replace(beams[2], actuator=0.75)
    beams[9] = dataclasses.replace(beams[9], actuator=0.25)
    start = dataclasses.replace(optimal, beams=tuple(beams))

    from morphsim.designops import rank_candidates, Candidate

    initial = rank_candidates(model, [Candidate(start, "current")], targets).best().score
    _, history = inverse_optimize(model, start, targets, epochs=22)
    final_score = history[-1]["score"]
    print(f"\nC9 self-target recovery: {initial:.3f} mm -> {final_score:.3f} mm in <=22 epochs")
    assert final_score <= 0.5 * initial


def test_c09_history_nonincreasing(pipeline):
    model = pipeline["main"]
    rng = np.random.default_rng(4)
    for _ in range(20):
        design = regular_grid(
            float(rng.uniform(45, 60)), float(rng.choice([0.25, 0.5, 0.75]))
        )
        targets = TargetSpec.from_list(
            [
                {
                    "joint": int(rng.integers(0, 9)),
                    "x": float(rng.uniform(-60, 60)),
                    "y": float(rng.uniform(-60, 60)),
                    "z": float(rng.uniform(0, 30)),
                }
            ]
        )
        _, history = inverse_optimize(model, design, targets, epochs=3)
        scores = [h["score"] for h in history]
        assert all(b <= a + 1e-9 for a, b in zip(scores, scores[1:]))
    print("\nC9 inverse history non-increasing on 20 random trials")


# -- criterion 10: loss identities ---------------------------------------------------


def test_c10_loss_identities(small_dataset):
    truth = small_dataset.trajectories[0].frames[5]
    pairs = contiguity_pairs(small_dataset.trajectories[0].frames[0])
    total, parts = tr.loss(truth, truth, pairs, a=1.0)
    assert total == 0.0

    pred = truth.copy()
    node_slot, edge_slot = pairs.pairs[0]
    e, c = divmod(int(edge_slot) - 72, 12)
    pred.edges[e, 3 * c : 3 * c + 3] += np.array([0.0, 3.0, 0.0])
    _, parts = tr.loss(pred, truth, pairs, a=1.0)
    print(f"\nC10 loss identities: truth loss 0, 3 mm pair -> L_disloc {parts['disloc']:.6f}")
    assert parts["disloc"] == pytest.approx(3.0, abs=1e-12)
