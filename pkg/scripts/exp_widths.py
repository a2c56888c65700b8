"""Architecture sizing experiment: accuracy vs width/latent on a mid-size set."""
import json
import sys
import time

import numpy as np

sys.path.insert(0, "src")
from morphsim import dataset as ds
from morphsim import training as tr

t0 = time.perf_counter()
data = ds.generate_dataset(n=400, seed=100, batch_size=25, workers=2)
print(f"dataset 400: {time.perf_counter()-t0:.0f}s, resampled {data.meta['resampled']}", flush=True)
train_set, test_set = ds.split_dataset(data, test_count=60)

configs = [
    ("h128_L32", (128, 64, 32, 16, 8), 32, 3e-4),
    ("h64_L16", (64, 32, 16, 8, 4), 16, 5e-4),
    ("h256_L32", (256, 128, 64, 32, 16), 32, 3e-4),
]
results = {}
for name, hidden, latent, lr in configs:
    hp = tr.Hyperparams(
        a=1.0, gamma=0.1, epochs=35, creep_epochs=20, batch_size=16,
        learning_rate=lr, seed=1, latent=latent, hidden=hidden,
    )
    t0 = time.perf_counter()
    model, hist = tr.train(train_set, hp)
    t_train = time.perf_counter() - t0
    rep = tr.evaluate(model, test_set, timing_rollouts=30)
    results[name] = {
        "train_s": round(t_train),
        "mean_mm": rep.mean_vertex_error_mm,
        "rel_pct": 100 * rep.mean_relative_error,
        "p97_mm": rep.p97_vertex_error_mm,
        "disloc_mm": rep.mean_dislocation_mm,
        "baseline_mm": rep.baseline_mean_error_mm,
        "ratio": rep.mean_vertex_error_mm / rep.baseline_mean_error_mm,
        "single_ms": rep.rollout_ms_single,
        "batch_ms": rep.rollout_ms_batch,
        "final_val": [h for h in hist if h["stage"] == "release"][-1]["val_loss"],
    }
    print(name, json.dumps(results[name], indent=None, default=float), flush=True)

with open("scripts/exp_widths.json", "w") as f:
    json.dump(results, f, indent=2, default=float)
print("DONE")
