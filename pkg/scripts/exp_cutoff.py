"""Cutoff / learning-rate probe on a 400-trajectory set."""
import json
import sys
import time

import numpy as np

sys.path.insert(0, "src")
from morphsim import dataset as ds
from morphsim import training as tr

data = ds.generate_dataset(n=400, seed=100, batch_size=25, workers=2)
train_set, test_set = ds.split_dataset(data, test_count=60)

configs = [
    ("c999_lr1e3", 0.999, 1e-3, (128, 64, 32, 16, 8), 32),
    ("c999_lr3e4", 0.999, 3e-4, (128, 64, 32, 16, 8), 32),
    ("c9999_lr1e3", 0.9999, 1e-3, (128, 64, 32, 16, 8), 32),
]
results = {}
for name, cutoff, lr, hidden, latent in configs:
    hp = tr.Hyperparams(
        a=1.0, gamma=0.1, epochs=35, creep_epochs=20, batch_size=16,
        learning_rate=lr, seed=1, latent=latent, hidden=hidden, cutoff=cutoff,
    )
    t0 = time.perf_counter()
    model, hist = tr.train(train_set, hp)
    rep = tr.evaluate(model, test_set, timing_rollouts=30)
    results[name] = {
        "train_s": round(time.perf_counter() - t0),
        "mean_mm": rep.mean_vertex_error_mm,
        "rel_pct": 100 * rep.mean_relative_error,
        "disloc_mm": rep.mean_dislocation_mm,
        "ratio": rep.mean_vertex_error_mm / rep.baseline_mean_error_mm,
        "final_val": [h for h in hist if h["stage"] == "release"][-1]["val_loss"],
        "frame_errs": [round(v, 2) for v in rep.per_frame_error_mm],
    }
    print(name, json.dumps(results[name], default=float), flush=True)
json.dump(results, open("scripts/exp_cutoff.json", "w"), indent=2, default=float)
print("DONE")
