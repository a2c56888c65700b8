"""Capacity scaling after the Markov fix."""
import json
import os
import sys
import time

import numpy as np

sys.path.insert(0, "src")
from morphsim import dataset as ds
from morphsim import training as tr

data = ds.Dataset.load("scripts/data400.bin")
train_set, test_set = ds.split_dataset(data, test_count=60)

configs = [
    ("big", dict(hidden=(256, 128, 64, 32, 16), latent=48, cutoff=0.9999, learning_rate=2e-4, epochs=60)),
    ("bigger_lr", dict(hidden=(256, 128, 64, 32, 16), latent=48, cutoff=0.9999, learning_rate=6e-4, epochs=60)),
]
results = {}
for name, kw in configs:
    hp = tr.Hyperparams(a=1.0, gamma=0.0, creep_epochs=15, batch_size=16, seed=1, **kw)
    t0 = time.perf_counter()
    model, hist = tr.train(train_set, hp)
    rep = tr.evaluate(model, test_set, timing_rollouts=10)
    rel = [h for h in hist if h["stage"] == "release"]
    results[name] = {
        "train_s": round(time.perf_counter() - t0),
        "mean_mm": rep.mean_vertex_error_mm,
        "ratio": rep.mean_vertex_error_mm / rep.baseline_mean_error_mm,
        "val_curve": [round(h["val_loss"], 3) for h in rel[:: max(len(rel) // 10, 1)]],
        "frame_errs": [round(v, 2) for v in rep.per_frame_error_mm],
    }
    print(name, json.dumps(results[name], default=float), flush=True)
json.dump(results, open("scripts/exp_capacity.json", "w"), indent=2, default=float)
print("DONE")
