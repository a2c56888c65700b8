"""After the Markov oracle + loss-scale fixes: noise on/off at 400 trajectories."""
import json
import os
import sys
import time

import numpy as np

sys.path.insert(0, "src")
from morphsim import dataset as ds
from morphsim import training as tr

if os.path.exists("scripts/data400.bin"):
    data = ds.Dataset.load("scripts/data400.bin")
else:
    data = ds.generate_dataset(n=400, seed=100, batch_size=25, workers=2)
    data.save("scripts/data400.bin")
train_set, test_set = ds.split_dataset(data, test_count=60)

configs = [
    ("markov_nonoise", dict(hidden=(128, 64, 32, 16, 8), gamma=0.0, epochs=30)),
    ("markov_noise01", dict(hidden=(128, 64, 32, 16, 8), gamma=0.1, epochs=30)),
]
results = {}
for name, kw in configs:
    hp = tr.Hyperparams(
        a=1.0, creep_epochs=20, batch_size=16, learning_rate=3e-4, seed=1,
        latent=32, cutoff=0.999, **kw,
    )
    t0 = time.perf_counter()
    model, hist = tr.train(train_set, hp)
    rep = tr.evaluate(model, test_set, timing_rollouts=30)
    rel = [h for h in hist if h["stage"] == "release"]
    results[name] = {
        "train_s": round(time.perf_counter() - t0),
        "mean_mm": rep.mean_vertex_error_mm,
        "rel_pct": 100 * rep.mean_relative_error,
        "ratio": rep.mean_vertex_error_mm / rep.baseline_mean_error_mm,
        "disloc_mm": rep.mean_dislocation_mm,
        "val_curve": [round(h["val_loss"], 3) for h in rel[:: max(len(rel) // 8, 1)]],
        "final_val": rel[-1]["val_loss"],
        "frame_errs": [round(v, 2) for v in rep.per_frame_error_mm],
    }
    print(name, json.dumps(results[name], default=float), flush=True)
json.dump(results, open("scripts/exp_markov.json", "w"), indent=2, default=float)
print("DONE")
