import time
import numpy as np
from risae.harness import desk_preset, train_system

cfg = desk_preset()
t0 = time.perf_counter()
nets, ckpt = train_system(cfg, "/root/pkg/.calib/desk_run")
print(f"training took {time.perf_counter()-t0:.1f}s; checkpoint {ckpt}")
import csv
with open("/root/pkg/.calib/desk_run/training_log.csv") as fh:
    rows = list(csv.DictReader(fh))
losses = [float(r["loss"]) for r in rows]
print("loss first 5:", [f"{v:.4f}" for v in losses[:5]])
print("loss last 5:", [f"{v:.4f}" for v in losses[-5:]])
