"""Train an autoencoder and a transfer eigenfunction on the double well.

Runs shortened versions of the bundled reproductions (pass ``--epochs`` to
change) and compares the results with the grid oracle and PCA.

    python demos/train_double_well.py --epochs 100 --out /tmp/dw
"""
import argparse
import json
from pathlib import Path

import numpy as np

from slowcv.cli import run
from slowcv.config import builtin_config, parse_config
from slowcv.net import load_model

ap = argparse.ArgumentParser()
ap.add_argument("--epochs", type=int, default=100)
ap.add_argument("--out", default="demo-runs")
args = ap.parse_args()
root = Path(args.out)

for name in ("example1-ae", "example1-eigen"):
    raw = builtin_config(name)
    raw["training"]["epochs"] = args.epochs
    out = run(parse_config(raw), root / name)
    s = json.loads((out / "summary.json").read_text())
    if name == "example1-ae":
        curve = np.loadtxt(out / "decoder_curve.csv", delimiter=",", skiprows=1)
        print(f"autoencoder: loss {s['final_loss']:.4f}, PCA residual per point {s['pca_residual_per_point']:.4f}")
        print(f"  decoder curve runs from {np.round(curve[0, 1:], 2)} to {np.round(curve[-1, 1:], 2)}")
    else:
        f = load_model(out / "f1.json")
        print(f"eigenfunction: nu1 {s['estimates'][0]['nu']:.4f}, oracle exp(-tau lambda1) {s['fd']['nu'][0]:.4f}")
        print(f"  f(-1,0), f(1,0) = {np.round(f.forward(np.array([[-1.0, 0.0], [1.0, 0.0]]))[:, 0], 3)}")
print(f"artifacts in {root}/")
