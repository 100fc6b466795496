"""Build a small balanced mixture corpus on disk and check its manifest.

Run: python demos/03_dataset.py [out_dir]
"""

import sys
from collections import Counter
from pathlib import Path

import numpy as np

from chansep.dataset import DatasetConfig, build_dataset, load_manifest, validate_manifest

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_dataset")
cfg = DatasetConfig(sample_rate=8000, clip_len=1024, counts=10, seed=0)
ds = build_dataset(cfg, out)

print(f"{len(ds)} records in {out}")
print("per split:", {s: len(ds.split(s)) for s in ("train", "val", "test")})
print("per category:", dict(Counter(r.category for r in ds.records)))

rec = next(r for r in ds.records if r.category == "BCD")
print(f"\n{rec.id}: mask {rec.mask}, SNR draws {rec.snr_db}")
print("targets:", rec.targets)

recs = load_manifest(out / "manifest.jsonl")
print("\nmanifest problems:", validate_manifest(recs) or "none")

# Break the mask of one record to see the validator react.
recs[0].mask = tuple(not m for m in recs[0].mask)
print("after corrupting one mask:", validate_manifest(recs)[:1])

peaks = [np.max(np.abs(np.asarray(r.mixture_data))) for r in ds.records]
print(f"\nmixture peaks stay under {cfg.peak_limit}: max {max(peaks):.3f}")
