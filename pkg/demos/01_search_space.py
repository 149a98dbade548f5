"""Tour of the architecture space: sampling, edits, encoding, and counting.

Run:  python demos/01_search_space.py
"""

import numpy as np

from nasforge import (
    Architecture,
    SpaceLimits,
    canonical_hash,
    encode_features,
    enumerate_terms,
    neighbours,
    sample_uniform,
    search_space_upper_bound,
    validate,
)

# --- the smallest member and its one-edit neighbourhood -------------------
minimal = Architecture(2, ((0, 1),), ())
print("minimal architecture:", minimal.to_json())
print("valid?", validate(minimal).ok)

hood = neighbours(minimal)
print(f"\nits neighbourhood has {len(hood)} members (one 3-vertex chain per label):")
for arch in hood[:3]:
    print("  ", arch.to_json())
print("   ...")

# --- uniform sampling over the full space ---------------------------------
rng = np.random.default_rng(0)
samples = [sample_uniform(rng) for _ in range(5000)]
counts = np.bincount([a.num_vertices for a in samples], minlength=9)[2:]
print("\nvertex-count histogram over 5000 uniform samples (should be flat):")
for v, n in enumerate(counts, start=2):
    print(f"  v={v}: {'#' * (n // 25)} {n}")

# --- features the surrogates see -------------------------------------------
arch = samples[0]
vec = encode_features(arch)
print("\none sampled architecture:", arch.to_json())
print("encoded (96 features): adjacency bits", vec[:28].astype(int).tolist())
print("vertex count", int(vec[94]), "edge count", int(vec[95]))
print("hash:", hex(canonical_hash(arch)))

# --- how big is this space, exactly? ---------------------------------------
print("\nclosed-form size bound of the full space:",
      f"{search_space_upper_bound(SpaceLimits(8, 10)):,}")
cells = enumerate_terms(SpaceLimits(4, 10), 4)
print("brute-force check on the v<=4 slice (counted pairs vs actually valid):")
for (v, e), cell in sorted(cells.items()):
    print(f"  v={v} e={e}: counted {cell.term_count:>6,}  valid {cell.valid_count:>6,}")
