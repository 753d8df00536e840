"""
Searching for tetrahedral detector layouts
==========================================

Four detectors form a symmetric informationally complete measurement when
their Bloch vectors have pairwise dot products of -1/3. Propagation distance
and the four reduced positions are found by a multistart search.
"""

# %%
import numpy as np

from tetraslit import sicsearch as ss

solutions = ss.search_tetrahedra((0, 11), 20_000, seed=7, tol=1e-12)
print(f"{len(solutions)} distinct solutions with zeta in (0, 11]")
for sol in solutions:
    kind = "symmetric" if sol.is_symmetric() else "asymmetric"
    w = ", ".join(f"{v:+.5f}" for v in sol.w)
    print(f"zeta={sol.zeta:8.4f}  w=({w})  {kind}  gram err {sol.gram_max_error:.1e}")

# %%
# Compare with the published catalogue.
for row in ss.TABLE1:
    want = ss.canonicalize(ss.TetraSolution(row[0], row[1:], 0.0))
    hit = min(solutions, key=lambda s: abs(s.zeta - want.zeta) + np.abs(np.subtract(s.w, want.w)).sum())
    print(f"table zeta {row[0]:8.4f} -> found {hit.zeta:8.4f}, max w diff {np.max(np.abs(np.subtract(hit.w, want.w))):.1e}")

# %%
# The shortest solution: its Bloch vectors and their Gram matrix.
ref = ss.reference_solution()
print(np.round(ref.bloch_vectors, 6))
print(np.round(ref.gram, 6))
