"""
Single-photon tomography with four detectors
============================================

Simulated photons land on the detection plane; only those hitting one of the
four windows are kept. The counts are turned back into a Bloch vector by
linear inversion or maximum likelihood.
"""

# %%
import numpy as np

from tetraslit import sicsearch as ss
from tetraslit import tomo

ref = ss.reference_solution()
delta = ss.balanced_delta_for(ref)
layout = ss.layout_for(ref, delta)
povm = ss.build_povm(ref, delta)

truth = np.array([0.3, -0.5, 0.6])
counts = tomo.sample_counts(truth, layout, 10**8, seed=1)
print(f"counts {counts.n}, acceptance {counts.acceptance:.2e}")
for method in ("linear", "mle"):
    rep = tomo.reconstruct(counts, povm, method, truth=truth)
    print(f"{method:6s} r_hat={np.round(rep.r_hat, 4)}  F={rep.fidelity:.6f}  D={rep.trace_distance:.4f}")

# %%
# Positions can also be drawn one by one and binned; the result has the same
# distribution as the direct multinomial draw above.
pos = tomo.sample_positions(truth, layout, 200_000, seed=2)
print("binned from positions:", tomo.bin_counts(pos, layout).n)

# %%
# Estimation error falls as one over the square root of the photon number.
rng = np.random.default_rng(0)
states = tomo.random_bloch(rng, 30)
for n in (10**3, 10**4, 10**5, 10**6):
    err = np.mean([
        np.linalg.norm(tomo.mle_reconstruct(tomo.sample_accepted_counts(r, layout, n, seed=i), povm) - r)
        for i, r in enumerate(states)
    ])
    print(f"n={n:>8d}  mean |r_hat - r| = {err:.4f}  (times sqrt(n): {err * np.sqrt(n):.2f})")
