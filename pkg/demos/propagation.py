"""
Propagating the two slit modes
==============================

Each slit is a Gaussian mode. Past the slits it spreads and picks up a
position dependent phase, and the pair of modes defines a qubit at every
point of a detection plane.
"""

# %%
# Numerical Fresnel propagation against the closed form.
import numpy as np

from tetraslit import wavefield as wf

delta, zeta = 2.76444, 3.4678
src = wf.default_grid(0.0, delta)
field = wf.SampledField(src, wf.slit_mode(1, src, delta))
out = wf.fresnel_propagate(field, zeta, np.linspace(-15, 15, 601))
exact = wf.propagate_mode(1, out.grid, zeta, delta)
print(f"max |numeric - closed form| = {np.max(np.abs(out.values - exact)):.2e}")
print(f"half-resolution error estimate = {out.error_estimate:.2e}")

# %%
# The two modes barely overlap at the slits.
print(f"<psi1|psi2> = {wf.mode_overlap(delta):.3e}")

# %%
# Walking along the detection plane, the Bloch vector of the local projector
# sweeps from one pole to the other while spiralling around the z axis.
xi = np.linspace(-6, 6, 7)
for x, s in zip(xi, wf.bloch_of_xi(xi, zeta, delta)):
    print(f"xi={x:+5.1f}  s=({s[0]:+.3f}, {s[1]:+.3f}, {s[2]:+.3f})")

# %%
# An equal mixture of the two slits gives half the envelope everywhere;
# a superposition adds fringes on top.
xi = np.linspace(-3, 3, 5)
env = wf.intensity_envelope(xi, zeta, delta)
print(np.round(wf.detection_pdf(wf.BlochState.mixed(), xi, zeta, delta) / env, 12))
print(np.round(wf.detection_pdf(wf.BlochState((1.0, 0.0, 0.0)), xi, zeta, delta) / env, 4))
