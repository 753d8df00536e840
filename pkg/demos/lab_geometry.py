"""
From reduced units to a lab bench
=================================

The design lives in units of the slit width and the Fresnel length. Picking a
wavelength and slit width sets every physical distance.
"""

# %%
from tetraslit import labgeom
from tetraslit import sicsearch as ss

ref = ss.reference_solution()
delta = ss.balanced_delta_for(ref)
print("  lambda   a      2d      z_det     x3      x4   (printed)")
for (lam, a), printed in labgeom.TABLE2:
    g = labgeom.to_physical(ref, delta, lam, a)
    print(
        f"{lam * 1e9:5.0f} nm {a * 1e6:5.1f} um  {labgeom.format_length(g.two_d):>7s}  "
        f"{labgeom.format_length(g.z_det):>9s}  {labgeom.format_length(g.x[2]):>6s}  "
        f"{labgeom.format_length(g.x[3]):>6s}   {printed}"
    )

# %%
# Doubling the slit width quadruples the distance and doubles the spacing.
small = labgeom.to_physical(ref, delta, 650e-9, 100e-6)
big = labgeom.to_physical(ref, delta, 650e-9, 200e-6)
print(big.z_det / small.z_det, big.two_d / small.two_d)

# %%
# And back again.
print(labgeom.from_physical(small))
