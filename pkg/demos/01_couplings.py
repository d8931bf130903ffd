# %% [markdown]
# Dipole couplings between emitters
#
# Two atoms polarised along z and separated along x interact through a
# coherent exchange J and a collective decay Gamma. At short distance J grows
# like 1/a^3 while Gamma tends to gamma0, which is what makes close arrays
# Dicke-like.

# %%
import numpy as np

from superlab import geometry as geo
from superlab.dipole import coupling_matrices, effective_couplings, find_jeff_zeros

print(f"{'a/lambda0':>10} {'J_12':>12} {'Gamma_12':>10}")
for a in (0.05, 0.1, 0.2, 0.3, 0.5, 1.0):
    c = coupling_matrices(geo.chain(2, a))
    print(f"{a:10.2f} {c.J[0, 1]:12.5f} {c.Gamma[0, 1]:10.5f}")

# %% [markdown]
# For a periodic array the row sums over one reference atom give a single
# effective spin. For a 2 x 2 square the effective exchange changes sign at a
# few special spacings.

# %%
zeros = find_jeff_zeros(lambda a: geo.square(2, a), (0.05, 2.0))
print("J_eff zeros of the 2x2 square:", np.round(zeros, 4))
for a in (0.2, zeros[0], 1.0):
    J_eff, G_eff = effective_couplings(geo.square(2, a))
    print(f"a = {a:.4f}: J_eff = {J_eff:+.5f}, Gamma_eff = {G_eff:+.5f}")
