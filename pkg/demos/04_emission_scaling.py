# %% [markdown]
# Steady emission versus atom number
#
# All-to-all (Dicke) coupling gives gamma_tot ~ N^2 under strong drive,
# while a chain in free space only reaches ~ N: dissipative couplings leak
# population into subradiant states.

# %%
import numpy as np

from superlab import experiments as ex

dicke = ex.emission_scaling("dicke", range(2, 13, 2), omega_list=[5.0], scaled_drive=True)
fit = dicke[5.0]["fit"]
print(f"Dicke, Omega = 5N/2: slope {fit[0]:.3f}")

chain = ex.emission_scaling("cumulant", [4, 6, 8, 12], a=0.2, omega_list=[20.0])
fit = chain[20.0]["fit"]
for r in chain[20.0]["records"]:
    print(f"chain N = {r.N:2d}: gamma_tot = {r.gamma_tot:.4f}  (N/2 = {r.N / 2})")
print(f"free-space chain, Omega = 20: slope {fit[0]:.3f}")
