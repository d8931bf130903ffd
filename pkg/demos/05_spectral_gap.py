# %% [markdown]
# Relaxation time and the Liouvillian gap
#
# The smallest non-zero decay rate of the Liouvillian sets how long it takes
# to reach the steady state. For two atoms it closes as the spacing shrinks,
# because the dark state decays at gamma0 - Gamma_12.

# %%
from superlab import experiments as ex

for row in ex.gap_vs_spacing([0.05, 0.1, 0.2, 0.3, 0.5]):
    print(f"a = {row['a']:.2f}: gap = {row['gap']:.5f}, tau_ss = {row['tau_ss']:8.2f}")
