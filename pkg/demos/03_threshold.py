# %% [markdown]
# Magnetised to paramagnetic crossover
#
# Below the critical drive the spins stay polarised near S_z = -N/2; above
# it they saturate. The drive maximising <S_y> marks the threshold. For a
# 2 x 2 square the full master equation, the mean-field equations and the
# effective-spin formula can be compared directly.

# %%
import numpy as np

from superlab import experiments as ex
from superlab import geometry as geo
from superlab import meanfield as mf
from superlab.dipole import effective_couplings

omega = np.linspace(0.25, 4.0, 16)
for a in (0.2, 0.4, 0.65):
    pd_exact = ex.phase_diagram("exact", "square", 2, [a], omega)
    pd_mf = ex.phase_diagram("meanfield", "square", 2, [a], omega)
    print(f"a = {a}: exact {pd_exact.threshold[0]:.3f}, mean field {pd_mf.threshold[0]:.3f}, "
          f"effective spin {mf.critical_drive(*effective_couplings(geo.square(2, a))):.3f}")

# %% [markdown]
# In the Dicke limit the threshold grows like N gamma0 / 2.

# %%
for N in (4, 10, 20):
    print(f"N = {N}: Dicke threshold {ex.dicke_threshold(N):.3f} (N/2 = {N / 2})")
