# %% [markdown]
# Config-driven sweeps
#
# The same grids the command line runs can be built from an INI document.
# Results are written as CSV with one row per (N, a, omega, theta, t0).

# %%
import tempfile
from pathlib import Path

from superlab import experiments as ex
from superlab.config import parse_config, serialize

text = """
[geometry]
family = chain
n = 2, 3
a = 0.1, 0.3

[drive]
omega = 1.0, 5.0

[solver]
backend = exact
"""
cfg = parse_config(text)
print(serialize(cfg))
records = ex.run_sweep(cfg.sweep_spec())
out = Path(tempfile.mkdtemp()) / "sweep.csv"
ex.write_csv(out, records)
print(out.read_text())
