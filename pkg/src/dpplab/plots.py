"""Plot-script emission and figure rendering for experiment CSV output.

``emit_plots`` inspects a directory of experiment CSVs and writes one
self-contained matplotlib script per recognized table; the scripts read
only the CSVs sitting next to them.  With ``render=True`` each script is
executed (Agg backend) so the PNG figures land alongside the delimited
output.
"""

from __future__ import annotations

import os
import subprocess
import sys
import warnings
from pathlib import Path

__all__ = ["emit_plots"]

_CONVERGENCE_TEMPLATE = '''\
"""Log-log error-vs-scale plot for {csv_name}."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# first line is the timestamp header, second the column names
data = np.genfromtxt("{csv_name}", delimiter=",", names=True, skip_header=1)
data = np.atleast_1d(data)

fig, ax = plt.subplots(figsize=(6.0, 4.0))
keys = sorted(set(zip(data["alpha"], data["delta"], data["kappa"], data["lambda_"]
              if "lambda_" in data.dtype.names else data["lambda"])))
lam_col = "lambda_" if "lambda_" in data.dtype.names else "lambda"
for alpha, delta, kappa, lam in keys:
    mask = (
        (data["alpha"] == alpha)
        & (data["delta"] == delta)
        & (data["kappa"] == kappa)
        & (data[lam_col] == lam)
    )
    pts = np.sort(data[mask], order="n_or_L")
    label = f"a={{alpha:g}} d={{delta:g}} k={{kappa:g}} l={{lam:g}}"
    ax.loglog(pts["n_or_L"], pts["abs_err_exact_vs_limit"], "o-", label=label)
ax.set_xlabel("n or L")
ax.set_ylabel("|centered CGF - limit CGF|")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
print("wrote {png_name}")
'''

_HEATMAP_TEMPLATE = '''\
"""KS-distance heat map over the (alpha, delta) grid for {csv_name}."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# first line is the timestamp header, second the column names
data = np.genfromtxt("{csv_name}", delimiter=",", names=True, skip_header=1)
data = np.atleast_1d(data)

alphas = np.unique(data["alpha"])
deltas = np.unique(data["delta"])
grid = np.full((len(alphas), len(deltas)), np.nan)
for row in data:
    i = np.searchsorted(alphas, row["alpha"])
    j = np.searchsorted(deltas, row["delta"])
    grid[i, j] = row["ks_predicted"]

fig, ax = plt.subplots(figsize=(5.0, 4.2))
im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
ax.set_xticks(range(len(deltas)), [f"{{d:g}}" for d in deltas])
ax.set_yticks(range(len(alphas)), [f"{{a:g}}" for a in alphas])
ax.set_xlabel("delta")
ax.set_ylabel("alpha")
ax.set_title("KS distance to the predicted limit law")
fig.colorbar(im, ax=ax)
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
print("wrote {png_name}")
'''

_HISTOGRAM_TEMPLATE = '''\
"""Histogram of Monte Carlo replicate values in {csv_name}."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

values = np.genfromtxt("{csv_name}", delimiter=",", skip_header=2)
values = np.atleast_1d(values)

fig, ax = plt.subplots(figsize=(5.5, 3.8))
ax.hist(values, bins=60, density=True, alpha=0.75)
ax.set_xlabel("centered statistic")
ax.set_ylabel("density")
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
print("wrote {png_name}")
'''


def emit_plots(csv_dir, render=True):
    """Write plot scripts for the CSVs in ``csv_dir``; optionally run them.

    Returns the list of script paths written.  An empty or unrecognized
    directory produces a warning and no scripts.
    """
    csv_dir = Path(csv_dir)
    scripts = []
    for name, template, png in (
        ("cgf_convergence.csv", _CONVERGENCE_TEMPLATE, "cgf_convergence.png"),
        ("sine_convergence.csv", _CONVERGENCE_TEMPLATE, "sine_convergence.png"),
        ("regime_sweep.csv", _HEATMAP_TEMPLATE, "regime_sweep_ks.png"),
    ):
        if (csv_dir / name).exists():
            scripts.append(
                _write_script(csv_dir, f"plot_{name[:-4]}.py", template, name, png)
            )
    for mc_csv in sorted(csv_dir.glob("mc_values_*.csv")):
        stem = mc_csv.stem
        scripts.append(
            _write_script(
                csv_dir,
                f"plot_{stem}.py",
                _HISTOGRAM_TEMPLATE,
                mc_csv.name,
                f"{stem}.png",
            )
        )
    if not scripts:
        warnings.warn(f"no recognized experiment CSVs in {csv_dir}", stacklevel=2)
        return []
    if render:
        env = dict(os.environ, MPLBACKEND="Agg")
        for script in scripts:
            subprocess.run(
                [sys.executable, script.name],
                cwd=csv_dir,
                env=env,
                check=True,
                capture_output=True,
            )
    return scripts


def _write_script(csv_dir, script_name, template, csv_name, png_name):
    path = csv_dir / script_name
    path.write_text(template.format(csv_name=csv_name, png_name=png_name))
    return path
