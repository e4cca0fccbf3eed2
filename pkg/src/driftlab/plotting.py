"""Log-log slope plots written as SVG with fixed metadata for reproducible bytes."""

from __future__ import annotations

from typing import Any, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "driftlab"


def slope_plot(series: Mapping[str, Sequence[float]], fit: Mapping[str, Any], title: str,
               path: str) -> None:
    """Data points, the fitted line and the predicted slope through the data centroid."""
    x = np.asarray(series[fit["x"]], dtype=float) - fit.get("x_shift", 0.0)
    y = np.asarray(series[fit["y"]], dtype=float)
    keep = (x > 0) & (y > 0)
    x, y = x[keep], y[keep]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(x, y, "o", color="k", label="measured")
    if x.size:
        lx, ly = np.log(x), np.log(y)
        cx, cy = lx.mean(), ly.mean()
        xs = np.linspace(lx.min(), lx.max(), 2)
        ax.loglog(np.exp(xs), np.exp(cy + fit["fitted"] * (xs - cx)), "-", color="C0",
                  label=f"fitted slope {fit['fitted']:.4f}")
        ax.loglog(np.exp(xs), np.exp(cy + fit["predicted"] * (xs - cx)), "--", color="C3",
                  label=f"predicted slope {fit['predicted']:.4f}")
    xlabel = fit["x"] if not fit.get("x_shift") else f"{fit['x']} - {fit['x_shift']:.4g}"
    ax.set_xlabel(xlabel)
    ax.set_ylabel(fit["y"])
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
