"""Static figures from the simulator's file outputs.

Reads the trajectory CSVs and the oracle/convergence JSON reports the
qsmooth CLI writes and renders them as static images. This package never
imports the simulator; the files are the interface.
"""

__version__ = "0.1.0"

from .figures import (FigureSpec, MissingColumn, fit_orders, plot_convergence,
                      plot_mse_bars, plot_trajectory)

__all__ = [
    "FigureSpec", "MissingColumn", "fit_orders", "plot_convergence",
    "plot_mse_bars", "plot_trajectory", "__version__",
]
