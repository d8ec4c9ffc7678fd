"""Figure rendering for modesep experiment CSVs.

Strictly downstream of the emitted files: nothing numeric is recomputed
here, so the measurement package's acceptance suite never depends on this
one.
"""

from .reader import SchemaError, Table, read_table
from .render import (RENDERERS, plot_ellipses, plot_null_overlay, plot_planted,
                     plot_rho, plot_sweeps)

__version__ = "0.1.0"
