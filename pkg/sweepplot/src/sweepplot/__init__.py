"""Chart rendering for SNR-sweep CSV output."""

from .render import EXPECTED_COLUMNS, PlotError, PlotSpec, load_rows, render

__version__ = "0.1.0"
