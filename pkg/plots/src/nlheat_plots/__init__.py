"""Figures from nlheat CSV artifacts.

The boundary is the file format: this package reads the documented CSV
schemas (comment header of ``# key=value`` lines, then a column header row)
and renders matplotlib figures to files. It never imports the simulation
code.
"""

from .render import FigureSpec, RenderResult, render
from .tables import read_table

__version__ = "0.1.0"
