"""Figure rendering for conductivity reconstruction exports."""

from .io import InputError, read_field, read_history, read_mesh, read_metrics, read_voltages
from .render import PlotSpec, load_spec, plot_field, plot_history, plot_region3d, plot_voltages, render

__version__ = "0.1.0"
