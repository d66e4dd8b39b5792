"""plotviz: offline KDE contour figures and metric tables from the
generator pipeline's CSV outputs."""

from .contour import PlotJob, render_kde_contour
from .kde2d import density_orientation, kde_grid
from .samples import SampleTable, read_sample_csv
from .tables import render_metric_table

__version__ = "0.1.0"
