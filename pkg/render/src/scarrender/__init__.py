"""Figure renderer for scarsim artifact files."""

from .figures import STYLE_VERSION, FigureSpec, heatmap, profile, spectrum_overlay
from .formats import (
    FormatError,
    read_coeffs,
    read_field,
    read_grid,
    read_orbit,
    read_profile,
    read_spectra,
)

__version__ = "0.1.0"
