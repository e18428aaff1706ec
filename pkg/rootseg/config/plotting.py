"""Figure styling for rendered slices and tolerance curves."""

from dataclasses import dataclass


@dataclass
class PlotConfig:
    """Common plot styling configuration."""
    figsize_medium: tuple = (10, 6)
    title_fontsize: int = 16
    label_fontsize: int = 12
    grid_alpha: float = 0.3
    line_width: float = 2.0
    marker_size: float = 4.0
    dpi: int = 150
    curve_colors: tuple = ("tab:blue", "tab:orange", "tab:green")


# Default configuration instance
default_config = PlotConfig()
