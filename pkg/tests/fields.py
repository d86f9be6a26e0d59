"""Random smooth admissible deflections shared by the tests."""
import numpy as np

from memsfb.core import DeflectionField, Grid1D


def smooth_field(grid: Grid1D, coeffs, scale: float) -> DeflectionField:
    """Sine series vanishing at +-1, rescaled so that max |u| = scale."""
    x = grid.x
    raw = sum(c * np.sin((k + 1) * np.pi * (x + 1) / 2) for k, c in enumerate(coeffs))
    peak = np.max(np.abs(raw))
    vals = np.zeros_like(x) if peak == 0 else scale * raw / peak
    vals[0] = vals[-1] = 0.0
    return DeflectionField(grid, vals)
