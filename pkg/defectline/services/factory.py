"""Builds fields and search windows from run-configuration specs."""

import logging
import math
from typing import Optional, Sequence

from defectline.config import Settings, get_settings
from defectline.schemas.run_config import FieldSpec, WindowSpec
from defectline.services.builtin_fields import make_builtin
from defectline.services.linalg_core import EvolutionLaw, sample_ginibre
from defectline.services.rootfind import SearchWindow, default_window
from defectline.services.wavefield import PlaneField, WaveField

logger = logging.getLogger(__name__)


def build_field(spec: FieldSpec, seed: int = 0) -> PlaneField:
    if spec.builtin:
        return make_builtin(spec.builtin, T=spec.T, epsilon=spec.epsilon)
    if spec.matrix is not None:
        m0 = spec.matrix.to_array()
    else:
        sigma = spec.sigma or 1.0 / math.sqrt(2 * spec.n)
        m0 = sample_ginibre(spec.n, sigma, seed)
    field = WaveField(EvolutionLaw(m0, spec.s), spec.slots)
    logger.debug("built %r", field)
    return field


def build_window(
    spec: Optional[WindowSpec],
    field: PlaneField,
    times: Sequence[float],
    settings: Optional[Settings] = None,
) -> SearchWindow:
    settings = settings or get_settings()
    if spec is None:
        return default_window(field, times, settings.GRID_DENSITY_2D)
    return SearchWindow(spec.x_min, spec.x_max, spec.y_min, spec.y_max, spec.grid_density)


def window_spec(window: SearchWindow) -> WindowSpec:
    return WindowSpec(
        x_min=window.x_min,
        x_max=window.x_max,
        y_min=window.y_min,
        y_max=window.y_max,
        grid_density=window.grid_density,
    )
