"""Shared numeric configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ConfigError


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and node budgets for quadrature and contour extraction.

    Parameters
    ----------
    tol : float
        Absolute tolerance for adaptive refinement.
    max_depth : int
        Maximum tanh-sinh refinement level (node spacing h = 2**-level).
    contour_nodes : int
        Starting node count per contour circle; a power of two (doubled
        until successive coefficient sets stabilize).
    contour_radius : float or None
        Contour radius; None selects 1/4 of the distance from the center
        to the nearest pole hyperplane not passing through it.
    max_contour_doublings : int
        How many times the contour node count may double.
    on_pole_guard : float
        Reject continuation parameters within this distance of the pole
        lattice.
    eval_guard : float
        Reject germ evaluation within this distance of a pole hyperplane.
    start_level : int
        Initial tanh-sinh refinement level.
    """

    tol: float = 1e-10
    max_depth: int = 12
    contour_nodes: int = 64
    contour_radius: float | None = None
    max_contour_doublings: int = 4
    on_pole_guard: float = 1e-6
    eval_guard: float = 1e-12
    start_level: int = 3

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ConfigError("tolerance must be > 0")
        n = self.contour_nodes
        if n < 2 or n & (n - 1):
            raise ConfigError("contour node count must be a power of two >= 2")
        if self.max_depth < self.start_level:
            raise ConfigError("max_depth must be >= start_level")
        if self.contour_radius is not None and not self.contour_radius > 0:
            raise ConfigError("contour radius must be > 0")

    def with_(self, **kw) -> "QuadratureConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = QuadratureConfig()
