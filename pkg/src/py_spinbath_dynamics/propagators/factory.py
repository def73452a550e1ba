"""Factory for creating propagators."""
import sys
from typing import TYPE_CHECKING

if sys.version_info < (3, 10):
    from importlib_metadata import entry_points
else:
    from importlib.metadata import entry_points

if TYPE_CHECKING:
    from ..models import CompiledModel, ModelSpec
    from .base import Propagator, PropagatorConfig

PROPAGATOR_GROUP = "py_spinbath_dynamics.propagators"


def get_propagator(
    name: str,
    spec: "ModelSpec",
    compiled: "CompiledModel",
    config: "PropagatorConfig",
) -> "Propagator":
    """
    Dynamically discover and load a Propagator plugin.

    Args:
        name: The name of the propagator to load (e.g., 'polynomial').
        spec: The model the propagator evolves.
        compiled: The model's compiled Hamiltonian.
        config: Numerical settings for the propagator's constructor.

    Returns:
        An initialized instance of the requested Propagator.

    Raises:
        ValueError: If the requested propagator is not found.

    """
    discovered_plugins = entry_points(group=PROPAGATOR_GROUP)

    try:
        plugin = discovered_plugins[name]
    except KeyError:
        raise ValueError(
            f"Propagator '{name}' not found. "
            f"Available propagators: {sorted(ep.name for ep in discovered_plugins)}"
        ) from None

    propagator_class = plugin.load()
    return propagator_class(spec, compiled, config)
