"""Score urban parks for health-promoting activities from OpenStreetMap data."""

__version__ = "0.1.0"

from .lexicon import CATEGORIES, ActivityCategory

__all__ = ["ActivityCategory", "CATEGORIES", "__version__"]
