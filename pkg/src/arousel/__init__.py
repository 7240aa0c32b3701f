"""Windowed ECG/EDA feature battery, FDR-controlled feature selection and
mixed-effects confirmation for continuously annotated arousal recordings."""

__version__ = "0.1.0"

from . import errors

__all__ = ["errors", "__version__"]
