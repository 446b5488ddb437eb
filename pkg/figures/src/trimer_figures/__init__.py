"""Publication-style figures from trimer simulation CSV artifacts."""

from .render import KINDS, FigureSpec, SchemaError, build_figure, render

__all__ = ["KINDS", "FigureSpec", "SchemaError", "build_figure", "render"]
__version__ = "0.1.0"
