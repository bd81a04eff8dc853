"""Figure rendering for the delimited outputs of the hyperplane CLI."""

from hyperplane_figures.render import FigureSpec, render

__all__ = ["FigureSpec", "render"]
