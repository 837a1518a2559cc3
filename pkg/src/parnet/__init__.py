"""Learned parametrization and knot selection for B-spline curve approximation."""

from parnet.bspline import BSplineCurve, KnotVector, fit_constrained, fit_unconstrained
from parnet.classic import ClassicParametrizer
from parnet.neural import KnotSelector, PointParametrizer
from parnet.pipeline import PipelineConfig, SplineApproximator, parnet_approximate

__version__ = "0.1.0"

__all__ = [
    "BSplineCurve", "ClassicParametrizer", "KnotSelector", "KnotVector", "PipelineConfig",
    "PointParametrizer", "SplineApproximator", "fit_constrained", "fit_unconstrained",
    "parnet_approximate",
]
