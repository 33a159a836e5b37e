"""Stationary discs, partial indices and Riemann maps for small almost
complex deformations of the unit ball."""

from .loop_algebra import (FourierLoop, DiscFunction, cauchy_solve,
                           riesz_split, winding_number)
from .structures import (StructureField, PolynomialMap, ProlongationTensor,
                         HypersurfaceDef, beltrami_coefficient, vertical_lift,
                         prolongation_coefficients, normalize_at_point,
                         levi_form, pullback_structure)

__version__ = "0.1.0"
