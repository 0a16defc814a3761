"""Numerical checks for Lie algebroids, (twisted) Poisson charts and their path spaces."""

from .algebroid import (
    AlgebroidChart,
    check_axioms,
    lie_algebra,
    make_algebroid,
    sl2,
    so3,
    tangent_algebroid,
    zero_algebroid,
)
from .apath import APath, HomotopyDriver, concat, constraint_residual, homotopy_flow, integrate_apath, invert
from .coiso import AdaptedSubmanifold, check_coisotropic, conormal_algebroid
from .expr import ScalarField, parse_expr
from .groupoid import GroupoidInvariant, MatrixRep, axiom_suite, product_integral
from .poisson import PoissonChart, check_jacobi, cotangent_algebroid, dualize, make_poisson
from .report import CheckReport

__version__ = "0.1.0"
