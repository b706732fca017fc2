"""Algebraic equations whose coefficients are analytic almost periodic functions.

Coefficients are finite exponential sums ``sum a_n exp(i lambda_n z)`` on a
horizontal strip.  The package reduces equations to squarefree form, builds
rectangle covers avoiding the zeros of the leading coefficient and the
discriminant, tracks continuous root branches, and gathers finite evidence
that those branches are almost periodic.
"""

from .appoly import APPoly, discriminant, resultant, squarefree_reduce
from .apverify import (APReport, bohr_fourier_coefficient, find_almost_periods, pole_census,
                       round_trip_check, translate_gap_test, verify_branch_ap)
from .errors import APError
from .expsum import ExpSum, Strip
from .rootkit import RootBranch, continue_branch, estimate_nu, match_roots, roots_at
from .stripgeo import Rect, RectCover, build_cover, count_zeros_rect, locate_zeros

__all__ = [
    "APError", "APPoly", "APReport", "ExpSum", "Rect", "RectCover", "RootBranch", "Strip",
    "bohr_fourier_coefficient", "build_cover", "continue_branch", "count_zeros_rect",
    "discriminant", "estimate_nu", "find_almost_periods", "locate_zeros", "match_roots",
    "pole_census", "resultant", "round_trip_check", "roots_at", "squarefree_reduce",
    "translate_gap_test", "verify_branch_ap",
]

__version__ = "0.1.0"
