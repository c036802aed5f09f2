"""
rifscope: rational inner functions on the bidisk

    φ(z) = η · z₁ᴹ z₂ᴺ · p̃(z) / p(z)

Find the boundary singularities of φ on 𝕋², trace its unimodular level curves,
measure contact orders and intersection multiplicities, and build new examples
by embedding, gluing and transfer-function realisation.

Quick start
-----------
  pip install rifscope
  rifscope fixtures
  rifscope analyze --fixture faveform

Library
-------
  from rifscope import catalog, singularities, contact_order_at
  f = catalog("mbm")
  for sp in singularities(f):
      print(sp.tau, contact_order_at(f, sp.tau)["K_tau"])
"""

__version__ = "0.1.0"

from rifscope.construct import (
    InterlaceVerdict, catalog, catalog_names, embed, glue, half_plane_pair, interlace_1d,
    interlace_2d, random_symmetric, resolvent_entry, rif_from_transfer,
)
from rifscope.contact import (
    OrderFit, branch_bijection_check, contact_order_at, fit_order, global_contact_order,
    lp_threshold, order_of_contact,
)
from rifscope.intersect import (
    MultiplicityReport, bezout_audit, co_vs_im_bound, contact_sum_identity,
    intersection_multiplicity, resultant,
)
from rifscope.levelcurves import (
    LevelCurve, Portrait, blaschke_identity_check, components, horn_check, portrait, trace_level,
)
from rifscope.poly2 import BiPoly, UniPoly, essential_symmetry, reflect
from rifscope.rif import Rif, SingularPoint, nontangential_value, singularities, validate
from rifscope.roots import Branch, RootSet, roots_univariate, track_family

__all__ = [
    "__version__",
    "BiPoly", "UniPoly", "essential_symmetry", "reflect",
    "RootSet", "Branch", "roots_univariate", "track_family",
    "Rif", "SingularPoint", "validate", "singularities", "nontangential_value",
    "LevelCurve", "Portrait", "trace_level", "components", "horn_check",
    "blaschke_identity_check", "portrait",
    "OrderFit", "fit_order", "order_of_contact", "contact_order_at", "global_contact_order",
    "lp_threshold", "branch_bijection_check",
    "MultiplicityReport", "resultant", "intersection_multiplicity", "bezout_audit",
    "contact_sum_identity", "co_vs_im_bound",
    "InterlaceVerdict", "embed", "glue", "interlace_1d", "interlace_2d", "half_plane_pair",
    "rif_from_transfer", "resolvent_entry", "catalog", "catalog_names", "random_symmetric",
]
