"""Finite-space laboratory for symmetric Markov semigroups, intersection
measures, moment formulas and large-deviation functionals."""

from ._iml import *  # noqa: F401,F403
from ._iml import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
