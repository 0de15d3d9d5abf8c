"""Exactly commuting unitaries near almost commuting ones.

The main entry points are :func:`approximate` (the full pipeline),
:func:`invariant_report`, :func:`build_homotopy`, :func:`make_instance`
and the command line program ``acu``.
"""

from .errors import AcuError, PreconditionError
from .gap_opening import PipelineReport, approximate, open_gap, rotate_double
from .generators import InstanceSpec, make_instance
from .homotopy import UnitaryPath, build_homotopy
from .invariants import invariant_report, isospec, voiculescu, winding_number
from .lin_oracle import commuting_gapped_unitaries, commuting_hermitian_pair
from .scalar_functions import arg_rho, plateau_bump

__all__ = [
    "AcuError",
    "InstanceSpec",
    "PipelineReport",
    "PreconditionError",
    "UnitaryPath",
    "approximate",
    "arg_rho",
    "build_homotopy",
    "commuting_gapped_unitaries",
    "commuting_hermitian_pair",
    "invariant_report",
    "isospec",
    "make_instance",
    "open_gap",
    "plateau_bump",
    "rotate_double",
    "voiculescu",
    "winding_number",
]

__version__ = "0.1.0"
