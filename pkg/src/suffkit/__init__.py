"""
suffkit: comparison of classical and quantum statistical models.

Decides sufficiency between classical models (transition matrices), quantum
models and bipartite information structures (CPTP maps and statistical
morphisms), and backs every negative verdict with a decision problem or game
on which the weaker side provably loses.
"""

from ._config import TOL, Tolerances, default_solver_tol
from .channels import *  # noqa: F401,F403
from .classical import *  # noqa: F401,F403
from .exceptions import (
    CapacityError,
    CertificateInvalidError,
    NonCommutingError,
    NotExtendableError,
    NotInformationallyCompleteError,
    NumericalError,
    PreconditionError,
    ShapeError,
    SuffkitError,
    ValidationError,
)
from .frames import *  # noqa: F401,F403
from .linalg import *  # noqa: F401,F403
from .quantum import *  # noqa: F401,F403
from .structures import *  # noqa: F401,F403

__version__ = "0.1.0"
