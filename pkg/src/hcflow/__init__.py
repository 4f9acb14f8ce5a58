"""hcflow: constrained curvature flows of h-convex hypersurfaces in H^{n+1}.

Subpackages:
    symfunc     -- admissible speed functions f, duals, derivative bundles
    hsurface    -- radial-graph and support-function hypersurface states
    measures    -- areas, curvature integrals, quermassintegrals, radii
    flowcore    -- the constrained flow: global term, RK4 stepping, monitors
    diagnostics -- sphere deviation, decay-rate fits, reflection functional
    cli         -- batch front-end (run / sweep / check-speed / sphere-table / render)
"""

from . import errors
from .symfunc import SpeedFunction, eval_f, eval_dual, derivatives, check_admissible

__version__ = "0.1.0"

__all__ = [
    "errors",
    "SpeedFunction",
    "eval_f",
    "eval_dual",
    "derivatives",
    "check_admissible",
    "__version__",
]
