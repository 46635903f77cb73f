"""Planning and analysis of dynamic (in-road) EV charging on grid-like cities.

Road networks are modeled as Manhattan Poisson line processes whose lines
are marked charging with a location-dependent probability g(r).  The
package evaluates distance-to-charging and charged-share distributions in
closed form and by Monte Carlo, routes trips on real road graphs and
simulates battery state of charge.
"""

__version__ = "0.1.0"

from .errors import (CalibrationFailure, ChargegridError, ConditioningDegenerate,  # noqa: E402
                     FitFailure, IngestionError, InvalidParameter, NoClosedForm,
                     NumericFailure, RoutingFailure, SnapFailure)
from .placement import AcrossCenter, SourceDestDistribution, SourceDestPair  # noqa: E402
from .thinning import Gaussian, MultiCenterPowerLaw, PowerLaw, Uniform, eval_g  # noqa: E402
