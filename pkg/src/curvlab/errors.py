"""Exception types raised by the field operations and the flow drivers."""


class CurvlabError(Exception):
    """Base class for all errors raised by this package."""


class SingularMetric(CurvlabError):
    """A metric field violates the SPD floor (smallest nodal eigenvalue too small)."""


class BadExponent(CurvlabError):
    """Sobolev exponent p <= n requested without the explicit override."""


class KernelTooWide(CurvlabError):
    """Mollification width too large for the periodic kernel construction."""


class CannotAchieveFairness(CurvlabError):
    """No kernel width down to twice the grid spacing produced a fair background."""


class EmptyFamily(CurvlabError):
    """A test-function family is required to be nonempty."""


class BlowUp(CurvlabError):
    """Flow state left the resolvable regime (SPD lost or curvature guard hit)."""


class UnstableStep(CurvlabError):
    """A single time step grew the state norm beyond the stability guard."""


class CollapseTime(CurvlabError):
    """Evaluation past the collapse time of the positive-bound barrier."""


class BadScenario(CurvlabError):
    """Unknown scenario name or parameters failing the generator schema."""
