"""Exception taxonomy: one base class, one subclass per failure family."""


class MixipwError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MixipwError):
    """User-supplied data or configuration is invalid."""


class ParseError(InputError):
    """A text input (data file, roles file, report file) could not be parsed."""


class ParameterError(MixipwError):
    """Model parameters violate a structural requirement (shape, sign, zero row)."""


class NumericalError(MixipwError):
    """A numeric routine failed (underflow of every mixture component, non-PD system)."""


class DegenerateClassError(NumericalError):
    """A logit class carries (numerically) zero total weight."""


class CollapsedComponentError(NumericalError):
    """A mixture component lost essentially all responsibility mass."""


class FitFailureError(MixipwError):
    """Every restart of an iterative fit failed."""


class PositivityError(MixipwError):
    """An inverse-probability denominator underflowed with no floor configured."""


class BootstrapFailureError(MixipwError):
    """Too many bootstrap replicates failed to fit."""


class InternalError(MixipwError):
    """Invariant violated inside the package; indicates a bug, not bad input."""
