"""Exception types shared across the package.

Every failure mode that callers are expected to catch has its own class here,
so `except fibresplit.errors.X` never needs to pattern-match on messages.
"""


class FibresplitError(Exception):
    """Base class for all package errors."""


class SingularMatrix(FibresplitError):
    """Linear solve rejected: matrix singular or condition estimate over bound."""


class NoConvergence(FibresplitError):
    """Newton iteration failed to reach tolerance within the iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NonFiniteState(FibresplitError):
    """Integration produced a NaN or infinity in the state vector."""


class DomainError(FibresplitError):
    """Evaluation outside the admissible domain (log/sqrt of nonpositive, abs inside the slit)."""


class ExprSyntaxError(FibresplitError):
    """Malformed expression text. `offset` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(FibresplitError):
    """Expression uses a name not present in the variable context."""


class ArityError(FibresplitError):
    """Function called with the wrong number of arguments."""


class BasePointMismatch(FibresplitError):
    """Two tangent objects were combined but sit over different base points."""


class DimensionMismatch(FibresplitError):
    """Array or expression-list shape disagrees with the chart dimensions."""


class NotAffine(FibresplitError):
    """Splitting failed the affine-decomposition residual test."""


class NotWellDefined(FibresplitError):
    """Pointwise value depends on the arbitrary extension used to compute it."""


class NotSubducible(FibresplitError):
    """Restricted Lagrangian fails the defining relation or still depends on the fibre point."""


class NotPrincipal(FibresplitError):
    """Splitting coefficients are not invariant under the given fibre action."""


class SingularHessian(FibresplitError):
    """Fibre Hessian of the Lagrangian is singular at a sample point."""


class HypothesisFailed(FibresplitError):
    """A check's stated hypothesis does not hold on the input, so the conclusion is not tested."""


class BranchAmbiguity(FibresplitError):
    """Root-finding found a second solution branch within probe distance of the tracked one."""


class FlowEscape(FibresplitError):
    """Flow map left the admissible region before the requested time."""


class ParseError(FibresplitError):
    """Config file rejected. `line` is the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line
