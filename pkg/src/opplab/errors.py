"""Exception types shared across the package."""


class OppLabError(Exception):
    """Base class for all library errors."""


class DegenerateForm(OppLabError):
    """Quadratic form is singular or identically zero."""


class NotIndefinite(OppLabError):
    """Operation requires an indefinite (signature (1,2)) form."""


class NotNormalized(OppLabError):
    """Operation requires a det-1, signature-(1,2) form."""


class DomainError(OppLabError):
    """Arguments outside an operation's stated domain."""


class NotInH(OppLabError):
    """Matrix does not preserve the model form 2xz - y^2."""


class NotMember(OppLabError):
    """Query point is not an element of the point cloud."""


class CoplanarInput(OppLabError):
    """Three of the supplied vectors are coplanar."""


class SingularBasis(OppLabError):
    """Chosen triple of vectors is not a basis of R^3."""


class IntegralizationError(OppLabError):
    """Rescaled Gram matrix is not close enough to an integer matrix."""


class BudgetExceeded(OppLabError):
    """Enumeration budget exceeded."""


class OracleTooLarge(BudgetExceeded):
    """Brute-force oracle refused an input that is too large."""
