"""Exception hierarchy for the bbstl toolkit.

Every error carries a short machine-readable ``code`` used by the CLI to
emit single-line ``error[CODE]: message`` diagnostics.
"""


class BbstlError(Exception):
    """Base class for all toolkit errors."""

    code = "Internal"

    def __init__(self, message=""):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return self.message or self.code


# --- signal / kernel construction ---------------------------------------

class NonPositiveStd(BbstlError):
    code = "NonPositiveStd"


class TruncationTooNarrow(BbstlError):
    code = "TruncationTooNarrow"


class WindowOutOfDomain(BbstlError):
    code = "WindowOutOfDomain"


class SignalShorterThanKernel(BbstlError):
    code = "SignalShorterThanKernel"


class CutoffAboveNyquist(BbstlError):
    code = "CutoffAboveNyquist"


class BadRange(BbstlError):
    code = "BadRange"


class DomainMismatch(BbstlError):
    code = "DomainMismatch"


class NonUniformGrid(BbstlError):
    code = "NonUniformGrid"


# --- formula parsing / validation ----------------------------------------

class FormulaSyntaxError(BbstlError):
    code = "SyntaxError"

    def __init__(self, message, position, expected=None):
        super().__init__(message)
        self.position = position
        self.expected = expected


class EmptyInterval(BbstlError):
    code = "EmptyInterval"


class NegativeBound(BbstlError):
    code = "NegativeBound"


class UnknownAtom(BbstlError):
    code = "UnknownAtom"


# --- monitoring -----------------------------------------------------------

class TimeOutOfValidDomain(BbstlError):
    code = "TimeOutOfValidDomain"


class SignalTooShortForFormula(BbstlError):
    code = "SignalTooShortForFormula"


class WindowLargerThanSignal(BbstlError):
    code = "WindowLargerThanSignal"


class EmptyDiscreteWindow(BbstlError):
    code = "EmptyDiscreteWindow"


class GridMismatch(BbstlError):
    code = "GridMismatch"


# --- operator fitting / frequency responses ------------------------------

class UnderdeterminedSystem(BbstlError):
    code = "UnderdeterminedSystem"


class RankDeficient(BbstlError):
    code = "RankDeficient"


class BadArity(BbstlError):
    code = "BadArity"


class OuterHasAtomFactors(BbstlError):
    code = "OuterHasAtomFactors"


class InnerHasNonzeroH0(BbstlError):
    code = "InnerHasNonzeroH0"


class SinceNotGfrfSupported(BbstlError):
    code = "SinceNotGfrfSupported"


class TrueNotApproximable(BbstlError):
    code = "TrueNotApproximable"


class SinceSamplingDisabled(BbstlError):
    code = "SinceSamplingDisabled"


class OrderTooHigh(BbstlError):
    code = "OrderTooHigh"


class GridTooLarge(BbstlError):
    code = "GridTooLarge"
