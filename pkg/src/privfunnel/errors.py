"""Exception hierarchy shared by the solver, oracle and CLI."""


class PrivacyFunnelError(Exception):
    """Base class for every error raised by this package."""


class InputError(PrivacyFunnelError, ValueError):
    """Invalid user-supplied distribution, instance or configuration."""


class NegativeEntry(InputError):
    def __init__(self, where, index, value):
        self.index = index
        self.value = value
        super().__init__(f"{where} has negative entry {value!r} at index {index}")


class RowOrColumnSumNotOne(InputError):
    def __init__(self, where, index, deviation):
        self.index = index
        self.deviation = deviation
        super().__init__(f"{where}: sum at index {index} deviates from 1 by {deviation:.3e}")


class DimensionMismatch(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class InfeasibleThreshold(InputError):
    pass


class MissingColumn(InputError):
    pass


class EmptyFile(InputError):
    pass


class SupportMismatch(PrivacyFunnelError, ArithmeticError):
    """x * log(x / 0) with x > 0: the arguments do not share support."""


class AllWeightsZeroRow(PrivacyFunnelError, ArithmeticError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} has no column with positive weight")


class NoRoot(PrivacyFunnelError, ArithmeticError):
    """G(lambda) stays negative up to the lambda cap."""

    def __init__(self, g_at_cap, cap):
        self.g_at_cap = g_at_cap
        self.cap = cap
        super().__init__(f"G(lambda) = {g_at_cap:.3e} < 0 at lambda = {cap:.3e}; threshold unattainable")


class NewtonStall(PrivacyFunnelError, ArithmeticError):
    def __init__(self, lo, hi, g_lo, g_hi):
        self.bracket = (lo, hi)
        self.g_bracket = (g_lo, g_hi)
        super().__init__(
            f"lambda search did not converge; bracket [{lo:.6g}, {hi:.6g}] with G = ({g_lo:.3e}, {g_hi:.3e})"
        )


class TooLarge(PrivacyFunnelError):
    pass


EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2
EXIT_GUARD = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return EXIT_INPUT
    return EXIT_GUARD
