"""Exception types shared across the package."""


class DataError(Exception):
    """A file or external input is malformed, inconsistent, or missing."""


class InvariantError(Exception):
    """An internal consistency check failed; indicates a bug, not bad input."""


class RankDeficiencyError(ValueError):
    """Orthonormalization hit a (near-)linearly-dependent row.

    Attributes:
        row: index of the offending row in the input matrix.
    """

    def __init__(self, row: int, norm: float):
        self.row = row
        self.norm = norm
        super().__init__(
            f"row {row} is linearly dependent on earlier rows "
            f"(residual norm {norm:.3e} < 1e-10)"
        )
