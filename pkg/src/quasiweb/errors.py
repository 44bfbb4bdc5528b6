class QuasiwebError(Exception):
    pass


class SingularPoint(QuasiwebError, ValueError):
    """A denominator fell below the regularity guard."""


class NotAQuasigroup(QuasiwebError):
    """Some first partial vanishes identically, so the map is not solvable."""

    def __init__(self, indices, message: str | None = None):
        self.indices = tuple(sorted(indices))
        super().__init__(
            message
            or f"not a quasigroup: dF/dx_i is identically zero for i in {list(self.indices)}"
        )


class InvalidStructure(QuasiwebError, ValueError):
    pass


class NotReducibleBlock(QuasiwebError, ValueError):
    pass


class NoRootsFound(QuasiwebError):
    pass
