"""Exception hierarchy shared by all modules."""


class DensityFTSError(Exception):
    """Base class for every error raised by the package."""


class DomainError(DensityFTSError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PanelParseError(DensityFTSError, ValueError):
    """A row of an input table could not be parsed."""

    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class RectangularityError(DensityFTSError, ValueError):
    """The panel is missing one or more (state, gender, year) cells."""

    def __init__(self, gaps):
        self.gaps = list(gaps)
        shown = ", ".join(f"({s}, {g}, {y})" for s, g, y in self.gaps[:10])
        more = f" and {len(self.gaps) - 10} more" if len(self.gaps) > 10 else ""
        super().__init__(f"panel is not rectangular; missing cells: {shown}{more}")


class ConfigError(DensityFTSError, ValueError):
    """Bad configuration key or value."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)


class NumericalError(DensityFTSError, ArithmeticError):
    """A numerical routine failed (e.g. the eigensolver did not converge)."""
