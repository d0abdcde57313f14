"""Exception hierarchy.

The CLI maps the three families to exit codes: configuration errors (2),
data errors (3) and numerical errors (4).
"""


class QmiError(Exception):
    exit_code = 1


class ConfigError(QmiError):
    exit_code = 2


class DataError(QmiError):
    exit_code = 3


class NumericalError(QmiError):
    exit_code = 4


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing required column: {name}")
        self.name = name


class MalformedRow(DataError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ParseThresholdExceeded(DataError):
    def __init__(self, n_bad, n_total, errors=()):
        super().__init__(f"{n_bad} of {n_total} rows malformed (limit 10%)")
        self.n_bad = n_bad
        self.n_total = n_total
        self.errors = list(errors)


class UnknownTeamCode(DataError):
    pass


class InconsistentPossession(DataError):
    pass


class UnobservedPair(DataError):
    pass


class AllCellsMissing(DataError):
    pass


class EmptyRegion(DataError):
    pass


class TauOffGrid(ConfigError):
    def __init__(self, tau):
        super().__init__(f"tau {tau!r} is not on the 0.20..0.80 grid")
        self.tau = tau


class InvalidKernel(ConfigError):
    pass


class SingularSystem(NumericalError):
    pass


class RankDeficientDesign(NumericalError):
    pass


class ReplicateDegenerate(NumericalError):
    def __init__(self, b, reason):
        super().__init__(f"replicate {b}: {reason}")
        self.b = b
        self.reason = reason


class UnpairedInputs(ConfigError):
    pass
