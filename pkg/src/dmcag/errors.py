"""Exception hierarchy shared by all modules.

The CLI maps :class:`InputError` (and subclasses) to exit code 1 and
:class:`NumericalError` / :class:`TrainingError` to exit code 2.
"""


class DMCAGError(Exception):
    pass


class InputError(DMCAGError, ValueError):
    """Invalid argument, configuration or dataset."""


class ShapeError(InputError):
    """Array dimensions do not line up."""


class LoadError(InputError):
    """A dataset or checkpoint file could not be read."""


class NumericalError(DMCAGError, ArithmeticError):
    """Non-finite values, zero denominators or solver non-convergence."""


class TrainingError(NumericalError):
    def __init__(self, message, epoch=None, stage=None):
        self.epoch = epoch
        self.stage = stage
        prefix = f"[{stage}] " if stage else ""
        suffix = f" (epoch {epoch})" if epoch is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")


class RankDeficiencyWarning(UserWarning):
    """Fewer nonzero singular values than requested embedding columns."""


class DegenerateMetricWarning(UserWarning):
    pass
