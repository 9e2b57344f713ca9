"""Exception types shared across the package."""


class CapacityError(Exception):
    """Requested discretization would exceed the vertex budget."""


class FieldEvaluationError(Exception):
    """A predictor returned a non-finite value at some vertex."""


class CsvFormatError(Exception):
    """A dataset CSV file is malformed; message carries the line number."""


class DivergenceError(Exception):
    """Training produced a non-finite objective."""

    def __init__(self, iteration: int, learning_rate: float):
        self.iteration = iteration
        self.learning_rate = learning_rate
        super().__init__(
            f"objective became non-finite at iteration {iteration} "
            f"(learning rate {learning_rate:g})"
        )
