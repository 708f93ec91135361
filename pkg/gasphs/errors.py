"""
Exception hierarchy shared by the library and the command line.
"""


class GasNetworkError(ValueError):
    """Base class for every model, solver and scenario error."""


class ModelValidityError(GasNetworkError):
    """A closure or assumption of the isothermal model is violated."""

    def __init__(self, message, node=None, time=None):
        self.node = node
        self.time = time
        if node is not None:
            message = f"{message} (node {node!r})"
        if time is not None:
            message = f"{message} at t = {time:.6g} s"
        super().__init__(message)


class ConvergenceError(GasNetworkError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None, condition=None):
        self.residual = residual
        self.iterations = iterations
        self.condition = condition
        details = []
        if iterations is not None:
            details.append(f"iterations={iterations}")
        if residual is not None:
            details.append(f"last residual={residual:.3e}")
        if condition is not None:
            details.append(f"jacobian condition={condition:.3e}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class TopologyError(GasNetworkError):
    """The network graph is inconsistent."""


class ScenarioError(GasNetworkError):
    """A scenario document does not match the schema."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        if path and line is not None:
            message = f"{path}:{line}: {message}"
        elif path:
            message = f"{path}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
