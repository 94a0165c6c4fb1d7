from typing import Any, Dict, List, Optional, Sequence


class WaveSpecError(Exception):
    """Base class of every error raised by wavespec."""

    def details(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": str(self)}


class ConfigError(WaveSpecError):
    pass


class AcceptanceError(WaveSpecError):
    def __init__(self, failed: Sequence[str]) -> None:
        super().__init__(f"acceptance targets missed: {', '.join(failed)}")
        self.failed = list(failed)


class ParabolicityError(WaveSpecError):
    """A state left the region where the diffusion matrix is strongly elliptic."""

    def __init__(
        self,
        message: str,
        *,
        location: Optional[float] = None,
        index: Optional[int] = None,
        state: Optional[Sequence[float]] = None,
    ) -> None:
        super().__init__(message)
        self.location = location
        self.index = index
        self.state = None if state is None else [float(s) for s in state]

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out.update(location=self.location, index=self.index, state=self.state)
        return out


class NumericalError(WaveSpecError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(
        self,
        message: str,
        *,
        residual: float = float("nan"),
        history: Optional[List[float]] = None,
    ) -> None:
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out.update(residual=self.residual, history=self.history)
        return out


class ParameterDomainError(NumericalError, ValueError):
    """Model parameters outside the admissible set, e.g. a trial continuation step."""

    def __init__(
        self,
        message: str,
        *,
        parameter: Optional[str] = None,
        value: float = float("nan"),
    ) -> None:
        super().__init__(message)
        self.parameter = parameter
        self.value = value

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out.update(parameter=self.parameter, value=self.value)
        return out


class SingularJacobianError(NumericalError):
    """Newton matrix is numerically singular, typically close to a fold."""


class StiffnessError(NumericalError):
    pass


class StiffFailureError(NumericalError):
    pass


class BracketError(NumericalError):
    def __init__(self, message: str, *, values: Optional[Sequence[float]] = None) -> None:
        super().__init__(message)
        self.values = None if values is None else [float(v) for v in values]


class CurveTrackingError(NumericalError):
    """A spectral curve lost its root while being traced."""


class UnreliableFitError(NumericalError):
    def __init__(self, message: str, *, coefficient: float, residual: float) -> None:
        super().__init__(message)
        self.coefficient = coefficient
        self.residual = residual


class FredholmError(NumericalError):
    pass


class PositivityError(NumericalError):
    def __init__(self, message: str, *, report: Dict[str, Any]) -> None:
        super().__init__(message)
        self.report = report

    def details(self) -> Dict[str, Any]:
        out = super().details()
        out.update(report=self.report)
        return out
