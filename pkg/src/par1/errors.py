"""Exception types raised across the package."""

from __future__ import annotations


class Par1Error(Exception):
    """Base class for all package errors."""


class ConfigError(Par1Error, ValueError):
    """Invalid model, innovation or experiment configuration."""


class NotExplosive(Par1Error, ValueError):
    """The operation needs |phi| > 1."""

    def __init__(self, phi: float):
        super().__init__(f"operation requires |phi| > 1, got phi={phi!r}")
        self.phi = phi


class OverflowAtStep(Par1Error, OverflowError):
    """The simulated path left the finite double range."""

    def __init__(self, step: int):
        super().__init__(f"path overflowed at step k={step}; reduce n_cycles or |phi|")
        self.step = step


class ZeroDenominator(Par1Error, ZeroDivisionError):
    """A least squares denominator is exactly zero."""

    def __init__(self, phase: int | None = None):
        where = "lag-P regression" if phase is None else f"phase r={phase}"
        super().__init__(f"zero least squares denominator ({where})")
        self.phase = phase


class NotApplicable(Par1Error):
    """The requested diagnostic is undefined for the given input."""
