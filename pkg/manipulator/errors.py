"""
Exceptions for the flexible manipulator toolkit.

Every error raised by the library derives from ManipulatorError so that the
command-line layer can map families of failures onto exit codes.
"""


class ManipulatorError(Exception):
    """Base exception for manipulator modelling, synthesis and simulation errors."""
    pass


# Configuration

class ConfigError(ManipulatorError):
    """Base exception for configuration errors."""
    pass


class ConfigSyntaxError(ConfigError):
    """Exception for configuration files that cannot be parsed."""
    pass


class ConfigSemanticError(ConfigError):
    """Exception for configuration values that violate a model invariant."""
    pass


# Modal analysis

class ModalAnalysisError(ManipulatorError):
    """Base exception for modal analysis errors."""
    pass


class RootSearchExhausted(ModalAnalysisError):
    """Exception for a characteristic-equation scan that found too few roots."""
    pass


class DegenerateNullspace(ModalAnalysisError):
    """Exception for a boundary system whose nullity is not exactly one."""
    pass


# Model evaluation

class ModelError(ManipulatorError):
    """Base exception for plant model and control evaluation errors."""
    pass


class DimensionMismatch(ModelError, ValueError):
    """Exception for vectors or matrices of the wrong shape."""
    pass


class SingularMass(ModelError):
    """Exception for a mass matrix that cannot be inverted."""
    pass


class SingularGammaB(ModelError):
    """Exception for a sliding row whose product with B vanishes."""
    pass


# Observer synthesis

class SynthesisError(ManipulatorError):
    """Base exception for functional observer synthesis errors."""
    pass


class SpectraOverlap(SynthesisError):
    """Exception for observer dynamics sharing an eigenvalue with the plant."""
    pass


class Unrealizable(SynthesisError):
    """Exception for a functional that is not in the row space of [C; T]."""
    pass


class CompositeUnstable(SynthesisError):
    """Exception for a composite closed-loop matrix that is not Hurwitz."""
    pass


# Simulation

class SimulationError(ManipulatorError):
    """Base exception for closed-loop simulation errors."""
    pass


class Divergence(SimulationError):
    """Exception for a trajectory that leaves the divergence threshold."""
    pass


class StepTooLarge(SimulationError):
    """Exception for a step size that does not resolve the fastest mode."""
    pass


class NeverReached(SimulationError):
    """Exception for a sliding variable that never enters its band."""
    pass
