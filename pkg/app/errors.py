"""
Error hierarchy for the solver stack.
Everything raised on purpose derives from NashAdmmError so the CLI and the
HTTP layer can map failures to exit codes / status codes in one place.
"""
from __future__ import annotations
from typing import Optional


class NashAdmmError(RuntimeError):
    pass


# ---------- graph

class GraphError(NashAdmmError):
    pass


class InvalidEdgeError(GraphError):
    pass


class IsolatedVertexError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


# ---------- games

class GameError(NashAdmmError):
    pass


class InvalidGameError(GameError):
    pass


class GameDomainError(GameError):
    """Gradient or cost evaluated outside the game's domain (e.g. a saturated link)."""

    def __init__(self, message: str, *, player: Optional[int] = None, link: Optional[int] = None):
        super().__init__(message)
        self.player = player
        self.link = link


# ---------- solvers

class ParameterError(NashAdmmError, ValueError):
    pass


class NonConvergenceError(NashAdmmError):
    def __init__(self, message: str, *, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepError(NashAdmmError):
    """A solver step failed; wraps the underlying domain error with the iteration index."""

    def __init__(self, message: str, *, iteration: int, player: Optional[int] = None, link: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration
        self.player = player
        self.link = link


class UnsupportedTraceError(NashAdmmError):
    pass


# ---------- config

class ConfigError(NashAdmmError):
    def __init__(self, message: str, *, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
