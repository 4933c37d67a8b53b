"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PriorFlowError(Exception):
    """Base class for all domain errors raised by priorflow."""


class ConfigError(PriorFlowError):
    """Configuration file or value is invalid."""


class DuplicateRoleName(ConfigError):
    pass


class NoTerminatingRole(ConfigError):
    pass


class UnknownRole(PriorFlowError):
    pass


class EmptyActionSet(PriorFlowError):
    pass


class NonFiniteReward(PriorFlowError):
    pass


class SchemaViolation(PriorFlowError):
    """A persisted document does not match its documented schema."""


class IoFailure(PriorFlowError):
    pass


# agent protocol

class NoMarkerFound(PriorFlowError):
    pass


class UnknownRoleName(PriorFlowError):
    pass


class MissingPlaceholder(PriorFlowError):
    pass


class InvalidNextNode(PriorFlowError):
    """The agent picked a node that was not offered to it."""


class AgentBackendFailure(PriorFlowError):
    pass


class Timeout(AgentBackendFailure):
    pass


class TransportFailure(AgentBackendFailure):
    pass


class NonRetryableApiError(AgentBackendFailure):
    pass


# bench

class ScenarioInvalid(ConfigError):
    pass


class EmptyInput(PriorFlowError):
    pass


class NonConvergent(PriorFlowError):
    pass
