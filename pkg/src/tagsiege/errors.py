"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: validation/configuration problems are
exit 2, backend transport problems exit 3, model training problems exit 4.
"""

from __future__ import annotations


class TagSiegeError(Exception):
    """Base class for all package errors."""


class GraphValidationError(TagSiegeError):
    """A graph value violates an invariant (self-loop, bad label, ...)."""


class ParseError(TagSiegeError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path else ""
        super().__init__(f"{where}{message}")


class ShapeError(TagSiegeError):
    """Array or graph dimensions disagree."""


class BudgetError(TagSiegeError):
    """A perturbation exceeds its edit budget; names the offending node."""

    def __init__(self, message: str, node: int | None = None):
        self.node = node
        if node is not None:
            message = f"node {node}: {message}"
        super().__init__(message)


class PlanInconsistencyError(TagSiegeError):
    """A plan entry contradicts the graph it is applied to."""


class ConfigurationError(TagSiegeError):
    """Invalid or infeasible configuration."""


class DegenerateInputError(TagSiegeError):
    """Input is empty or otherwise carries no usable signal."""


class TemplateError(TagSiegeError):
    """Prompt template is missing a required placeholder or uses an unknown one."""


class IsolatedNodeError(TagSiegeError):
    """Operation requires a neighbor but the node has degree zero."""


class RetrievalExhaustedError(TagSiegeError):
    """Every retrieved candidate was filtered out (already adjacent, or the target)."""


class BackendError(TagSiegeError):
    """Attacker backend failed after its retry budget."""


class BackendExhaustedError(BackendError):
    """Every target was skipped; the attack produced no entries.

    Carries the (entry-less) plan so callers can still persist the skip list.
    """

    def __init__(self, message: str, plan=None):
        self.plan = plan
        super().__init__(message)


class TrainingError(TagSiegeError):
    """Model training could not run (e.g. empty train split)."""


class DegenerateVectorWarning(UserWarning):
    """Cosine over a zero vector; the value was pinned to maximal uncertainty."""
