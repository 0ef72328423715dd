"""Enumeration budget guard.

Exhaustive routines (index-vector enumeration, pair tables, ordering
enumeration) refuse to start when the number of cases exceeds the budget,
raising :class:`BudgetExceededError` instead of running for hours.  The
default of 10**7 cases can be overridden through the ``RESAMPLEKIT_BUDGET``
environment variable or per call.
"""

from __future__ import annotations

import os

DEFAULT_BUDGET = 10_000_000
_ENV_VAR = "RESAMPLEKIT_BUDGET"


class BudgetExceededError(RuntimeError):
    """An exhaustive enumeration would exceed the configured budget."""

    def __init__(self, needed: int, budget: int, what: str):
        self.needed = needed
        self.budget = budget
        self.what = what
        super().__init__(
            f"{what} needs {needed} cases, over the budget of {budget} "
            f"(raise via the {_ENV_VAR} environment variable)")


def enumeration_budget(override: int | None = None) -> int:
    """Resolve the active budget: explicit override, else env var, else default."""
    if override is not None:
        return int(override)
    raw = os.environ.get(_ENV_VAR)
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{_ENV_VAR} must be an integer, got {raw!r}") from None
        if value <= 0:
            raise ValueError(f"{_ENV_VAR} must be positive, got {value}")
        return value
    return DEFAULT_BUDGET


def check_budget(needed: int, what: str, budget: int | None = None) -> None:
    """Raise :class:`BudgetExceededError` if ``needed`` exceeds the budget."""
    limit = enumeration_budget(budget)
    if needed > limit:
        raise BudgetExceededError(needed, limit, what)
