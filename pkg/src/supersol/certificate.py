"""Outcome record of an existence-condition check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

CONDITION_IDS = (
    "prop31",
    "prop32",
    "condp",
    "supercritical_smth",
    "subcritical_suff",
    "necessary_cond",
    "global_condp",
    "supersolution_check",
)

# conditions that can be read on [0, inf)
GLOBAL_READING = {"prop31", "prop32", "condp", "global_condp"}


@dataclass(frozen=True)
class Certificate:
    """One checked condition.

    ``margin`` is how far inside the inequality the data sits (negative when
    the check fails); ``horizon`` is the time up to which the claim holds.
    """

    condition_id: str
    valid: bool
    horizon: float
    margin: float
    parameters: dict = field(default_factory=dict)
    trace: tuple = ()
    diagnostic: str = ""

    def __post_init__(self):
        if self.condition_id not in CONDITION_IDS:
            raise ValueError(f"unknown condition id {self.condition_id!r}")
        if self.valid and not self.margin >= 0:
            raise ValueError(f"valid certificate with negative margin {self.margin}")
        if math.isinf(self.horizon) and self.condition_id not in GLOBAL_READING:
            raise ValueError(f"{self.condition_id} has no global reading")

    @property
    def is_global(self) -> bool:
        return self.valid and math.isinf(self.horizon)

    def row(self) -> dict:
        p = self.parameters
        return {
            "condition_id": self.condition_id,
            "p": p.get("p", math.nan),
            "q": p.get("q", math.nan),
            "A": p.get("A", math.nan),
            "T": self.horizon,
            "valid": int(self.valid),
            "margin": self.margin,
        }
