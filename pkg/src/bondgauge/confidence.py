from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ConfidenceInterval:
    """Closed interval ``[lower, upper]`` reported at confidence ``level``.

    ``method`` names the construction (``"ssb"``, ``"ls"``, ``"cp"``,
    ``"propagated"``...). ``flagged`` marks degenerate fallbacks, such as a
    least-squares interval that missed the box entirely.
    """

    lower: float
    upper: float
    level: float
    method: str = ""
    flagged: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"interval lower {self.lower} exceeds upper {self.upper}")
        if not 0.0 < self.level < 1.0:
            raise ValueError("confidence level must lie in (0, 1)")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "method": self.method,
            "flagged": self.flagged,
        }
