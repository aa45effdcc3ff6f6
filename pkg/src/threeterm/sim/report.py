"""Per-trial outcome records and typicality tolerances."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SimParams:
    """One user-set tolerance ``delta`` expanded into the ordered family the scheme needs.

    Source typicality is tightest, encoding sits at ``delta`` and codebook
    generation and decoding are looser by ``ratio``. ``mode`` selects how
    codewords are drawn: ``"exact"``, ``"rejection"`` or ``"auto"``.
    """

    delta: float = 1.0
    ratio: float = 2.0
    mode: str = "auto"
    max_attempts: int = 200

    def __post_init__(self):
        if not self.delta > 0 or not self.ratio >= 1:
            raise ValueError("need delta > 0 and ratio >= 1")
        if self.mode not in ("auto", "exact", "rejection"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")

    @property
    def source(self) -> float:
        return self.delta / self.ratio

    @property
    def encode(self) -> float:
        return self.delta

    @property
    def codebook(self) -> float:
        return self.delta * self.ratio

    @property
    def decode(self) -> float:
        return self.delta * self.ratio


@dataclass
class TrialReport:
    events: dict[str, bool]
    recovered_indices_correct: dict[str, bool]
    empirical_distortions: dict[str, float] = field(default_factory=dict)
    fallbacks: int = 0

    @property
    def failed(self) -> bool:
        """Some decoder did not recover the transmitted indices."""
        return not all(self.recovered_indices_correct.values())

    @property
    def any_event(self) -> bool:
        return any(self.events.values())

    def to_dict(self) -> dict:
        return {"events": dict(self.events), "recovered": dict(self.recovered_indices_correct),
                "distortions": dict(self.empirical_distortions), "fallbacks": self.fallbacks,
                "failed": self.failed, "any_event": self.any_event}
