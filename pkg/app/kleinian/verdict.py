# app/kleinian/verdict.py
from dataclasses import dataclass
from enum import Enum


class VerdictState(str, Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class Verdict:
    """Three-valued membership result.

    `margin` is the distance of the decisive quantity from its threshold after
    subtracting accumulated error. It is positive exactly when the state is
    Inside or Outside.
    """

    state: VerdictState
    margin: float

    @classmethod
    def inside(cls, margin: float) -> "Verdict":
        return cls(VerdictState.INSIDE, float(margin))

    @classmethod
    def outside(cls, margin: float) -> "Verdict":
        return cls(VerdictState.OUTSIDE, float(margin))

    @classmethod
    def uncertain(cls, margin: float) -> "Verdict":
        return cls(VerdictState.UNCERTAIN, -abs(float(margin)))

    @property
    def is_inside(self) -> bool:
        return self.state is VerdictState.INSIDE

    @property
    def is_outside(self) -> bool:
        return self.state is VerdictState.OUTSIDE

    @property
    def is_uncertain(self) -> bool:
        return self.state is VerdictState.UNCERTAIN

    def to_dict(self) -> dict:
        return {"state": self.state.value, "margin": self.margin}
