"""Boolean verdicts with numerical margins and an indeterminate band.

A verdict compares a nonnegative measure against a threshold: the tested
property holds when the measure is clearly below.  Verdicts whose measure
falls within a factor ``band`` (default 10) of the threshold are reported
indeterminate instead of being booleanized.
"""

from dataclasses import dataclass, field
from typing import Optional

_BAND = 10.0


@dataclass(frozen=True)
class Verdict:
    holds: Optional[bool]
    measure: float
    threshold: float
    band: float = _BAND
    detail: dict = field(default_factory=dict, compare=False)

    @property
    def indeterminate(self) -> bool:
        return self.holds is None

    @property
    def margin(self) -> float:
        """Factor by which the measure clears the threshold (>= 1 is clear)."""
        if self.measure <= 0.0:
            return float("inf")
        if self.threshold <= 0.0:
            return 0.0
        ratio = self.threshold / self.measure
        return ratio if ratio >= 1.0 else 1.0 / ratio

    @property
    def leaning(self) -> bool:
        """Best-guess boolean, also defined for indeterminate verdicts."""
        if self.holds is not None:
            return self.holds
        return self.measure < self.threshold


def from_measure(measure: float, threshold: float, band: float = _BAND,
                 **detail) -> Verdict:
    measure = float(measure)
    if measure < threshold / band:
        holds = True
    elif measure > threshold * band:
        holds = False
    else:
        holds = None
    return Verdict(holds, measure, threshold, band, dict(detail))


def conjunction(*verdicts: Verdict) -> Verdict:
    """Logical AND: false if any clearly fails, else indeterminate poisons."""
    for v in verdicts:
        if v.holds is False:
            return v
    for v in verdicts:
        if v.holds is None:
            return v
    return min(verdicts, key=lambda v: v.margin)
