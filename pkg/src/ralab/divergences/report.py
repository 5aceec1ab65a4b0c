"""Named bundle of distance estimates between two distributions."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class DivergenceReport:
    ipm: float
    ipm_stderr: float
    w1_exact: float | None = None
    w2_closed: float | None = None
    kl_forward: float | None = None
    kl_backward: float | None = None
    rademacher: float | None = None
    rademacher_stderr: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        tol = 3.0 * self.ipm_stderr + 1e-9
        for name in ("ipm", "w1_exact", "w2_closed", "kl_forward",
                     "kl_backward", "rademacher"):
            val = getattr(self, name)
            if val is not None and val < -tol:
                raise ValueError(f"{name} = {val} is negative beyond noise tolerance")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "DivergenceReport":
        return DivergenceReport(**json.loads(text))
