from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import pandas as pd

from .. import constants
from ..constants import GapKind
from ..game import DeterministicPolicy


@dataclass(frozen=True)
class GapReport:
    """
    Equilibrium gap together with the deviation that attains it.

    ``recommendation`` is the index of the recommended policy the witness deviates from (CE gaps only).
    """

    kind: GapKind
    value: float
    witness: Optional[DeterministicPolicy] = None
    recommendation: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the report."""
        return {
            "kind": self.kind.value,
            "value": self.value,
            "witness": None if self.witness is None else self.witness.to_list(),
            "recommendation": self.recommendation,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GapReport":
        """Rebuild a report written by :meth:`to_dict`."""
        witness = data.get("witness")
        return cls(
            kind=GapKind(data["kind"]),
            value=float(data["value"]),
            witness=None if witness is None else DeterministicPolicy(witness),
            recommendation=data.get("recommendation"),
        )


class GapCurve:
    """Gap-versus-iteration table of one run."""

    metrics_val: pd.DataFrame

    def __init__(self, algorithm: str, seed: Optional[int] = None):
        """
        Initialize a GapCurve.

        :param algorithm: name written to the algorithm column
        :param seed: seed written to the seed column
        """
        self.algorithm = algorithm
        self.seed = seed
        self._rows: List[Dict[str, Any]] = []
        self.metrics_val = pd.DataFrame(columns=constants.CURVE_COLUMNS)

    def add(self, iteration: int, wall_time_s: float, gap: float) -> None:
        """Append one point."""
        self._rows.append(
            {
                "iteration": iteration,
                "wall_time_s": wall_time_s,
                "gap": gap,
                "algorithm": self.algorithm,
                "seed": self.seed,
            }
        )
        self.metrics_val = pd.DataFrame(self._rows, columns=constants.CURVE_COLUMNS)

    @property
    def final_gap(self) -> float:
        """Gap of the last point, NaN for an empty curve."""
        if self.metrics_val.empty:
            return float("nan")
        return float(self.metrics_val["gap"].iloc[-1])

    def write_to_file(self, file_path: str):
        """Write to file_path."""
        self.metrics_val.to_csv(file_path, index=False)
