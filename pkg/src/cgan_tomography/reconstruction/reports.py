"""Per-run trajectories shared by every reconstructor."""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..physics.states import DensityMatrix

REPORT_COLUMNS = ["iteration", "fidelity", "g_loss", "d_loss", "l1", "wall_ms", "log_likelihood"]


@dataclass
class RunReport:
    """Logged rows of one reconstruction plus its final state and effective configuration.

    Columns a method does not produce (adversarial losses for iMLE, fidelity without a target)
    are NaN.
    """

    method: str
    config: dict = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    final_state: DensityMatrix | None = None
    iterations: int = 0

    def log(self, iteration: int, **values) -> dict:
        unknown = set(values) - set(REPORT_COLUMNS)
        assert not unknown, f"Unknown report columns {sorted(unknown)}."
        fidelity = values.get("fidelity")
        if fidelity is not None:
            assert 0.0 <= fidelity <= 1.0 + 1e-9, f"Fidelity {fidelity} is outside [0, 1]."
        row = {column: np.nan for column in REPORT_COLUMNS}
        row.update({key: (np.nan if value is None else float(value)) for key, value in values.items()})
        row["iteration"] = int(iteration)
        self.rows.append(row)
        return row

    @property
    def final_fidelity(self) -> float:
        if not self.rows:
            return np.nan
        return self.rows[-1]["fidelity"]

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS).astype({"iteration": int})

    def first_iteration_reaching(self, threshold: float) -> int | None:
        """First logged iteration whose fidelity is at least ``threshold``."""
        for row in self.rows:
            if row["fidelity"] >= threshold:
                return row["iteration"]
        return None
