from __future__ import annotations

import logging
from typing import Dict, Union

import numpy as np

from ..models import Trajectory

POSITIVITY_TOL = 1e-9
_logger = logging.getLogger(__name__)


def check_trajectory(trajectory: Trajectory, tol: float = POSITIVITY_TOL) -> Dict[str, Union[int, float]]:
    """Return a count of detected issues for quick health checks."""
    issues: Dict[str, Union[int, float]] = {
        "positivity_violations": 0,
        "population_out_of_range": 0,
        "non_finite": 0,
        "max_violation": 0.0,
    }
    values = trajectory.values
    finite = np.all(np.isfinite(values), axis=1)
    issues["non_finite"] = int(np.count_nonzero(~finite))

    rho_aa = values[finite, 0]
    coherence = np.hypot(values[finite, 1], values[finite, 2])
    out_of_range = (rho_aa < -tol) | (rho_aa > 0.5 + tol)
    issues["population_out_of_range"] = int(np.count_nonzero(out_of_range))

    margins = np.stack([-rho_aa, rho_aa - 0.5, coherence - rho_aa], axis=1)
    violation = margins.max(axis=1, initial=0.0)
    issues["positivity_violations"] = int(np.count_nonzero(violation > tol))
    issues["max_violation"] = float(violation.max(initial=0.0))

    if any(issues[key] for key in ("positivity_violations", "population_out_of_range", "non_finite")):
        _logger.warning(
            "Trajectory diagnostics found issues",
            extra={
                "method": trajectory.method.value,
                "params": trajectory.params.as_dict() if trajectory.params else None,
                **issues,
            },
        )
    return issues


__all__ = ["POSITIVITY_TOL", "check_trajectory"]
