"""Presets binding each reproducible figure to the operations that generate its data."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .. import __version__
from ..errors import PanelUnavailable, VSystemError
from ..models import VParams
from ..utils.tables import format_value, write_csv, write_json
from . import analytic, generator, sweep
from .regime import slope_f
from .spectral import critical_p, eigenvalues_cardano

FIGURE_IDS = ("2a", "2b", "3a", "3b", "4a", "4b", "5", "6a", "6b", "7", "8", "9", "10")
MAP_POINTS = 41
CURVE_POINTS = 81
TRAJECTORY_NBAR = 1e3
_logger = logging.getLogger(__name__)


def _point(delta: Any, p: Any, nbar: Any) -> Dict[str, Any]:
    """Panel parameters; a two-item list stands for a swept range, a string for a derived value."""
    return {"gamma": 1.0, "delta": delta, "p": p, "nbar": nbar}


@dataclass
class Panel:
    figure: str
    name: str
    quantity: str
    columns: Tuple[str, ...]
    rows: List[Tuple[Any, ...]]
    params: Dict[str, Any] = field(default_factory=dict)
    method: str = ""

    @property
    def stem(self) -> str:
        return f"fig{self.figure}_{self.name}" if self.name else f"fig{self.figure}"


def _map_panels(
    figure: str,
    quantity: sweep.Quantity,
    nbar: Tuple[float, float],
    delta: Tuple[float, float],
    workers: Optional[int],
) -> List[Panel]:
    grid = sweep.GridSpec(
        axis1=sweep.Axis(name="nbar", min=nbar[0], max=nbar[1], points=MAP_POINTS, spacing="log"),
        axis2=sweep.Axis(name="delta_over_gamma", min=delta[0], max=delta[1], points=MAP_POINTS, spacing="log"),
        quantity=quantity,
        fixed={"p": 1.0},
    )
    table = sweep.run(grid, workers=workers)
    rows = [(row.axis1, row.axis2, row.value, row.error) for row in table.rows]
    return [
        Panel(
            figure=figure,
            name="",
            quantity=quantity.value,
            columns=table.columns,
            rows=rows,
            params=_point(list(delta), 1.0, list(nbar)),
            method="sweep",
        )
    ]


def _regime_large(workers: Optional[int]) -> List[Panel]:
    return _map_panels("2a", sweep.Quantity.REGIME, (10.0, 1e4), (1.0, 1e4), workers)


def _regime_small(workers: Optional[int]) -> List[Panel]:
    return _map_panels("2b", sweep.Quantity.REGIME, (1e-3, 1.0), (1e-2, 2.0), workers)


def _discriminant_large(workers: Optional[int]) -> List[Panel]:
    return _map_panels("3a", sweep.Quantity.DISCRIMINANT, (10.0, 1e4), (1.0, 1e4), workers)


def _discriminant_small(workers: Optional[int]) -> List[Panel]:
    return _map_panels("3b", sweep.Quantity.DISCRIMINANT, (1e-3, 1.0), (1e-2, 2.0), workers)


def _slope(workers: Optional[int]) -> List[Panel]:
    rows = [(float(p), slope_f(float(p))) for p in np.linspace(0.0, 1.0, 101)]
    params = _point("boundary", [0.0, 1.0], math.inf)
    return [Panel("4a", "", "slope_f", ("p", "f"), rows, params, "closed_form")]


def _epsilon(workers: Optional[int]) -> List[Panel]:
    rows = []
    for y in np.geomspace(1e-2, 1e2, CURVE_POINTS):
        rows.append((float(y), 1.0 - critical_p(TRAJECTORY_NBAR, float(y))))
    return [
        Panel(
            "4b",
            "",
            "epsilon",
            ("delta_over_gamma", "epsilon"),
            rows,
            _point([1e-2, 1e2], "critical", TRAJECTORY_NBAR),
            "brentq",
        )
    ]


def _zterms(workers: Optional[int]) -> List[Panel]:
    table = sweep.zjk_magnitudes(np.linspace(0.2, 1.0, CURVE_POINTS), TRAJECTORY_NBAR, 0.1)
    panels = []
    for j, name in enumerate("abc", start=1):
        rows = [(float(p), *map(float, table.magnitudes[index, j - 1])) for index, p in enumerate(table.p)]
        panels.append(
            Panel(
                "5",
                name,
                f"z{j}k_magnitude",
                ("p", f"z{j}0", f"z{j}1_x", f"z{j}2_x2"),
                rows,
                _point(0.1, [0.2, 1.0], TRAJECTORY_NBAR),
                "series",
            )
        )
    return panels


def _eigenvalue_panel(figure: str, p: float) -> List[Panel]:
    rows = []
    for y in np.geomspace(1e-2, 1e2, CURVE_POINTS):
        lambdas = eigenvalues_cardano(VParams(delta=float(y), p=p, nbar=TRAJECTORY_NBAR)).lambdas
        rows.append((float(y), *(float(abs(lam)) for lam in lambdas)))
    return [
        Panel(
            figure,
            "",
            "lambda_magnitude",
            ("delta_over_gamma", "lambda1", "lambda2", "lambda3"),
            rows,
            _point([1e-2, 1e2], p, TRAJECTORY_NBAR),
            "cardano",
        )
    ]


def _coefficients_odd(workers: Optional[int]) -> List[Panel]:
    columns = ("p",) + tuple(f"{x}{i}_over_T1" for x in "ABC" for i in (1, 3, 5))
    rows = []
    for p in np.linspace(0.2, 1.0, CURVE_POINTS):
        c = analytic.coeffs(float(p))
        rows.append((float(p), *(float(v / c.t1) for values in (c.A, c.B, c.C) for v in values[0::2])))
    return [Panel("7", "", "coefficients_odd", columns, rows, _point("any", [0.2, 1.0], "any"), "cofactors")]


def _coefficients_even(workers: Optional[int]) -> List[Panel]:
    y = 1e2
    s = (y / TRAJECTORY_NBAR) ** 2
    columns = ("p",) + tuple(f"{x}{i}_over_T" for x in "ABC" for i in (2, 4, 6))
    rows = []
    for p in np.linspace(0.2, 1.0, CURVE_POINTS):
        c = analytic.coeffs(float(p))
        det = c.t1 + c.t2 * s
        rows.append((float(p), *(float(v / det) for values in (c.A, c.B, c.C) for v in values[1::2])))
    return [
        Panel("8", "", "coefficients_even", columns, rows, _point(y, [0.2, 1.0], TRAJECTORY_NBAR), "cofactors")
    ]


def _trajectory_panels(figure: str, delta_over_gamma: float) -> List[Panel]:
    panels = []
    components = (("rho_aa", 0), ("re_rho_ab", 1), ("im_rho_ab", 2))
    names = iter("abcdef")
    for p in (1.0, 0.9):
        params = VParams(delta=delta_over_gamma, p=p, nbar=TRAJECTORY_NBAR)
        t_end = 10.0 * generator.timescales(params)[1]
        times = generator.default_time_grid(params, t_end)
        exact = generator.propagate_exact(params, None, times)
        closed, form = analytic.analytic_auto(params, times)
        for label, column in components:
            rows = [
                (float(t), float(exact.values[i, column]), float(closed.values[i, column]))
                for i, t in enumerate(times)
            ]
            panels.append(
                Panel(
                    figure,
                    next(names),
                    label,
                    ("t", "exact", "analytic"),
                    rows,
                    {**params.as_dict(), "branch": form.branch.value if form.branch else None},
                    f"exact_duhamel+{form.method.value}",
                )
            )
    return panels


FIGURES: Dict[str, Callable[[Optional[int]], List[Panel]]] = {
    "2a": _regime_large,
    "2b": _regime_small,
    "3a": _discriminant_large,
    "3b": _discriminant_small,
    "4a": _slope,
    "4b": _epsilon,
    "5": _zterms,
    "6a": lambda workers: _eigenvalue_panel("6a", 1.0),
    "6b": lambda workers: _eigenvalue_panel("6b", 0.9),
    "7": _coefficients_odd,
    "8": _coefficients_even,
    "9": lambda workers: _trajectory_panels("9", 10.0),
    "10": lambda workers: _trajectory_panels("10", 0.1),
}


def build_panels(figure: str, workers: Optional[int] = None) -> List[Panel]:
    if figure not in FIGURES:
        raise PanelUnavailable(f"no preset for figure {figure!r}", figure=figure)
    try:
        return FIGURES[figure](workers)
    except PanelUnavailable:
        raise
    except VSystemError as exc:
        raise PanelUnavailable(f"figure {figure}: {exc}", figure=figure) from exc


def _header_value(value: Any) -> Any:
    if isinstance(value, list):
        return ":".join(format_value(item) for item in value)
    return value


def write_panel(panel: Panel, out_dir: Path, run_id: Optional[str] = None) -> Tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    metadata = {
        "tool": "vsystem",
        "version": __version__,
        "figure": panel.figure,
        "panel": panel.name or "-",
        "quantity": panel.quantity,
        "method": panel.method,
        **{key: _header_value(value) for key, value in panel.params.items()},
    }
    if run_id:
        metadata["run_id"] = run_id
    csv_path = out_dir / f"{panel.stem}.csv"
    json_path = out_dir / f"{panel.stem}.json"
    with csv_path.open("w", encoding="utf-8", newline="") as stream:
        write_csv(stream, panel.columns, panel.rows, metadata)
    with json_path.open("w", encoding="utf-8") as stream:
        write_json(
            stream,
            {
                "figure": panel.figure,
                "panel": panel.name,
                "quantity": panel.quantity,
                "method": panel.method,
                "params": panel.params,
                "columns": list(panel.columns),
                "version": __version__,
            },
        )
    return csv_path, json_path


def reproduce(
    figure: str, out_dir: Path, workers: Optional[int] = None, run_id: Optional[str] = None
) -> List[Path]:
    panels = build_panels(figure, workers)
    written: List[Path] = []
    for panel in panels:
        written.extend(write_panel(panel, out_dir, run_id))
    _logger.info("Figure reproduced", extra={"figure": figure, "panels": len(panels), "out_dir": str(out_dir)})
    return written


__all__ = ["FIGURE_IDS", "FIGURES", "Panel", "build_panels", "reproduce", "write_panel"]
