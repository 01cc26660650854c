from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO

from pydantic import ValidationError

from . import __version__
from .config import get_settings
from .errors import DomainError, SingularGenerator, VSystemError
from .models import SpectrumMethod, TrajectoryMethod, VParams, validate
from .services import analytic, diagnostics, figures, generator, regime, spectral, sweep
from .utils.logging import run_context, setup_logging
from .utils.tables import write_csv, write_json

_logger = logging.getLogger(__name__)

SIMULATE_METHODS = {
    "exact": None,
    "stepped": None,
    "analytic-auto": None,
    "analytic-supercritical": TrajectoryMethod.ANALYTIC_OVERDAMPED,
    "analytic-subcritical": TrajectoryMethod.ANALYTIC_SUBCRITICAL,
    "analytic-small-delta": TrajectoryMethod.ANALYTIC_SMALL_DELTA,
    "analytic-p1": TrajectoryMethod.ANALYTIC_P1,
    "analytic-modal": TrajectoryMethod.ANALYTIC_MODAL,
}
TRAJECTORY_COLUMNS = ("t", "rho_aa", "rho_bb", "rho_cc", "re_rho_ab", "im_rho_ab")


# --- output ----------------------------------------------------------------------------


@contextmanager
def _open_output(path: Optional[str]) -> Iterator[TextIO]:
    if not path or path == "-":
        yield sys.stdout
        return
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        stream = target.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise DomainError("out", path, f"a writable file path ({exc.strerror})") from exc
    with stream:
        yield stream


def _emit(
    args: argparse.Namespace,
    columns: Sequence[str],
    rows: List[Sequence[Any]],
    metadata: Dict[str, Any],
) -> None:
    with _open_output(getattr(args, "out", None)) as stream:
        if args.format == "json":
            write_json(
                stream,
                {"metadata": metadata, "columns": list(columns), "rows": [list(row) for row in rows]},
            )
        else:
            write_csv(stream, columns, rows, metadata)


def _metadata(args: argparse.Namespace, point: Dict[str, Any], method: str, **extra: Any) -> Dict[str, Any]:
    """Header lines: tool, version, gamma, delta, p, nbar and method always come first."""
    metadata: Dict[str, Any] = {"tool": "vsystem", "version": __version__, "command": args.command}
    metadata.update((key, point[key]) for key in ("gamma", "delta", "p", "nbar"))
    metadata["method"] = method
    metadata["run_id"] = args.run_id
    metadata.update(extra)
    return metadata


def _params(args: argparse.Namespace) -> VParams:
    return validate(VParams(gamma=args.gamma, delta=args.delta, p=args.p, nbar=args.nbar))


# --- commands --------------------------------------------------------------------------


def _simulate(args: argparse.Namespace) -> None:
    params = _params(args)
    t_max = args.t_max
    if t_max is None:
        slowest = generator.timescales(params)[1]
        if not math.isfinite(slowest):
            raise SingularGenerator("generator has a zero mode; pass --t-max explicitly")
        t_max = 10.0 * slowest
    times = generator.default_time_grid(params, t_max, args.points)
    extra: Dict[str, Any] = {}

    if args.method == "exact":
        trajectory = generator.propagate_exact(params, None, times)
    elif args.method == "stepped":
        trajectory = generator.propagate_stepped(params, times=times, rel_tol=args.rel_tol)
    elif args.method == "analytic-auto":
        trajectory, form = analytic.analytic_auto(params, times)
        extra["form"] = form.method.value
        extra["branch"] = form.branch.value if form.branch else "none"
    else:
        trajectory = analytic.analytic_trajectory(params, times, SIMULATE_METHODS[args.method])

    issues = diagnostics.check_trajectory(trajectory)
    extra.update(issues)
    rows = [
        (float(t), state.rho_aa, state.rho_bb, state.rho_cc, state.rho_ab_re, state.rho_ab_im)
        for t, state in zip(trajectory.times, trajectory.states)
    ]
    _emit(args, TRAJECTORY_COLUMNS, rows, _metadata(args, params.as_dict(), args.method, **extra))


def _classify(args: argparse.Namespace) -> None:
    params = _params(args)
    result = regime.classify(params)
    y, p, nbar = params.dimensionless()
    ratio = y / nbar if nbar > 0 else math.inf
    row = (result.tag.value, result.discriminant_value, ratio, regime.slope_f(p))
    _emit(
        args,
        ("regime", "discriminant", "delta_over_nbar_gamma", "slope_f"),
        [row],
        _metadata(args, params.as_dict(), "discriminant_direct"),
    )


def _spectrum(args: argparse.Namespace) -> None:
    params = _params(args)
    method = SpectrumMethod(args.method)
    if method is SpectrumMethod.CARDANO:
        result = spectral.eigenvalues_cardano(params)
    elif method is SpectrumMethod.NUMERIC:
        result = spectral.eigenvalues_numeric(params)
    else:
        result = spectral.eigenvalues_expansion(params, order=args.order, force=args.force)
    rows = []
    for k, lam in enumerate(result.lambdas):
        vector = result.eigvecs[:, k]
        rows.append(
            (
                k + 1,
                float(lam.real),
                float(lam.imag),
                float(abs(lam)),
                float(vector[0].real),
                float(vector[0].imag),
                float(vector[1].real),
                float(vector[1].imag),
            )
        )
    columns = ("j", "re_lambda", "im_lambda", "abs_lambda", "re_v1", "im_v1", "re_v2", "im_v2")
    _emit(args, columns, rows, _metadata(args, params.as_dict(), method.value))


def _lifetime(args: argparse.Namespace) -> None:
    params = _params(args)
    result = spectral.coherence_lifetime(params)
    columns = ("tau_exact", "tau_formula", "branch", "p_critical", "tau_weak_pumping", "ratio")
    row = (
        result.tau_exact,
        result.tau_formula,
        result.branch.value,
        result.p_critical,
        result.tau_weak_pumping,
        result.ratio,
    )
    _emit(args, columns, [row], _metadata(args, params.as_dict(), "cardano+brentq"))


def _parse_axis(text: str) -> sweep.Axis:
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise DomainError("axis", text, "name:min:max:points[:linear|log]")
    try:
        values = {"name": parts[0], "min": float(parts[1]), "max": float(parts[2]), "points": int(parts[3])}
    except ValueError as exc:
        raise DomainError("axis", text, "numeric min, max and points") from exc
    if len(parts) == 5:
        values["spacing"] = parts[4]
    return sweep.Axis(**values)


def _parse_fixed(items: Sequence[str]) -> Dict[str, float]:
    fixed = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise DomainError("fixed", item, "name=value")
        try:
            fixed[name.strip()] = float(value)
        except ValueError as exc:
            raise DomainError("fixed", item, "a numeric value") from exc
    return fixed


def _scan_fixed(args: argparse.Namespace) -> Dict[str, float]:
    fixed = _parse_fixed(args.fixed)
    shorthands = {"p": args.p, "nbar": args.nbar}
    if args.delta is not None:
        if not args.gamma > 0:
            raise DomainError("gamma", args.gamma, "gamma > 0")
        shorthands["delta_over_gamma"] = args.delta / args.gamma
    for name, value in shorthands.items():
        if value is None:
            continue
        if name in fixed:
            raise DomainError("fixed", name, "one value per parameter")
        fixed[name] = value
    return fixed


def _scan(args: argparse.Namespace) -> None:
    grid = sweep.GridSpec(
        axis1=_parse_axis(args.axis1),
        axis2=_parse_axis(args.axis2),
        quantity=args.quantity,
        fixed=_scan_fixed(args),
        gamma=args.gamma,
    )
    table = sweep.run(grid, workers=args.workers)
    rows = [(row.axis1, row.axis2, row.value, row.error) for row in table.rows]
    metadata = _metadata(args, grid.header(), "sweep", quantity=grid.quantity.value)
    _emit(args, table.columns, rows, metadata)


def _parse_range(text: str) -> List[float]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        low, high, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError) as exc:
        raise DomainError("p-grid", text, "a value or min:max:points") from exc
    if count < 2:
        raise DomainError("p-grid", text, "at least 2 points")
    return [low + (high - low) * index / (count - 1) for index in range(count)]


def _zterms(args: argparse.Namespace) -> None:
    table = sweep.zjk_magnitudes(_parse_range(args.p_grid), args.nbar, args.delta)
    rows = []
    for index, p in enumerate(table.p):
        for j in range(3):
            for k in range(3):
                rows.append((float(p), j + 1, k, float(table.magnitudes[index, j, k]), table.errors[index]))
    point = {"gamma": 1.0, "delta": args.delta, "p": args.p_grid, "nbar": args.nbar}
    metadata = _metadata(args, point, "series")
    crossing = table.crossing(2)
    if crossing:
        metadata["j2_crossing_low"], metadata["j2_crossing_high"] = crossing
    _emit(args, ("p", "j", "k", "magnitude", "error"), rows, metadata)


def _coeffs(args: argparse.Namespace) -> None:
    grid = _parse_range(args.p_grid) if args.p_grid else [args.p]
    records = [analytic.coeffs(p).as_dict() for p in grid]
    columns = list(records[0])
    rows = [[record[column] for column in columns] for record in records]
    point = {"gamma": "any", "delta": "any", "p": args.p_grid or args.p, "nbar": "any"}
    _emit(args, columns, rows, _metadata(args, point, "cofactors"))


def _reproduce(args: argparse.Namespace) -> None:
    out_dir = Path(args.out_dir or get_settings().output_dir)
    workers = sweep.resolve_workers(args.workers)
    try:
        written = figures.reproduce(args.fig, out_dir, workers=workers, run_id=args.run_id)
    except OSError as exc:
        raise DomainError("out-dir", str(out_dir), f"a writable directory ({exc.strerror})") from exc
    for path in written:
        print(path)


# --- parser ----------------------------------------------------------------------------


def _add_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma", type=float, default=1.0, help="Spontaneous decay rate.")
    parser.add_argument("--delta", type=float, default=0.0, help="Excited-state splitting.")
    parser.add_argument("--p", type=float, default=0.0, help="Dipole alignment factor in [0, 1].")
    parser.add_argument("--nbar", type=float, default=0.0, help="Mean thermal occupation.")


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="Output file (default: stdout).")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsystem", description="Thermally driven V-system dynamics and spectral analysis."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Override VSYSTEM_LOG_LEVEL.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Propagate from the ground state.")
    _add_params(simulate)
    simulate.add_argument("--t-max", type=float, default=None)
    simulate.add_argument("--points", type=int, default=None, help="Points per decade.")
    simulate.add_argument("--method", choices=list(SIMULATE_METHODS), default="exact")
    simulate.add_argument("--rel-tol", type=float, default=1e-8)
    _add_output(simulate)
    simulate.set_defaults(handler=_simulate)

    classify = commands.add_parser("classify", help="Regime of one parameter point.")
    _add_params(classify)
    _add_output(classify)
    classify.add_argument("--json", dest="format", action="store_const", const="json")
    classify.set_defaults(handler=_classify)

    spectrum = commands.add_parser("spectrum", help="Generator eigenvalues and eigenvectors.")
    _add_params(spectrum)
    spectrum.add_argument("--method", choices=[m.value for m in SpectrumMethod], default="cardano")
    spectrum.add_argument("--order", type=int, default=2)
    spectrum.add_argument("--force", action="store_true", help="Ignore the expansion window.")
    _add_output(spectrum)
    spectrum.set_defaults(handler=_spectrum)

    lifetime = commands.add_parser("lifetime", help="Coherence lifetime in the overdamped regime.")
    _add_params(lifetime)
    _add_output(lifetime)
    lifetime.set_defaults(handler=_lifetime)

    scan = commands.add_parser("scan", help="Parallel sweep over two parameter axes.")
    scan.add_argument("--quantity", choices=[q.value for q in sweep.Quantity], required=True)
    scan.add_argument("--axis1", required=True, help="name:min:max:points[:linear|log]")
    scan.add_argument("--axis2", required=True, help="name:min:max:points[:linear|log]")
    scan.add_argument("--fixed", action="append", default=[], help="name=value, repeatable.")
    scan.add_argument("--p", type=float, default=None, help="Shorthand for --fixed p=VALUE.")
    scan.add_argument("--nbar", type=float, default=None, help="Shorthand for --fixed nbar=VALUE.")
    scan.add_argument("--delta", type=float, default=None, help="Fixed splitting, same units as --gamma.")
    scan.add_argument("--gamma", type=float, default=1.0)
    scan.add_argument("--workers", type=int, default=None)
    _add_output(scan)
    scan.set_defaults(handler=_scan)

    zterms = commands.add_parser("zterms", help="Magnitudes of the leading series terms.")
    zterms.add_argument("--p-grid", default="0.2:1:81", help="min:max:points")
    zterms.add_argument("--nbar", type=float, default=1e3)
    zterms.add_argument("--delta", type=float, default=0.1, help="Splitting in units of gamma.")
    _add_output(zterms)
    zterms.set_defaults(handler=_zterms)

    coeffs = commands.add_parser("coeffs", help="Closed-form trajectory coefficients.")
    coeffs.add_argument("--p", type=float, default=1.0)
    coeffs.add_argument("--p-grid", default=None, help="min:max:points")
    _add_output(coeffs)
    coeffs.set_defaults(handler=_coeffs)

    reproduce = commands.add_parser("reproduce-fig", help="Write the data behind one figure.")
    reproduce.add_argument("--fig", choices=list(figures.FIGURE_IDS), required=True)
    reproduce.add_argument("--out-dir", default=None)
    reproduce.add_argument("--workers", type=int, default=None)
    reproduce.set_defaults(handler=_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = get_settings()
    except ValidationError as exc:
        print(f"vsystem: invalid VSYSTEM_ configuration: {exc}", file=sys.stderr)
        return DomainError.exit_code
    level = logging.getLevelName(args.log_level.upper()) if args.log_level else settings.level
    setup_logging(level if isinstance(level, int) else settings.level)

    with run_context() as run_id:
        args.run_id = run_id
        try:
            args.handler(args)
        except VSystemError as exc:
            _logger.warning(
                "Command failed",
                extra={"command": args.command, "error": type(exc).__name__, "context": exc.context},
            )
            print(f"vsystem {args.command}: {exc}", file=sys.stderr)
            return exc.exit_code
        except ValidationError as exc:
            print(f"vsystem {args.command}: {exc}", file=sys.stderr)
            return DomainError.exit_code
        except Exception:
            _logger.exception("Unhandled exception during command", extra={"command": args.command})
            raise
    return 0


__all__ = ["build_parser", "main"]
