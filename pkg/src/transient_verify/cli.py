"""Command-line front end.

Exit codes: 0 success / validated, 1 usage error, 2 divergence,
3 not validated.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .diagnostics import chaotic_segment, largest_lyapunov
from .errors import DivergenceError, TransientVerifyError
from .fp_modes import PrecisionMode
from .integrator import (
    CSVFormatError,
    IntegrationSpec,
    integrate,
    read_trajectory_csv,
    trajectory_to_csv,
)
from .lorenz import (
    EPS_SETTLE,
    T_HOLD,
    LorenzParams,
    RhsVariant,
    State3,
    classify_destiny,
    fixed_points,
)
from .pipeline import (
    REFERENCE_IC,
    Conclusion,
    LyapunovSettings,
    PipelineConfig,
    disagreement_sweep,
    lyapunov_ensemble,
    run_validity_test,
    sample_transient_ics,
)
from .svgplot import render_xz_chart

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_NOT_VALIDATED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _manifest(command: str, config: dict, outputs: Sequence[Path], **extra) -> dict:
    return {
        "command": command,
        "config": config,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": [str(p) for p in outputs],
        **extra,
    }


def _finite(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


# -- flag validation ---------------------------------------------------------


def _positive(args, name: str) -> float:
    v = getattr(args, name.replace("-", "_"))
    if not (math.isfinite(v) and v > 0):
        raise UsageError(f"--{name} must be a positive finite number, got {v!r}")
    return v


def _parse_ic(text: str) -> State3:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--ic must be three comma-separated numbers, got {text!r}") from None
    if len(parts) != 3 or not all(math.isfinite(v) for v in parts):
        raise UsageError(f"--ic must be three finite comma-separated numbers, got {text!r}")
    return State3(*parts)


def _params(args) -> LorenzParams:
    for name in ("sigma", "b"):
        _positive(args, name)
    if not (math.isfinite(args.r) and args.r > 1):
        raise UsageError(f"--r must exceed 1, got {args.r!r}")
    return LorenzParams(args.sigma, args.r, args.b)


def _choice(enum_cls, text: str, flag: str):
    try:
        return enum_cls.parse(text)
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from None


def _add_system_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r", type=float, default=20.0)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--b", type=float, default=8.0 / 3.0)
    p.add_argument("--dt", type=float, default=1e-3)


# -- commands ----------------------------------------------------------------


def _simulate_config(args) -> dict:
    if args.from_manifest:
        try:
            manifest = json.loads(Path(args.from_manifest).read_text())
            return dict(manifest["config"])
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"--from-manifest: cannot read config: {exc}") from None
    params = _params(args)
    _positive(args, "dt")
    _positive(args, "t-max")
    if args.t_max < args.dt:
        raise UsageError("--t-max must be at least --dt")
    if args.stride < 1:
        raise UsageError(f"--stride must be >= 1, got {args.stride}")
    _positive(args, "eps-settle")
    _positive(args, "t-hold")
    return {
        "params": asdict(params),
        "ic": list(_parse_ic(args.ic)),
        "dt": args.dt,
        "t_max": args.t_max,
        "record_stride": args.stride,
        "precision": str(_choice(PrecisionMode, args.precision, "--precision")),
        "variant": str(_choice(RhsVariant, args.variant, "--variant")),
        "stop_on_settle": bool(args.stop_on_settle),
        "eps_settle": args.eps_settle,
        "t_hold": args.t_hold,
    }


def cmd_simulate(args) -> int:
    cfg = _simulate_config(args)
    p = LorenzParams(**cfg["params"])
    spec = IntegrationSpec(
        dt=cfg["dt"],
        t_max=cfg["t_max"],
        record_stride=cfg["record_stride"],
        stop_on_settle=cfg["stop_on_settle"],
        eps_settle=cfg["eps_settle"],
        t_hold=cfg["t_hold"],
    )
    mode = PrecisionMode.parse(cfg["precision"])
    variant = RhsVariant.parse(cfg["variant"])
    fps = fixed_points(p)
    out = Path(args.out)
    manifest_path = Path(args.manifest) if args.manifest else out.with_suffix(out.suffix + ".manifest.json")
    diverged = None
    try:
        traj = integrate(p, State3(*cfg["ic"]), spec, variant, mode, fps)
    except DivergenceError as exc:
        traj = exc.partial
        diverged = {"step": exc.step, "message": str(exc)}
        if traj is None:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
    _write_atomic(out, trajectory_to_csv(traj))
    destiny, settle = classify_destiny(traj, fps, spec.eps_settle, spec.t_hold)
    result = {
        "destiny": str(destiny),
        "settle_time": _finite(settle),
        "n_samples": len(traj),
        "magnitude_scale": traj.magnitude_scale,
        "diverged": diverged is not None,
    }
    if diverged:
        result["divergence"] = diverged
    _write_atomic(manifest_path, _json_dump(_manifest("simulate", cfg, [out, manifest_path], result=result)))
    print(json.dumps(result))
    if diverged:
        print(f"error: {diverged['message']}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"config: cannot read {args.config}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"config: invalid JSON in {args.config}: {exc}") from None
    if args.ladder:
        data["ladder"] = args.ladder.split(",")
    try:
        cfg = PipelineConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config: {exc}") from None
    report = run_validity_test(cfg)
    out = Path(args.out)
    _write_atomic(out, _json_dump(report.to_dict()))
    manifest_path = out.with_suffix(out.suffix + ".manifest.json")
    extra = {"notes": report.notes}
    if report.lyapunov is not None:
        extra["lyapunov"] = {
            "lambda": report.lyapunov.lam,
            "members": [m.lam for m in report.lyapunov.members],
        }
    _write_atomic(manifest_path, _json_dump(_manifest("check", cfg.to_dict(), [out, manifest_path], **extra)))
    final = report.final_rung
    print(f"{report.conclusion}" + (f" at {final}" if final else ""))
    return EXIT_OK if report.conclusion is Conclusion.VALIDATED else EXIT_NOT_VALIDATED


SWEEP_COLUMNS = ["ic_x", "ic_y", "ic_z", "variant", "mode", "destiny", "settle_time"]


def cmd_sweep(args) -> int:
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    params = _params(args)
    _positive(args, "dt")
    _positive(args, "t-max")
    if args.min_lifetime < 0:
        raise UsageError("--min-lifetime must be non-negative")
    mode = _choice(PrecisionMode, args.mode, "--mode")
    variants = tuple(_choice(RhsVariant, v, "--variants") for v in args.variants.split(","))
    try:
        cfg = PipelineConfig(params=params, dt=args.dt, t_max=args.t_max, variants=variants)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ics = sample_transient_ics(
        params, args.n, args.seed, args.min_lifetime, cfg.integration_spec()
    )
    if not ics:
        print("error: no transient initial conditions found", file=sys.stderr)
        return EXIT_NOT_VALIDATED
    result = disagreement_sweep(cfg, ics, mode)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in result.rows:
        w.writerow([repr(row.ic.x), repr(row.ic.y), repr(row.ic.z), str(row.variant),
                    str(row.mode), str(row.destiny),
                    repr(row.settle_time) if math.isfinite(row.settle_time) else "inf"])
    out = Path(args.out)
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".summary.json")
    summary = {
        **result.summary(),
        "seed": args.seed,
        "min_lifetime": args.min_lifetime,
        "variants": [str(v) for v in variants],
        "params": asdict(params),
    }
    _write_atomic(out, buf.getvalue())
    _write_atomic(summary_path, _json_dump(summary))
    print(json.dumps(result.summary()))
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    params = _params(args)
    _positive(args, "dt")
    _positive(args, "d0")
    _positive(args, "renorm-interval")
    ic = _parse_ic(args.ic)
    if args.ensemble > 0:
        cfg = PipelineConfig(
            params=params, ic=ic, dt=args.dt,
            lyapunov=LyapunovSettings(
                d0=args.d0, renorm_interval=args.renorm_interval,
                ensemble_size=args.ensemble, seed=args.seed,
                min_duration=args.min_duration,
            ),
        )
        res = lyapunov_ensemble(cfg)
        out = {
            "lambda": res.ensemble.lam,
            "spread": res.ensemble.spread,
            "members": [
                {"ic": list(c), "lambda": m.lam, "stderr": m.stderr, "n_renorms": m.n_renorms}
                for c, m in zip(res.ics, res.ensemble.members)
            ],
        }
    else:
        fps = fixed_points(params)
        spec = IntegrationSpec(dt=args.dt, t_max=args.t_max, stop_on_settle=True)
        traj = integrate(params, ic, spec, RhsVariant.YA, PrecisionMode.P64, fps)
        seg = chaotic_segment(traj, fps, allow_unsettled=True)
        est = largest_lyapunov(params, ic, seg, args.dt, args.d0, args.renorm_interval, seed=args.seed)
        out = {
            "lambda": est.lam,
            "stderr": est.stderr,
            "n_renorms": est.n_renorms,
            "renorm_interval": est.renorm_interval,
            "d0": est.d0,
            "segment": [seg.t_start, seg.t_end],
        }
    text = _json_dump(out)
    if args.out:
        _write_atomic(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    traces = []
    for name in args.files:
        path = Path(name)
        try:
            text = path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {name}: {exc}") from None
        try:
            times, states = read_trajectory_csv(text)
        except CSVFormatError as exc:
            raise UsageError(f"{name}: {exc} (row {exc.row})") from None
        traces.append((path.stem, times, states))
    if args.out or len(traces) > 1:
        out = Path(args.out) if args.out else Path(args.files[0]).with_name("comparison.svg")
        _write_atomic(out, render_xz_chart(traces, title=" vs ".join(t[0] for t in traces)))
        print(out)
    else:
        out = Path(args.files[0]).with_suffix(".svg")
        _write_atomic(out, render_xz_chart(traces, title=traces[0][0]))
        print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transient-verify", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate one trajectory to CSV")
    _add_system_flags(p)
    p.add_argument("--ic", default=",".join(repr(c) for c in REFERENCE_IC))
    p.add_argument("--t-max", type=float, default=60.0)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--precision", default="p64")
    p.add_argument("--variant", default="ya")
    p.add_argument("--stop-on-settle", action="store_true")
    p.add_argument("--eps-settle", type=float, default=EPS_SETTLE)
    p.add_argument("--t-hold", type=float, default=T_HOLD)
    p.add_argument("--out", default="trajectory.csv")
    p.add_argument("--manifest", default=None)
    p.add_argument("--from-manifest", default=None, help="rerun with a manifest's config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run the escalating validity test")
    p.add_argument("config", help="JSON pipeline config")
    p.add_argument("--ladder", default=None, help="override, e.g. p32,p64")
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="variant disagreement over transient ICs")
    _add_system_flags(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--mode", default="p32")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", default="ya,yb")
    p.add_argument("--min-lifetime", type=float, default=20.0)
    p.add_argument("--t-max", type=float, default=300.0)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lyapunov", help="largest Lyapunov exponent (binary64)")
    _add_system_flags(p)
    p.add_argument("--ic", default=",".join(repr(c) for c in REFERENCE_IC))
    p.add_argument("--t-max", type=float, default=300.0)
    p.add_argument("--d0", type=float, default=1e-9)
    p.add_argument("--renorm-interval", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ensemble", type=int, default=0, help="average over N long transients")
    p.add_argument("--min-duration", type=float, default=30.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("plot", help="SVG x(t) and z(t) chart from trajectory CSVs")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransientVerifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED if isinstance(exc, DivergenceError) else EXIT_NOT_VALIDATED


if __name__ == "__main__":
    sys.exit(main())
