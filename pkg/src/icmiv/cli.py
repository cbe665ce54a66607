"""Command-line interface.

One executable, six subcommands:

    estimate     fit a kernel ICM (or tsls) regression on a CSV, emit JSON
    spectest     wild-bootstrap test of E[U|Z] = 0, emit JSON
    relevance    wild-bootstrap linear-completeness (relevance) test, emit JSON
    mc           Monte Carlo table for one simulation design, emit CSV
    kernel-diag  kernel degeneracy sweep over p_z, emit CSV (+ figure)
    gmdc-diag    dependence-correlation sweep over p_z, emit CSV (+ figure)

Every run that writes a payload file also writes a ``<payload>.manifest.json``
sidecar echoing the full configuration, seed, version, wall time, and output
paths; re-running the same configuration reproduces the payload byte for
byte. Exit codes: 0 success, 2 validation or configuration error, 3
identification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import ValidationError, load_csv, standardize_instruments
from .estimator import (
    IdentificationError,
    InfeasibilityError,
    estimate,
    identification_diagnostics,
    tsls_estimate,
)
from .inference import WEIGHT_SCHEMES, lc_interpretation, lc_test, spec_test
from .kernels import (
    KERNEL_IDS,
    KernelScalingError,
    KernelSpec,
    kernel_matrix,
    kernel_sd_report,
)
from .mdd import gmdc
from .simulate import DGP_IDS, ESTIMATOR_NAMES, DgpConfig, gmdc_design, run_mc

__all__ = ["main", "entry"]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _grid(text: str) -> list[int]:
    """Parse '2,8,18' and '1:40' (inclusive) grids, mixed freely."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty grid specification {text!r}")
    return out


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _load_dataset(args):
    ds = load_csv(
        args.data,
        y_col=args.y_col,
        x_cols=_names(args.x),
        z_cols=_names(args.z),
        endog_cols=_names(getattr(args, "endog", "") or ""),
    )
    if args.atan_z:
        ds = standardize_instruments(ds, "atan")
    return ds


def _emit(args, subcommand: str, payload: str, started: float, figure=None) -> int:
    """Write the payload (file and/or stdout), the figure, and the manifest."""
    if not args.out and not args.stdout:
        raise ValueError("nothing to do: pass --out PATH and/or --stdout")
    outputs = []
    if args.out:
        path = Path(args.out)
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(payload, encoding="utf-8")
        outputs.append(path)
        if figure is not None and not getattr(args, "no_fig", False):
            fig_path = path.with_suffix(".png")
            figure(fig_path)
            outputs.append(fig_path)
        manifest = {
            "subcommand": subcommand,
            "version": __version__,
            "seed": getattr(args, "seed", None),
            "config": {k: v for k, v in vars(args).items() if k not in ("func", "cmd")},
            "outputs": [str(p) for p in outputs],
            "wall_time_s": time.perf_counter() - started,
        }
        manifest_path = Path(str(path) + ".manifest.json")
        manifest_path.write_text(_json_text(manifest), encoding="utf-8")
    if args.stdout:
        sys.stdout.write(payload)
    return 0


def _cmd_estimate(args, started: float) -> int:
    ds = _load_dataset(args)
    if args.kernel == "tsls":
        res = tsls_estimate(ds)
    else:
        spec = KernelSpec(args.kernel, bandwidth=args.wmd_bandwidth)
        res = estimate(ds, spec)
    diagnostics = None
    if ds.p_x >= 2 and args.kernel != "tsls":
        diag = identification_diagnostics(ds, KernelSpec(args.kernel, bandwidth=args.wmd_bandwidth))
        diagnostics = {
            "min_eig": float(diag.min_eig),
            "gmdc_strength": float(diag.gmdc_strength),
            "rank_h": diag.rank_h,
            "rank_z": diag.rank_z,
        }
    payload = _json_text(
        {
            "theta": [float(v) for v in res.theta],
            "se": [float(v) for v in res.se],
            "vcov": [[float(v) for v in row] for row in res.vcov],
            "cond_A": float(res.cond_A),
            "n": ds.n,
            "p_x": ds.p_x,
            "p_z": ds.p_z,
            "kernel": args.kernel,
            "x_names": list(ds.x_names),
            "diagnostics": diagnostics,
        }
    )
    return _emit(args, "estimate", payload, started)


def _boot_payload(res, interpretation: str) -> str:
    return _json_text(
        {
            "stat": float(res.stat),
            "pvalue": float(res.pvalue),
            "B": res.B,
            "failed_draws": res.failed_draws,
            "seed": res.seed,
            "weights": res.weight_scheme,
            "interpretation": interpretation,
        }
    )


def _cmd_spectest(args, started: float) -> int:
    ds = _load_dataset(args)
    spec = KernelSpec(args.kernel, bandwidth=args.wmd_bandwidth)
    res = spec_test(ds, spec, B=args.boot, seed=args.seed, weights=args.weights)
    if res.pvalue <= 0.05:
        note = "evidence against E[U|Z] = 0 at the 0.05 level; the model appears misspecified"
    else:
        note = "no evidence against E[U|Z] = 0 at the 0.05 level"
    return _emit(args, "spectest", _boot_payload(res, note), started)


def _cmd_relevance(args, started: float) -> int:
    ds = _load_dataset(args)
    if args.endog not in ds.x_names:
        raise ValidationError(f"endogenous column {args.endog!r} is not among the covariates")
    idx = ds.x_names.index(args.endog)
    spec = KernelSpec(args.kernel, bandwidth=args.wmd_bandwidth)
    res = lc_test(ds, idx, spec, B=args.boot, seed=args.seed, weights=args.weights)
    return _emit(args, "relevance", _boot_payload(res, lc_interpretation(res.pvalue)), started)


def _cmd_mc(args, started: float) -> int:
    cfg = DgpConfig(
        id=args.dgp,
        n=args.n,
        delta=args.delta,
        p_z=args.pz,
        rho=args.rho,
        seed=args.seed,
    )
    names = _names(args.estimators)
    summary = run_mc(cfg, reps=args.reps, estimators=names, threads=args.threads)
    rows = [
        [
            name,
            m.mb,
            m.mad,
            m.rmse,
            m.rej,
            summary.reps,
            m.failures,
            m.valid,
        ]
        for name, m in summary.rows.items()
    ]
    payload = _csv_text(
        ["estimator", "MB", "MAD", "RMSE", "Rej", "reps", "failures", "valid"], rows
    )
    return _emit(args, "mc", payload, started)


def _cmd_kernel_diag(args, started: float) -> int:
    kernels = _names(args.kernels)
    for name in kernels:
        if name not in KERNEL_IDS:
            raise ValueError(f"unknown kernel {name!r}; expected one of {KERNEL_IDS}")
    grid = _grid(args.pz)
    rows = []
    for name in kernels:
        spec = KernelSpec(name)
        for p_z in grid:
            sd, stderr = kernel_sd_report(spec, p_z, args.draws, args.seed)
            rows.append(
                {
                    "kernel": name,
                    "p_z": p_z,
                    "sd_estimate": sd,
                    "mc_stderr": stderr,
                    "draws": args.draws,
                    "seed": args.seed,
                }
            )
    header = ["kernel", "p_z", "sd_estimate", "mc_stderr", "draws", "seed"]
    payload = _csv_text(header, [[r[h] for h in header] for r in rows])

    def figure(path):
        from .plots import save_kernel_sd_figure

        save_kernel_sd_figure(rows, path)

    return _emit(args, "kernel-diag", payload, started, figure=figure)


def _cmd_gmdc_diag(args, started: float) -> int:
    kernels = _names(args.kernels)
    for name in kernels:
        if name == "wmd":
            raise ValueError("the wmd kernel needs outcome data; it has no gmdc sweep")
        if name not in KERNEL_IDS:
            raise ValueError(f"unknown kernel {name!r}; expected one of {KERNEL_IDS}")
    grid = _grid(args.pz)
    rows = []
    for p_z in grid:
        Z, W = gmdc_design(args.n, p_z, args.seed, noise_sd=args.noise_sd)
        for name in kernels:
            K = kernel_matrix(Z, KernelSpec(name))
            rows.append(
                {
                    "kernel": name,
                    "p_z": p_z,
                    "n": args.n,
                    "gmdc": gmdc(W, K),
                    "seed": args.seed,
                }
            )
    header = ["kernel", "p_z", "n", "gmdc", "seed"]
    payload = _csv_text(header, [[r[h] for h in header] for r in rows])

    def figure(path):
        from .plots import save_gmdc_figure

        save_gmdc_figure(rows, path)

    return _emit(args, "gmdc-diag", payload, started, figure=figure)


def _add_output_opts(p, fig: bool = False) -> None:
    p.add_argument("--out", default=None, help="payload file; a manifest sidecar is written next to it")
    p.add_argument("--stdout", action="store_true", help="also write the payload to stdout")
    if fig:
        p.add_argument("--no-fig", action="store_true", help="skip the PNG next to the CSV")


def _add_data_opts(p, with_endog_list: bool = True) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--y", dest="y_col", required=True, help="outcome column")
    p.add_argument("--x", default="", help="comma-separated covariates (intercept is automatic)")
    p.add_argument("--z", required=True, help="comma-separated instruments (may overlap --x)")
    if with_endog_list:
        p.add_argument("--endog", default="", help="comma-separated endogenous covariates")
    p.add_argument("--atan-z", dest="atan_z", action="store_true",
                   help="apply element-wise arctangent to the instruments")


def _add_kernel_opt(p, include_tsls: bool = False) -> None:
    choices = list(KERNEL_IDS) + (["tsls"] if include_tsls else [])
    p.add_argument("--kernel", default="mmd", choices=choices)
    p.add_argument("--wmd-bandwidth", dest="wmd_bandwidth", type=float, default=1.0,
                   help="base density bandwidth for the wmd kernel")


def _add_boot_opts(p) -> None:
    p.add_argument("--boot", type=int, default=999, help="number of bootstrap draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", default="mammen", choices=WEIGHT_SCHEMES)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icmiv",
        description="Linear ICM instrumental-variable estimation, diagnostics, and simulation",
    )
    parser.add_argument("--version", action="version", version=f"icmiv {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("estimate", help="fit one model on a CSV dataset")
    _add_data_opts(p)
    _add_kernel_opt(p, include_tsls=True)
    _add_output_opts(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("spectest", help="wild-bootstrap test of E[U|Z] = 0")
    _add_data_opts(p)
    _add_kernel_opt(p)
    _add_boot_opts(p)
    _add_output_opts(p)
    p.set_defaults(func=_cmd_spectest)

    p = sub.add_parser("relevance", help="wild-bootstrap linear-completeness test")
    _add_data_opts(p, with_endog_list=False)
    p.add_argument("--endog", required=True, help="the endogenous covariate under test")
    _add_kernel_opt(p)
    _add_boot_opts(p)
    _add_output_opts(p)
    p.set_defaults(func=_cmd_relevance)

    p = sub.add_parser("mc", help="Monte Carlo summary table for one design")
    p.add_argument("--dgp", required=True, type=lambda s: s.upper(), choices=DGP_IDS)
    p.add_argument("--n", type=int, default=250)
    p.add_argument("--pz", type=int, default=None)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--estimators", default="mmd",
                   help=f"comma-separated subset of {','.join(ESTIMATOR_NAMES)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_output_opts(p)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("kernel-diag", help="kernel degeneracy sweep (sd of K over p_z)")
    p.add_argument("--kernels", default="mmd,iiv")
    p.add_argument("--pz", default="1:40", help="grid, e.g. '1:40' or '2,8,18,32'")
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    _add_output_opts(p, fig=True)
    p.set_defaults(func=_cmd_kernel_diag)

    p = sub.add_parser("gmdc-diag", help="dependence-correlation sweep over p_z")
    p.add_argument("--kernels", default="mmd,esc6,iiv")
    p.add_argument("--pz", default="2,8,18,32", help="grid, e.g. '2,8,18,32'")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=2.0,
                   help="conditional noise scale of the design outcome")
    p.add_argument("--seed", type=int, default=0)
    _add_output_opts(p, fig=True)
    p.set_defaults(func=_cmd_gmdc_diag)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/version
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        return args.func(args, started)
    except IdentificationError as exc:
        print(f"identification failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, InfeasibilityError, KernelScalingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
