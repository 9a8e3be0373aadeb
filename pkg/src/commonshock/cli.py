"""Command-line surface: data ingestion, configuration, and reports.

Commands: fit, forecast, simulate, inspect. Configuration is a flat
key = value file (see README for the key reference); claim data travels in
CSV files with header ``array,accident,development,value``. Reports are
written twice, as a readable text table and as JSON with the same content.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .arrays import ClaimCollection, future_cells, stack_log
from .covariance import CellwiseTwoLevel, DiagonalScalar, Example48, SigmaModel
from .design import IDIO_VARIANTS, ShockSpec, assemble
from .errors import CommonShockError, ConfigError, DataError, DesignError, NumericalError
from .estimation import (
    chain_ladder_effect_table,
    dependence_stats,
    gls_fit,
    ml_dispersion_cellwise,
    ml_dispersion_generic,
)
from .forecast import (
    build_forecast_design,
    independence_counterfactual_cov,
    predict,
    reserve_correlation,
)
from .partitions import PARTITION_KINDS, build_partition
from .simulate import ROUNDING_MODES, SimSpec, simulate

CSV_HEADER = ("array", "accident", "development", "value")

_KNOWN_KEYS = (
    {
        "data", "t_max", "partition", "design", "covariance",
        "sigma2", "tau2", "v2",
        "include_across_shock", "include_within_shock", "shared_shock_mean",
        "tol", "max_iter", "init_omega", "out", "seed",
        "n_arrays", "n_rows", "n_cols", "mask",
        "shock_mean_log", "shock_sd", "idio_sd", "rounding",
    }
    | {f"row_effects_{n}" for n in range(1, 33)}
    | {f"col_effects_{n}" for n in range(1, 33)}
    | {f"tau2_{n}" for n in range(1, 33)}
    | {f"v2_{n}" for n in range(1, 33)}
)

_COVARIANCE_CHOICES = ("cellwise_two_level", "diagonal_scalar", "example48")


# ---------------------------------------------------------------------------
# claim CSV
# ---------------------------------------------------------------------------

def read_claims_csv(paths) -> ClaimCollection:
    """Read one collection from one or more claim CSV files."""
    cells = {}  # (array, i, j) -> value
    for path in paths:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"data file does not exist: {p}")
        rows = 0
        with open(p, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = [f.strip() for f in line.split(",")]
                if lineno == 1:
                    if tuple(f.lower() for f in parts) != CSV_HEADER:
                        raise DataError(
                            f"{p}:{lineno}: expected header "
                            f"'{','.join(CSV_HEADER)}', got {line!r}"
                        )
                    continue
                if len(parts) != 4:
                    raise DataError(f"{p}:{lineno}: expected 4 fields, got {len(parts)}")
                try:
                    n, i, j = int(parts[0]), int(parts[1]), int(parts[2])
                    value = float(parts[3])
                except ValueError as exc:
                    raise DataError(f"{p}:{lineno}: {exc}") from None
                if (n, i, j) in cells:
                    raise DataError(f"{p}:{lineno}: duplicate cell (array {n}, {i}, {j})")
                cells[(n, i, j)] = value
                rows += 1
        if rows == 0:
            raise DataError(f"{p}: no data rows")

    array_ids = sorted({key[0] for key in cells})
    cell_sets = {
        a: {(i, j) for (n, i, j) in cells if n == a} for a in array_ids
    }
    common = cell_sets[array_ids[0]]
    for a in array_ids[1:]:
        if cell_sets[a] != common:
            raise DataError(
                f"arrays are not congruent: array {a} covers different cells "
                f"than array {array_ids[0]}"
            )
    n_rows = max(i for (i, _) in common)
    n_cols = max(j for (_, j) in common)
    mask = np.zeros((n_rows, n_cols), dtype=bool)
    for (i, j) in common:
        mask[i - 1, j - 1] = True
    values = np.full((len(array_ids), n_rows, n_cols), np.nan)
    for (n, i, j), v in cells.items():
        values[array_ids.index(n), i - 1, j - 1] = v
    from .arrays import ArrayLayout

    return ClaimCollection(ArrayLayout(len(array_ids), n_rows, n_cols, mask), values)


def write_claims_csv(path, collection: ClaimCollection) -> None:
    lines = [",".join(CSV_HEADER)]
    lay = collection.layout
    for n in range(1, lay.n_arrays + 1):
        for (i, j) in lay.stacking_order:
            v = collection.value(n, i, j)
            text = str(int(v)) if float(v).is_integer() else repr(float(v))
            lines.append(f"{n},{i},{j},{text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def parse_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file does not exist: {p}")
    cfg = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        cfg[key] = value.strip()
    return cfg


def _get_bool(cfg, key, default):
    raw = cfg.get(key)
    if raw is None:
        return default
    low = raw.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key} must be true or false, got {raw!r}")


def _get_float(cfg, key, default=None):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from None


def _get_int(cfg, key, default=None):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None


def _get_list(cfg, key):
    raw = cfg.get(key)
    if raw is None:
        raise ConfigError(f"missing required key {key!r}")
    try:
        return [float(f.strip()) for f in raw.split(",") if f.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of numbers") from None


def _get_choice(cfg, key, choices, default):
    raw = cfg.get(key, default)
    if raw not in choices:
        raise ConfigError(
            f"{key} must be one of: {', '.join(choices)}; got {raw!r}"
        )
    return raw


# ---------------------------------------------------------------------------
# model assembly from config
# ---------------------------------------------------------------------------

def _load_collection(cfg) -> ClaimCollection:
    raw = cfg.get("data")
    if not raw:
        raise ConfigError("missing required key 'data'")
    paths = [f.strip() for f in raw.split(",") if f.strip()]
    return read_claims_csv(paths)


def _fit_from_config(cfg):
    """Shared fit pipeline for the fit and forecast commands.

    Returns (fit, full_collection, fit_collection, t_max).
    """
    full = _load_collection(cfg)
    observed_tmax = max(i + j - 1 for (i, j) in full.layout.stacking_order)
    t_max = _get_int(cfg, "t_max", observed_tmax)
    fit_coll = full.restrict_to_diagonals(t_max) if t_max < observed_tmax else full

    kind = _get_choice(cfg, "partition", PARTITION_KINDS, "cell")
    variant = _get_choice(cfg, "design", IDIO_VARIANTS, "chain_ladder")
    layout = fit_coll.layout
    partition = build_partition(kind, layout)
    shock = ShockSpec(
        partition=partition,
        include_across=_get_bool(cfg, "include_across_shock", True),
        include_within=_get_bool(cfg, "include_within_shock", False),
        shared_across_mean=_get_bool(cfg, "shared_shock_mean", True),
    )
    design = assemble(layout, shock, variant)
    y = stack_log(fit_coll)

    structure_name = _get_choice(cfg, "covariance", _COVARIANCE_CHOICES, "cellwise_two_level")
    if structure_name == "cellwise_two_level":
        structure = CellwiseTwoLevel(layout.n_arrays, layout.cells_per_array)
    elif structure_name == "diagonal_scalar":
        structure = DiagonalScalar(design.A, design.B if shock.include_within else None)
    else:
        # identity development operator: per-array shock and noise scales
        eye = np.eye(layout.cells_per_array)
        structure = Example48(layout.n_arrays, eye, eye)

    values, free = [], []
    for name in structure.omega_names:
        base = name.rsplit("_", 1)[0] if name.rsplit("_", 1)[-1].isdigit() else name
        raw = cfg.get(name, cfg.get(base, "estimate"))
        if raw == "estimate":
            values.append(None)
            free.append(True)
        else:
            try:
                values.append(float(raw))
            except ValueError:
                raise ConfigError(f"{name} must be 'estimate' or a number") from None
            free.append(False)

    tol = _get_float(cfg, "tol", 1e-9)
    max_iter = _get_int(cfg, "max_iter", 200)

    if not any(free):
        fit = gls_fit(y, design, SigmaModel(structure, values))
    elif (
        isinstance(structure, CellwiseTwoLevel)
        and layout.n_arrays == 2
        and all(free)
    ):
        fit = ml_dispersion_cellwise(y, design)
    else:
        init = cfg.get("init_omega")
        if init is not None:
            init = _get_list(cfg, "init_omega")
            if len(init) != structure.n_params:
                raise ConfigError(
                    f"init_omega needs {structure.n_params} values for {structure.omega_names}"
                )
        else:
            init = [0.01] * structure.n_params
        for k, v in enumerate(values):
            if v is not None:
                init[k] = v
        fit = ml_dispersion_generic(
            y, design, structure, init, tol=tol, max_iter=max_iter, free_mask=free
        )
    return fit, full, fit_coll, t_max


def _extended_residuals(fit, full: ClaimCollection):
    """Residuals over every data cell, using fitted means beyond the fit region."""
    cells = full.layout.stacking_order
    m_ext = fit.design.rows_for_cells(cells)
    y_ext = stack_log(full)
    d = y_ext - m_ext @ fit.kappa_hat
    return d.reshape(full.layout.n_arrays, -1)


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def _sig4(x) -> str:
    if x is None:
        return "-"
    if x == 0:
        return "0"
    return f"{x:.4g}"


def _write_report(out_prefix, text: str, payload: dict) -> None:
    prefix = Path(out_prefix)
    if prefix.parent != Path("."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.txt").write_text(text, encoding="utf-8")
    Path(f"{prefix}.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit(cfg, out_prefix) -> dict:
    fit, full, fit_coll, t_max = _fit_from_config(cfg)
    lay = fit.design.layout

    payload = {
        "n_arrays": lay.n_arrays,
        "grid": [lay.n_rows, lay.n_cols],
        "fitted_cells_per_array": lay.cells_per_array,
        "t_max": t_max,
        "loglik": fit.loglik,
    }
    lines = ["Fit report", "==========",
             f"arrays: {lay.n_arrays}   grid: {lay.n_rows} x {lay.n_cols}   "
             f"fitted cells per array: {lay.cells_per_array}   t_max: {t_max}", ""]

    if fit.design.idio_variant == "chain_ladder":
        table = chain_ladder_effect_table(fit)
        payload["location"] = table
        lines.append("Location parameters (exponentiated)")
        header = "index"
        for n in range(1, lay.n_arrays + 1):
            header += f"  array{n}_row  array{n}_col"
        lines.append(header)
        for k in range(max(lay.n_rows, lay.n_cols)):
            row = f"{k + 1:5d}"
            for n in range(1, lay.n_arrays + 1):
                r = table[f"array_{n}"]["row_effects"]
                c = table[f"array_{n}"]["column_effects"]
                row += f"  {_sig4(r[k]) if k < len(r) else '':>10}"
                row += f"  {_sig4(c[k]) if k < len(c) else '':>10}"
            lines.append(row)
    else:
        payload["location"] = {
            "labels": [list(map(str, lbl)) for lbl in fit.labels],
            "kappa": [float(v) for v in fit.kappa_hat],
        }
        lines.append("Location parameters")
        for lbl, v in zip(fit.labels, fit.kappa_hat):
            lines.append(f"  {'/'.join(map(str, lbl)):20} {_sig4(float(v))}")

    lines.append("")
    lines.append("Dispersion parameters")
    if fit.omega_hat is not None:
        names = fit.sigma.structure.omega_names
        disp = {name: float(w) for name, w in zip(names, fit.omega_hat)}
        payload["dispersion"] = disp
        for name, w in zip(names, fit.omega_hat):
            lines.append(f"  {name:8} {_sig4(float(w))}   (sd {_sig4(float(np.sqrt(w)))})")
    else:
        names = fit.sigma.structure.omega_names
        disp = {name: float(w) for name, w in zip(names, fit.sigma.omega)}
        payload["dispersion"] = disp
        for name, w in disp.items():
            lines.append(f"  {name:8} {_sig4(w)}   (fixed)")

    if lay.n_arrays == 2:
        d1, d2 = _extended_residuals(fit, full)
        corr, agree = dependence_stats(d1, d2)
        payload["dependence"] = {
            "correlation": corr,
            "sign_agreement": agree,
            "cells": int(d1.size),
        }
        lines.append("")
        lines.append("Residual dependence (all data cells)")
        lines.append(f"  corr(d1, d2) = {corr:.4g}")
        lines.append(f"  sign agreement = {agree} / {d1.size}")

    lines.append("")
    lines.append(f"log-likelihood = {fit.loglik:.6g}")
    text = "\n".join(lines) + "\n"
    _write_report(out_prefix, text, payload)
    print(text, end="")
    return payload


def cmd_forecast(cfg, out_prefix, independence: bool = False) -> dict:
    fit, full, fit_coll, t_max = _fit_from_config(cfg)
    lay = fit.design.layout
    region = future_cells(lay, t_max)
    fd = build_forecast_design(fit.design, region)
    result = predict(fit, fd)

    payload = {
        "t_max": t_max,
        "future_cells_per_array": len(region),
        "reserves": [float(r) for r in result.reserves],
        "reserve_total": result.reserve_total,
        "std_errors": [float(s) for s in result.std_errors],
        "std_error_total": result.std_error_total,
        "covs_percent": [100.0 * float(c) for c in result.covs],
        "cov_total_percent": 100.0 * result.cov_total,
    }
    lines = ["Reserve forecast", "================",
             f"t_max: {t_max}   future cells per array: {len(region)}", ""]
    head = "          " + "".join(f"  array {n:>2}" for n in range(1, lay.n_arrays + 1)) + "       total"
    lines.append(head)
    lines.append("forecast  " + "".join(f"  {r:>8.0f}" for r in result.reserves) + f"  {result.reserve_total:>10.0f}")
    lines.append("std error " + "".join(f"  {s:>8.0f}" for s in result.std_errors) + f"  {result.std_error_total:>10.0f}")
    lines.append("CoV       " + "".join(f"  {100 * c:>7.1f}%" for c in result.covs) + f"  {100 * result.cov_total:>9.1f}%")

    if lay.n_arrays == 2 and len(region) > 0:
        rc = reserve_correlation(result)
        payload["reserve_correlation"] = rc
        lines.append("")
        lines.append(f"reserve correlation (arrays 1, 2): {rc:.4g}")
    if independence:
        icov = independence_counterfactual_cov(result)
        payload["independence_cov_percent"] = 100.0 * icov
        lines.append(f"independence counterfactual total CoV: {100 * icov:.1f}%")

    text = "\n".join(lines) + "\n"
    _write_report(out_prefix, text, payload)
    print(text, end="")
    return payload


def cmd_simulate(cfg, out_path, seed=None) -> str:
    from .arrays import ArrayLayout

    n_arrays = _get_int(cfg, "n_arrays", 2)
    n_rows = _get_int(cfg, "n_rows")
    n_cols = _get_int(cfg, "n_cols")
    mask_kind = _get_choice(cfg, "mask", ("full", "triangle"), "full")
    if mask_kind == "triangle":
        if n_rows != n_cols:
            raise ConfigError("triangle mask needs a square grid")
        layout = ArrayLayout.triangle(n_arrays, n_rows)
    else:
        layout = ArrayLayout.full(n_arrays, n_rows, n_cols)

    rows = np.array([_get_list(cfg, f"row_effects_{n}") for n in range(1, n_arrays + 1)])
    cols = np.array([_get_list(cfg, f"col_effects_{n}") for n in range(1, n_arrays + 1)])
    spec = SimSpec(
        layout=layout,
        row_effects=rows,
        col_effects=cols,
        shock_mean_log=_get_float(cfg, "shock_mean_log", 0.0),
        shock_sd=_get_float(cfg, "shock_sd"),
        idio_sd=_get_float(cfg, "idio_sd"),
        seed=seed if seed is not None else _get_int(cfg, "seed", 0),
        partition_kind=_get_choice(cfg, "partition", PARTITION_KINDS, "cell"),
        rounding=_get_choice(cfg, "rounding", ROUNDING_MODES, "none"),
    )
    collection = simulate(spec)
    write_claims_csv(out_path, collection)
    print(f"wrote {layout.n_observations} cells to {out_path}")
    return str(out_path)


def cmd_inspect(cfg) -> str:
    full = _load_collection(cfg)
    observed_tmax = max(i + j - 1 for (i, j) in full.layout.stacking_order)
    t_max = _get_int(cfg, "t_max", observed_tmax)
    fit_coll = full.restrict_to_diagonals(t_max) if t_max < observed_tmax else full
    lay = fit_coll.layout
    kind = _get_choice(cfg, "partition", PARTITION_KINDS, "cell")
    variant = _get_choice(cfg, "design", IDIO_VARIANTS, "chain_ladder")
    partition = build_partition(kind, lay)
    shock = ShockSpec(
        partition=partition,
        include_across=_get_bool(cfg, "include_across_shock", True),
        include_within=_get_bool(cfg, "include_within_shock", False),
        shared_across_mean=_get_bool(cfg, "shared_shock_mean", True),
    )
    design = assemble(lay, shock, variant)
    n_obs = lay.n_observations
    P = partition.n_subsets
    q = design.C.shape[1] // lay.n_arrays
    lines = [
        "Model dimensions",
        "================",
        f"arrays (N):                {lay.n_arrays}",
        f"grid (I* x J):             {lay.n_rows} x {lay.n_cols}",
        f"cells per array |A|:       {lay.cells_per_array}",
        f"observations N|A|:         {n_obs}",
        f"partition '{kind}' subsets P: {P}",
        f"idiosyncratic params q:    {q}",
        f"A block:                   {n_obs} x {design.A.shape[1]}",
        f"B block:                   {n_obs} x {design.B.shape[1]}",
        f"C block:                   {n_obs} x {design.C.shape[1]}",
        f"L = [A B I]:               {n_obs} x {design.A.shape[1] + design.B.shape[1] + n_obs}",
        f"M before reduction:        {n_obs} x {design.M_full.shape[1]}",
        f"M after reduction:         {n_obs} x {design.M.shape[1]}",
    ]
    if design.dropped:
        lines.append("dropped columns:")
        for lbl, reason in design.dropped:
            lines.append(f"  {'/'.join(map(str, lbl))}  ({reason})")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    return text


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commonshock",
        description="Fit, forecast, and simulate common-shock log-normal claim models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fit", "forecast", "simulate", "inspect"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=None, help="output path (prefix for reports)")
        if name == "simulate":
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "forecast":
            p.add_argument(
                "--independence-counterfactual",
                action="store_true",
                help="also report the total CoV with cross-array covariance zeroed",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.command == "fit":
            cmd_fit(cfg, args.out or cfg.get("out", "report"))
        elif args.command == "forecast":
            cmd_forecast(
                cfg,
                args.out or cfg.get("out", "report"),
                independence=args.independence_counterfactual,
            )
        elif args.command == "simulate":
            cmd_simulate(cfg, args.out or cfg.get("out", "simulated.csv"), seed=args.seed)
        elif args.command == "inspect":
            cmd_inspect(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, DesignError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except CommonShockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
