"""Command-line interface: config-driven spectra, shifts, budgets, and fits.

Subcommands: spectrum | chi | t1-budget | fit | timedomain.  All read a YAML
config (see configs/reference.yaml) and write CSV or JSON artifacts carrying
a metadata header with the tool version, config hash, and seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .fitting import (
    NoPeakError,
    fit_couplings,
    fit_fluxonium_energies,
    fit_lorentzian,
    read_trace_csv,
)
from .hilbert import CircuitParams, ConfigError, FluxoniumParams, HarmonicModeParams
from .loss import ALL_CHANNELS, LossParams, t1_budget
from .spectra import dispersive_shift, solve_circuit
from .timedomain import DecaySample, fit_cavity_lifetime, regress_dispersion

SCHEMA_VERSION = 1


class ConfigFileError(ValueError):
    """Config file failed to parse or validate; message names the field."""


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigFileError(f"{where}: missing required field {key!r}")
    return mapping[key]


def load_config(path: str | Path) -> dict:
    """Parse and validate a YAML run config into plain objects.

    Returns a dict with keys: circuit (CircuitParams), loss (LossParams or
    None), grid (ndarray), output_format, raw (the parsed tree), text.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigFileError(f"{path}: YAML parse error: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigFileError(f"{path}: top level must be a mapping")

    circ = _require(tree, "circuit", str(path))
    fl = _require(circ, "fluxonium", "circuit")
    try:
        fluxonium = FluxoniumParams(
            e_j=float(_require(fl, "e_j", "circuit.fluxonium")),
            e_c=float(_require(fl, "e_c", "circuit.fluxonium")),
            e_l=float(_require(fl, "e_l", "circuit.fluxonium")),
            cutoff=int(fl.get("cutoff", 110)),
        )
    except ConfigError as exc:
        raise ConfigFileError(f"circuit.fluxonium: {exc}") from exc
    modes = []
    for i, m in enumerate(circ.get("modes", [])):
        where = f"circuit.modes[{i}]"
        coupling_to = tuple(
            (str(other), float(g)) for other, g in (m.get("coupling_to") or {}).items()
        )
        try:
            modes.append(HarmonicModeParams(
                label=str(_require(m, "label", where)),
                frequency=float(_require(m, "frequency", where)),
                cutoff=int(m.get("cutoff", 6)),
                coupling_to_qubit=float(m.get("coupling_to_qubit", 0.0)),
                coupling_to=coupling_to,
            ))
        except ConfigError as exc:
            raise ConfigFileError(f"{where}: {exc}") from exc
    try:
        circuit = CircuitParams(fluxonium, tuple(modes), float(circ.get("flux", 0.0)))
    except ConfigError as exc:
        raise ConfigFileError(f"circuit: {exc}") from exc

    loss = None
    if "loss" in tree:
        lo = tree["loss"]
        try:
            loss = LossParams(
                q_diel=float(_require(lo, "q_diel", "loss")),
                q_ind=float(_require(lo, "q_ind", "loss")),
                x_qp=float(_require(lo, "x_qp", "loss")),
                t_qubit=float(_require(lo, "t_qubit", "loss")),
                t_res=float(_require(lo, "t_res", "loss")),
                kappa_res=float(_require(lo, "kappa_res", "loss")),
                t_c_al=float(lo.get("t_c_al", 1.2)),
                q_diel_exponent=float(lo.get("q_diel_exponent", 0.7)),
                qp_phase_offset=float(lo.get("qp_phase_offset", 0.5)),
                purcell_literal_nth=bool(lo.get("purcell_literal_nth", False)),
            )
        except (ValueError, ConfigError) as exc:
            raise ConfigFileError(f"loss: {exc}") from exc

    grid = None
    if "sweep" in tree:
        sw = tree["sweep"]
        start = float(_require(sw, "start", "sweep"))
        stop = float(_require(sw, "stop", "sweep"))
        points = int(_require(sw, "points", "sweep"))
        if points < 1:
            raise ConfigFileError("sweep.points: must be >= 1")
        if points > 1 and not start < stop:
            raise ConfigFileError("sweep: start must be < stop when points > 1")
        grid = np.linspace(start, stop, points)

    fmt = str(tree.get("output", {}).get("format", "csv"))
    if fmt not in ("csv", "json"):
        raise ConfigFileError(f"output.format: must be csv or json, got {fmt!r}")
    return {
        "circuit": circuit, "loss": loss, "grid": grid,
        "output_format": fmt, "raw": tree, "text": text,
    }


def _metadata(cfg, seed) -> dict:
    return {
        "tool": "fluxcav",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config_sha256": hashlib.sha256(cfg["text"].encode()).hexdigest(),
        "seed": seed,
    }


def _write_table(path: Path, meta: dict, columns: list[str], rows, fmt: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {"meta": meta, "columns": columns, "rows": [list(r) for r in rows]}
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return
    with path.open("w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k} = {v}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _write_json(path: Path, meta: dict, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"meta": meta, **payload}, indent=2) + "\n")


def _sweep_rows(grid, jobs, per_point, *args):
    """Run per_point(flux, *args) over the grid; collect rows and failures.

    per_point must be a module-level function so it can cross the process
    boundary when jobs > 1.
    """
    import concurrent.futures

    rows, failures = [], []
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(per_point, float(f), *args): float(f) for f in grid}
            results = {}
            for fut in concurrent.futures.as_completed(futures):
                flux = futures[fut]
                try:
                    results[flux] = fut.result()
                except Exception as exc:
                    failures.append((flux, str(exc)))
            for f in grid:
                if float(f) in results:
                    rows.append(results[float(f)])
    else:
        for f in grid:
            try:
                rows.append(per_point(float(f), *args))
            except Exception as exc:
                failures.append((float(f), str(exc)))
    return rows, failures


def _grid_or_die(cfg):
    if cfg["grid"] is None:
        raise ConfigFileError("sweep: section is required for this command")
    return cfg["grid"]


def _finish(out_dir, written, failures):
    for flux, msg in failures:
        print(f"failed flux point {flux}: {msg}", file=sys.stderr)
    for p in written:
        print(p)
    return 1 if failures else 0


def _spectrum_point(flux, circuit):
    sol = solve_circuit(circuit.replace_flux(flux))
    n_modes = len(circuit.modes)
    ground = (0,) * (1 + n_modes)
    row = [flux]
    for q in (1, 2):
        lab = (q,) + (0,) * n_modes
        row.append(sol.energy_of(lab) - sol.energy_of(ground))
    row[2] -= row[1]  # f12 = E2 - E1
    for k in range(n_modes):
        lab = tuple(1 if i == k + 1 else 0 for i in range(1 + n_modes))
        row.append(sol.energy_of(lab) - sol.energy_of(ground))
    return row


def cmd_spectrum(cfg, args) -> int:
    circuit = cfg["circuit"]
    grid = _grid_or_die(cfg)
    branch_cols = [f"f_{m.label}" for m in circuit.modes]
    rows, failures = _sweep_rows(grid, args.jobs, _spectrum_point, circuit)
    out = Path(args.out) / f"spectrum.{cfg['output_format']}"
    _write_table(out, _metadata(cfg, args.seed), ["flux", "f01", "f12"] + branch_cols,
                 rows, cfg["output_format"])
    return _finish(args.out, [out], failures)


def _scale_couplings(c, factor):
    modes = tuple(
        HarmonicModeParams(
            label=m.label, frequency=m.frequency, cutoff=m.cutoff,
            coupling_to_qubit=m.coupling_to_qubit * factor,
            coupling_to=tuple((o, g * factor) for o, g in m.coupling_to),
        )
        for m in c.modes
    )
    return CircuitParams(c.fluxonium, modes, c.flux)


def _chi_point(flux, circuit, bands, band_frac):
    row = [flux]
    sol = solve_circuit(circuit.replace_flux(flux))
    for k in range(len(circuit.modes)):
        row.append(dispersive_shift(sol, k + 1))
    if bands:
        for k, m in enumerate(circuit.modes):
            lo = solve_circuit(_scale_couplings(circuit, 1 - band_frac[m.label]).replace_flux(flux))
            hi = solve_circuit(_scale_couplings(circuit, 1 + band_frac[m.label]).replace_flux(flux))
            a, b = dispersive_shift(lo, k + 1), dispersive_shift(hi, k + 1)
            row.extend([min(a, b), max(a, b)])
    return row


def cmd_chi(cfg, args) -> int:
    circuit = cfg["circuit"]
    grid = _grid_or_die(cfg)
    labels = [m.label for m in circuit.modes]
    bands = bool(cfg["raw"].get("chi", {}).get("bands", False))
    band_frac = {lab: 0.10 if i == 0 else 0.15 for i, lab in enumerate(labels)}
    rows, failures = _sweep_rows(grid, args.jobs, _chi_point, circuit, bands, band_frac)
    cols = ["flux"] + [f"chi_Q{lab}_khz" for lab in labels]
    if bands:
        for lab in labels:
            cols += [f"chi_Q{lab}_lo_khz", f"chi_Q{lab}_hi_khz"]
    out_dir = Path(args.out)
    out = out_dir / f"chi.{cfg['output_format']}"
    _write_table(out, _metadata(cfg, args.seed), cols, rows, cfg["output_format"])

    # zero-crossing report from the completed rows
    from .spectra import find_zero_crossings

    report = {}
    if rows:
        arr = np.array(sorted(rows, key=lambda r: r[0]), dtype=float)
        for k, lab in enumerate(labels):
            report[lab] = list(find_zero_crossings(arr[:, 0], arr[:, k + 1]))
    zc = out_dir / "chi_zero_crossings.json"
    _write_json(zc, _metadata(cfg, args.seed), {"zero_crossings": report})
    return _finish(args.out, [out, zc], failures)


def cmd_t1_budget(cfg, args) -> int:
    circuit = cfg["circuit"]
    grid = _grid_or_die(cfg)
    if cfg["loss"] is None:
        raise ConfigFileError("loss: section is required for t1-budget")
    if args.channels is None:
        channels = ALL_CHANNELS
    else:
        channels = tuple(x for x in args.channels.split(",") if x)
    for ch in channels:
        if ch not in ALL_CHANNELS:
            raise ConfigFileError(f"--channels: unknown channel {ch!r}")
    if not channels:
        raise ConfigFileError("--channels: no channels enabled")

    rates = t1_budget(circuit, cfg["loss"], grid, channels=channels)
    cols = [
        "flux", "gamma_dielectric", "gamma_inductive", "gamma_quasiparticle",
        "gamma_purcell_up", "gamma_purcell_down", "t1_total_s",
    ]
    total = rates.gamma_total
    t1 = np.where(total > 0, 1.0 / np.where(total > 0, total, 1.0), np.inf)
    rows = [
        [
            float(rates.flux_grid[i]), float(rates.gamma_diel[i]),
            float(rates.gamma_ind[i]), float(rates.gamma_qp[i]),
            float(rates.gamma_purcell_up[i]), float(rates.gamma_purcell_down[i]),
            float(t1[i]),
        ]
        for i in range(len(rates.flux_grid))
    ]
    out = Path(args.out) / f"t1_budget.{cfg['output_format']}"
    _write_table(out, _metadata(cfg, args.seed), cols, rows, cfg["output_format"])
    return _finish(args.out, [out], [])


def cmd_fit(cfg, args) -> int:
    data_dir = Path(args.data)
    traces = sorted(data_dir.glob("trace_*.csv"))
    if not traces:
        raise ConfigFileError(f"data dir {data_dir} contains no trace_*.csv files")
    meta = _metadata(cfg, args.seed)
    meta["input_sha256"] = {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in traces
    }
    out_dir = Path(args.out)

    peaks, points, peak_failures = [], [], []
    for p in traces:
        t = read_trace_csv(p.read_text())
        try:
            pk = fit_lorentzian(t)
        except NoPeakError as exc:
            peak_failures.append((t.flux, f"{p.name}: {exc}"))
            continue
        peaks.append([t.flux, pk.center, pk.center_err, pk.width, pk.amplitude])
        points.append((t.flux, "f01", pk.center))
    peaks_out = out_dir / "peaks.json"
    _write_json(peaks_out, meta, {
        "columns": ["flux", "center_ghz", "center_err_ghz", "width_ghz", "amplitude"],
        "rows": peaks,
    })

    fit_cfg = cfg["raw"].get("fit", {})
    init = cfg["circuit"].fluxonium
    energy = fit_fluxonium_energies(points, init, cutoff=int(fit_cfg.get("cutoff", init.cutoff)))
    energy_out = out_dir / "energy_fit.json"
    _write_json(energy_out, meta, {
        "params": energy.params, "errors": energy.errors,
        "residual_rms_ghz": energy.residual_rms, "converged": energy.converged,
        "iterations": energy.iterations,
    })
    written = [peaks_out, energy_out]

    branches = data_dir / "branches.csv"
    if branches.exists() and cfg["circuit"].modes:
        rows = []
        with branches.open() as fh:
            for rec in csv.DictReader(r for r in fh if not r.startswith("#")):
                label = tuple(int(x) for x in rec["label"].split(";"))
                rows.append((float(rec["flux"]), label, float(rec["frequency"])))
        fitted = FluxoniumParams(
            e_j=energy.params["e_j"], e_c=energy.params["e_c"],
            e_l=energy.params["e_l"], cutoff=init.cutoff,
        )
        g0 = (cfg["circuit"].modes[0].coupling_to_qubit or 0.02, 0.01)
        coup = fit_couplings(rows, fitted, cfg["circuit"], init=g0,
                             qubit_levels=int(fit_cfg.get("qubit_levels", 8)))
        coup_out = out_dir / "coupling_fit.json"
        _write_json(coup_out, meta, {
            "params": coup.params, "errors": coup.errors,
            "residual_rms_ghz": coup.residual_rms, "converged": coup.converged,
        })
        written.append(coup_out)
    return _finish(args.out, written, peak_failures)


def cmd_timedomain(cfg, args) -> int:
    td = cfg["raw"].get("timedomain", {})
    task = td.get("task", "lifetime")
    meta = _metadata(cfg, args.seed)
    out_dir = Path(args.out)
    data = Path(args.data)
    if task == "dispersion":
        path = data if data.is_file() else data / "dispersion.csv"
        pg, pd = [], []
        with path.open() as fh:
            reader = csv.DictReader(r for r in fh if not r.startswith("#"))
            fields = reader.fieldnames or []
            for need in ("n", "delta_g_khz", "delta_e_khz"):
                if need not in fields:
                    raise ConfigFileError(f"{path.name}: missing column {need!r}")
            for rec in reader:
                n = float(rec["n"])
                dg, de = float(rec["delta_g_khz"]), float(rec["delta_e_khz"])
                pg.append((n, dg))
                pd.append((n, de - dg))
        model, errors = regress_dispersion(pg, pd)
        out = out_dir / "dispersion_fit.json"
        _write_json(out, meta, {
            "params": {
                "detuning_khz": model.detuning, "kerr_khz": model.kerr,
                "chi_qc_khz": model.chi_qc, "chi_nl_khz": model.chi_nl,
            },
            "errors": errors,
        })
        return _finish(args.out, [out], [])
    if task == "lifetime":
        path = data if data.is_file() else data / "decay.csv"
        samples = []
        with path.open() as fh:
            reader = csv.DictReader(r for r in fh if not r.startswith("#"))
            fields = reader.fieldnames or []
            for need in ("t_us", "beta_re", "beta_im", "c_re", "c_im"):
                if need not in fields:
                    raise ConfigFileError(f"{path.name}: missing column {need!r}")
            for rec in reader:
                samples.append(DecaySample(
                    t=float(rec["t_us"]),
                    beta=complex(float(rec["beta_re"]), float(rec["beta_im"])),
                    c_value=complex(float(rec["c_re"]), float(rec["c_im"])),
                ))
        res = fit_cavity_lifetime(
            samples,
            alpha0_init=complex(td.get("alpha0_re", 1.0), td.get("alpha0_im", 0.0)),
            delta_init=float(td.get("delta_init_khz", -20.0)),
            t1c_init=float(td.get("t1c_init_us", 200.0)),
            literal=args.convention == "literal",
        )
        out = out_dir / "lifetime_fit.json"
        _write_json(out, meta, {
            "params": res.params, "errors": res.errors,
            "residual_rms": res.residual_rms, "converged": res.converged,
        })
        return _finish(args.out, [out], [])
    raise ConfigFileError(f"timedomain.task: must be dispersion or lifetime, got {task!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxcav",
        description="Fluxonium-cavity spectra, dispersive shifts, loss budgets, and fits.",
    )
    parser.add_argument("--version", action="version", version=f"fluxcav {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "spectrum": (cmd_spectrum, "Labeled transition frequencies over a flux sweep"),
        "chi": (cmd_chi, "Dispersive shift curves and zero crossings"),
        "t1-budget": (cmd_t1_budget, "Per-channel T1 loss budget over a flux sweep"),
        "fit": (cmd_fit, "Peak extraction, energy fit, and coupling fit"),
        "timedomain": (cmd_timedomain, "Dispersion regression or cavity lifetime fit"),
    }
    for name, (fn, help_text) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=["csv", "json"],
                       help="override output.format from the config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, default=0, help="RNG seed recorded in outputs")
        if name == "t1-budget":
            p.add_argument("--channels", default=None,
                           help="comma-separated subset of " + ",".join(ALL_CHANNELS))
        if name in ("fit", "timedomain"):
            p.add_argument("--data", required=True, help="input data file or directory")
        if name == "timedomain":
            p.add_argument("--convention", choices=["normalized", "literal"],
                           default="normalized",
                           help="characteristic-function envelope convention")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.format:
            cfg["output_format"] = args.format
        return args.func(cfg, args)
    except (ConfigFileError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
