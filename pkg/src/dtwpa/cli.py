"""Command-line front end.

Every subcommand reads a JSON manifest (schemas in ``docs/``), validates it
before doing any work and writes CSV/JSON artifacts into ``--out``.  Exit
status is 0 only when all outputs were written; validation problems exit
with status 2 and a JSON diagnostic on stderr.
"""
from __future__ import annotations

import json
import logging
import sys
from importlib import resources
from pathlib import Path

import click
import jsonschema
import numpy as np

from . import filtsynth, noisecal, rfnet, transim, twpa

log = logging.getLogger("dtwpa")

REFERENCE_DESIGN = {"n": 5, "ripple_db": 0.1, "crossover_hz": 8e9, "z0_ohm": 50.0}


class ManifestError(click.ClickException):
    exit_code = 2

    def __init__(self, message, path=None, details=None):
        super().__init__(message)
        self.path = path
        self.details = details or []

    def show(self, file=None):
        doc = {"error": "invalid manifest", "message": self.message, "path": self.path, "details": self.details}
        click.echo(json.dumps(doc, indent=2), err=True)


def load_schema(name: str) -> dict:
    return json.loads(resources.files("dtwpa").joinpath("schemas", f"{name}.schema.json").read_text())


def read_manifest(path, schema: str, command: str) -> tuple[dict, Path]:
    """Parse and validate a manifest; returns (document, directory for relative paths)."""
    if path is None:
        doc = {"command": command}
        base = Path.cwd()
    else:
        p = Path(path)
        try:
            doc = json.loads(p.read_text())
        except OSError as exc:
            raise ManifestError(f"cannot read manifest: {exc}", str(p)) from None
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}", str(p)) from None
        base = p.parent
    validator = jsonschema.Draft7Validator(load_schema(schema))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        details = [{"at": "/".join(str(x) for x in e.path) or "<root>", "problem": e.message} for e in errors]
        raise ManifestError(f"{len(errors)} schema violation(s)", None if path is None else str(path), details)
    return doc, base


def _resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise ManifestError(f"referenced input does not exist: {p}")
    return p


def _outdir(opt, doc) -> Path:
    out = Path(opt or doc.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


def common_options(fn):
    fn = click.option("--verbose", is_flag=True, help="Log progress to stderr.")(fn)
    fn = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True, help="Worker threads for sweeps.")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Seed for synthetic data.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(fn)
    fn = click.option("--manifest", type=click.Path(dir_okay=False), default=None, help="JSON run manifest.")(fn)
    return fn


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Design, simulate and calibrate a diplexed Josephson traveling-wave amplifier."""


# ---------------------------------------------------------------------------
# synth-diplexer
# ---------------------------------------------------------------------------


def run_synth_diplexer(doc: dict, out: Path) -> dict:
    spec = filtsynth.spec_from_document(doc.get("design", REFERENCE_DESIGN))
    lpf, hpf, net = filtsynth.design_diplexer(spec)
    filtsynth.write_component_report(out / "components.csv", lpf, hpf)
    net.dump(out / "diplexer_netlist.json")
    sw = doc.get("sweep", {"f_start_hz": 1e9, "f_stop_hz": 16e9, "points": 1501})
    freqs = np.linspace(sw["f_start_hz"], sw["f_stop_hz"], sw["points"])
    sweep = rfnet.nport_sparams(net, freqs)
    sweep.to_csv(out / "diplexer_sparams.csv")
    summary = {"order": spec.order, "ripple_db": spec.ripple_db, "crossover_design_hz": spec.crossover_hz}
    try:
        fx = rfnet.crossover_frequency(sweep)
        at = rfnet.nport_sparams(net, [fx])
        summary.update(
            crossover_hz=fx,
            s11_db_at_crossover=float(at.db(1, 1)[0]),
            s21_db_at_crossover=float(at.db(2, 1)[0]),
            s31_db_at_crossover=float(at.db(3, 1)[0]),
        )
    except rfnet.NoCrossoverError:
        summary["crossover_hz"] = None
    summary["unitarity_max"] = float(rfnet.unitarity_error(sweep).max())
    summary["components"] = filtsynth.component_rows(lpf, hpf)
    noisecal.write_summary(summary, out / "diplexer_summary.json")
    return summary


@main.command("synth-diplexer")
@common_options
def synth_diplexer(manifest, out, seed, threads, verbose):
    """Synthesize the Chebyshev diplexer and sweep its S-parameters."""
    _setup(verbose)
    doc, _ = read_manifest(manifest, "synth_diplexer", "synth-diplexer")
    outdir = _outdir(out, doc)
    try:
        summary = run_synth_diplexer(doc, outdir)
    except (filtsynth.PrototypeUnavailableError, filtsynth.InconsistentDesignError, ValueError) as exc:
        raise click.ClickException(f"synthesis failed: {exc}") from None
    click.echo(f"wrote diplexer report to {outdir} (crossover {summary.get('crossover_hz')})")


# ---------------------------------------------------------------------------
# gain
# ---------------------------------------------------------------------------


def _device(doc: dict):
    spec = filtsynth.spec_from_document(doc.get("filter", REFERENCE_DESIGN))
    _, _, dip = filtsynth.design_diplexer(spec)
    design = twpa.TwpaDesign.from_dict(doc.get("twpa", {}))
    line = twpa.build_twpa_netlist(design)
    return twpa.assemble_device(line, dip, dip), design


def _sim_config(doc: dict) -> transim.SimConfig:
    s = doc.get("sim", {})
    extra = {}
    if "newton_tol" in s:
        extra["newton_tol"] = s["newton_tol"]
    if "max_newton_iters" in s:
        extra["max_newton_iters"] = s["max_newton_iters"]
    return transim.SimConfig.commensurate(
        resolution=s.get("resolution_hz", 25e6), dt=s.get("dt_s", 1e-12), settle_time=s.get("settle_time_s", 30e-9), **extra
    )


def _write_gain_csv(path, f, s21, s43) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_hz", "gain_db", "s43_db"])
        for a, b, c in zip(f, s21, s43):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])


def run_gain(doc: dict, out: Path, threads: int = 1) -> dict:
    mode = doc.get("mode", "pump-off")
    if mode != "pump-off" and "pump" not in doc:
        raise ManifestError("pump-on mode requires a pump tone")
    device, design = _device(doc)
    sig = doc["signal"]
    cfg = _sim_config(doc)
    freqs = np.arange(sig["f_start_hz"], sig["f_stop_hz"] + 0.5 * sig["step_hz"], sig["step_hz"])
    freqs = np.unique(cfg.snap(freqs))
    summary = {"mode": mode, "n_cells": design.n_cells}
    if mode in ("pump-off", "both"):
        if doc.get("pump_off_engine", "nodal") == "nodal":
            sw = rfnet.nport_sparams(device.linearized(), freqs)
            s21, s43 = sw.db(2, 1), sw.db(4, 3)
        else:
            s21 = transim.pumped_gain_profile(
                device, transim.DriveConfig(), freqs, sig.get("power_dbm", -110.0), cfg, 1, 2, False, threads
            ).gain_db
            s43 = transim.pumped_gain_profile(
                device, transim.DriveConfig(), freqs, sig.get("power_dbm", -110.0), cfg, 3, 4, False, threads
            ).gain_db
        _write_gain_csv(out / "gain_pump_off.csv", freqs, s21, s43)
        summary["pump_off_max_s21_db"] = float(np.max(s21))
    if mode in ("pump-on", "both"):
        p = doc["pump"]
        tone = transim.Tone(p.get("port", 3), float(cfg.snap(p["frequency_hz"])), p["power_dbm"])
        drive = transim.DriveConfig((tone,), p.get("ramp_time_s"))
        prof = transim.pumped_gain_profile(
            device, drive, freqs, sig.get("power_dbm", -110.0), cfg, 1, 2, doc.get("s43", True), threads
        )
        prof.to_csv(out / "gain_pump_on.csv")
        summary["pump_on"] = {
            "pump_hz": tone.frequency,
            "pump_dbm": tone.power_dbm,
            "max_gain_db": float(prof.gain_db.max()),
            "manley_rowe_max": float(max(pt.manley_rowe_residual for pt in prof.points)),
            "max_junction_phase": float(max(pt.max_abs_phase for pt in prof.points)),
        }
    noisecal.write_summary(summary, out / "gain_summary.json")
    return summary


@main.command("gain")
@common_options
def gain(manifest, out, seed, threads, verbose):
    """Pump-off and/or pump-on transmission of the assembled device."""
    _setup(verbose)
    doc, _ = read_manifest(manifest, "gain", "gain")
    if "signal" not in doc:
        raise ManifestError("gain manifest needs a signal sweep")
    outdir = _outdir(out, doc)
    try:
        run_gain(doc, outdir, threads or doc.get("threads", 1))
    except (transim.NewtonConvergenceError, transim.JunctionRunawayError) as exc:
        raise click.ClickException(f"simulation failed: {exc}") from None
    click.echo(f"wrote gain profile(s) to {outdir}")


# ---------------------------------------------------------------------------
# noise-fit
# ---------------------------------------------------------------------------


def run_noise_fit(doc: dict, base: Path, out: Path, seed: int | None) -> dict:
    summary: dict = {}
    if "sweeps_csv" in doc:
        sweeps = noisecal.read_noise_sweeps(_resolve(base, doc["sweeps_csv"]), doc.get("unit", "quanta"))
        fits = [noisecal.fit_chain_noise(s) for s in sweeps]
        noisecal.write_chain_fits(fits, out / "chain_fits.csv")
        summary["chain_fits"] = [f.to_dict() for f in fits]
    gains = None
    if "gain_table_csv" in doc:
        gains, n_add, err = noisecal.read_gain_table(_resolve(base, doc["gain_table_csv"]))
    elif "synthetic" in doc:
        syn = dict(doc["synthetic"])
        gains, n_add, err = noisecal.synthetic_gain_sweep(seed=seed if seed is not None else 0, **syn)
    if gains is not None:
        dec = noisecal.decompose_twpa_noise(
            gains,
            n_add,
            err,
            gain_unit="db",
            exclusion=doc.get("exclusion", "min-noise"),
            mask=doc.get("mask"),
            weighted=doc.get("weighted", True),
        )
        summary["decomposition"] = dec.to_dict()
    noisecal.write_summary(summary, out / "noise_summary.json")
    return summary


@main.command("noise-fit")
@common_options
def noise_fit(manifest, out, seed, threads, verbose):
    """Chain added-noise fits and amplifier/remaining-chain decomposition."""
    _setup(verbose)
    doc, base = read_manifest(manifest, "noise_fit", "noise-fit")
    if manifest is None:
        raise ManifestError("noise-fit needs a manifest naming its data")
    outdir = _outdir(out, doc)
    try:
        run_noise_fit(doc, base, outdir, seed if seed is not None else doc.get("seed"))
    except (noisecal.IllConditionedFitError, noisecal.UnphysicalGainError, noisecal.InsufficientPointsError) as exc:
        raise click.ClickException(f"fit failed: {exc}") from None
    except ValueError as exc:
        raise ManifestError(str(exc)) from None
    click.echo(f"wrote noise fits to {outdir}")


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def run_calibrate(doc: dict, base: Path, out: Path) -> dict:
    summary: dict = {"warnings": []}
    if "table_csv" in doc:
        import warnings

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", noisecal.CalibrationWarning)
            cal = noisecal.read_calibration_table(_resolve(base, doc["table_csv"]))
        summary["warnings"] += [str(w.message) for w in caught]
        cal.to_csv(out / "attenuation.csv")
        summary["attenuation_db"] = [float(v) for v in cal.attenuation_db]
        summary["inconsistent_points"] = int(np.sum(cal.inconsistent))
    if "pump" in doc:
        p = doc["pump"]
        summary["pump_report"] = {
            "source_dbm": p["source_dbm"],
            "attenuation_db": p["attenuation_db"],
            "at_device_dbm": noisecal.power_at_device(p["source_dbm"], p["attenuation_db"]),
        }
    noisecal.write_summary(summary, out / "calibration_report.json")
    return summary


@main.command("calibrate")
@common_options
def calibrate(manifest, out, seed, threads, verbose):
    """Input-line attenuation and pump power at the device."""
    _setup(verbose)
    doc, base = read_manifest(manifest, "calibrate", "calibrate")
    if manifest is None:
        raise ManifestError("calibrate needs a manifest naming its data")
    outdir = _outdir(out, doc)
    try:
        summary = run_calibrate(doc, base, outdir)
    except ValueError as exc:
        raise ManifestError(str(exc)) from None
    for w in summary["warnings"]:
        click.echo(f"warning: {w}", err=True)
    click.echo(f"wrote calibration report to {outdir}")


# ---------------------------------------------------------------------------
# paper-repro
# ---------------------------------------------------------------------------

# operating point found by pump sweep for the default 1200-cell design
DEFAULT_PUMP = {"port": 3, "frequency_hz": 8.45e9, "power_dbm": -65.0}


def _synthetic_calibration(out: Path) -> Path:
    """Forward-modelled calibration table: A(f) ramp and a 90 dB output chain."""
    import csv

    f = np.linspace(4e9, 9e9, 11)
    a = noisecal.db_to_linear(np.linspace(-68.0, -72.0, f.size))
    g = noisecal.db_to_linear(90.0)
    s_in = noisecal.quanta_to_psd(0.5, f)
    p_vna = np.full(f.size, 1e-3)
    path = out / "synthetic_calibration.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_hz", "p_vna_w", "p_out_w", "s_in", "s_out"])
        for row in zip(f, p_vna, a * g * p_vna, s_in, g * s_in):
            w.writerow([repr(float(v)) for v in row])
    return path


@main.command("paper-repro")
@common_options
def paper_repro(manifest, out, seed, threads, verbose):
    """Run the design, scattering, noise and calibration workflows in sequence."""
    _setup(verbose)
    doc, base = read_manifest(manifest, "paper_repro", "paper-repro")
    outdir = _outdir(out, doc)
    seed = seed if seed is not None else doc.get("seed", 0)
    report: dict = {}
    d = outdir / "diplexer"
    d.mkdir(exist_ok=True)
    report["diplexer"] = {
        k: v for k, v in run_synth_diplexer({"design": REFERENCE_DESIGN}, d).items() if k != "components"
    }
    log.info("diplexer done")
    g = outdir / "gain"
    g.mkdir(exist_ok=True)
    gdoc = {
        "mode": "both" if doc.get("pump_on", False) else "pump-off",
        "twpa": doc.get("twpa", {}),
        "pump": doc.get("pump", DEFAULT_PUMP),
        "signal": doc.get("signal", {"f_start_hz": 4e9, "f_stop_hz": 12e9, "step_hz": 0.25e9, "power_dbm": -110.0}),
        "sim": doc.get("sim", {}),
    }
    report["gain"] = run_gain(gdoc, g, threads)
    log.info("gain done")
    n = outdir / "noise"
    n.mkdir(exist_ok=True)
    nres = run_noise_fit({"synthetic": {"rel_noise": 0.03}}, base, n, seed)
    report["noise"] = {k: nres["decomposition"][k] for k in ("n_twpa", "n_twpa_err", "n_rem", "n_rem_err")}
    c = outdir / "calibration"
    c.mkdir(exist_ok=True)
    table = _synthetic_calibration(c)
    cres = run_calibrate({"table_csv": str(table), "pump": {"source_dbm": -15.8, "attenuation_db": 61.0}}, base, c)
    report["calibration"] = {"pump_report": cres["pump_report"], "attenuation_db": cres["attenuation_db"]}
    noisecal.write_summary(report, outdir / "repro_summary.json")
    click.echo(f"wrote reproduction artifacts to {outdir}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
