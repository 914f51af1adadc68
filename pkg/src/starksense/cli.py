"""Command-line front end: ``stark-sense {levels,spectrum,sense,calibrate,convert}``.

Units in all files and flags: frequencies and amplitudes are ordinary
frequencies in GHz, times in ns, powers in dBm (``--power-w`` in watts).
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import asdict, replace
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    IllConditionedWarning,
    InconsistentInput,
    InvalidParams,
    NoConvergence,
    StarkSenseError,
)
from .io import (
    RunConfig,
    apply_overrides,
    dumps,
    load_config,
    parse_value,
    read_csv,
    write_csv,
    write_spectrum,
)
from .qudit import CircuitParams, DriveTone, lab_transitions
from .transmon import CooperPairBoxParams, analytic_circuit, diagonalize

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_ILL_CONDITIONED = 4
EXIT_INCONSISTENT = 5
EXIT_ROWS_FAILED = 6

UNITS = (
    "Frequencies and amplitudes are ordinary frequencies in GHz (A/2pi, omega/2pi), "
    "times in ns, powers in dBm."
)


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


# configuration helpers ------------------------------------------------------


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig(source="<flags>")
    apply_overrides(cfg, args.set or [])
    # dedicated flags take precedence over the file
    for key, attr in FLAG_KEYS:
        v = getattr(args, attr, None)
        if v is not None:
            cfg.set(key, v)
    return cfg


FLAG_KEYS = [
    ("circuit.omega_q", "omega_q"),
    ("circuit.gamma", "gamma"),
    ("circuit.E_C", "ec"),
    ("circuit.E_J", "ej"),
    ("circuit.mapping", "mapping"),
    ("drive.frequency", "drive_frequency"),
    ("drive.amplitudes", "amplitudes"),
    ("probe.amplitude", "probe_amplitude"),
]


def _transmon(cfg: RunConfig) -> Optional[CooperPairBoxParams]:
    has_ej = "circuit.E_C" in cfg or "circuit.E_J" in cfg
    if not has_ej:
        return None
    ec = cfg.number("circuit.E_C", positive=True)
    ej = cfg.number("circuit.E_J", positive=True)
    if ec is None or ej is None:
        raise cfg.error("circuit.E_C" if ec is None else "circuit.E_J", "E_C and E_J go together")
    ng = cfg.number("circuit.n_g", 0.0)
    cutoff = cfg.integer("circuit.charge_cutoff", 30)
    try:
        return CooperPairBoxParams(ec, ej, ng, cutoff)
    except InvalidParams as exc:
        raise cfg.error("circuit.E_C", str(exc)) from None


def _circuit(cfg: RunConfig) -> CircuitParams:
    """Analytic circuit from ``(omega_q, gamma)`` or mapped from ``(E_C, E_J)``."""
    has_q = "circuit.omega_q" in cfg or "circuit.gamma" in cfg
    has_ej = "circuit.E_C" in cfg or "circuit.E_J" in cfg
    if has_q == has_ej:
        key = "circuit.omega_q" if has_q else "circuit"
        raise cfg.error(key, "give exactly one of (omega_q, gamma) or (E_C, E_J)")
    if has_q:
        wq = cfg.number("circuit.omega_q", positive=True)
        g = cfg.number("circuit.gamma", positive=True)
        if wq is None or g is None:
            raise cfg.error("circuit.omega_q", "omega_q and gamma go together")
        return CircuitParams(wq, g)
    params = _transmon(cfg)
    spectrum, _ = diagonalize(params, 3)
    mapping = cfg.get("circuit.mapping", "transitions")
    try:
        return analytic_circuit(spectrum, mapping, params.E_C)
    except InvalidParams as exc:
        raise cfg.error("circuit.mapping", str(exc)) from None


def _order(args) -> int:
    return args.order


def _emit_text(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# commands -------------------------------------------------------------------


def cmd_levels(args) -> int:
    cfg = _config(args)
    circuit = _circuit(cfg)
    f_d = cfg.number("drive.frequency", positive=True)
    if f_d is None:
        raise cfg.error("drive.frequency", "required")
    amps = cfg.axis("drive.amplitude")
    if amps is None:
        raise cfg.error("drive.amplitudes", "required (list or amplitude_start/stop/step)")
    k_max = cfg.integer("levels.k_max", 3)
    if k_max < 1:
        raise cfg.error("levels.k_max", "must be >= 1")
    rows = []
    for a in amps:
        try:
            sol = lab_transitions(circuit, DriveTone(float(a), f_d), k_max, _order(args))
            lines = list(sol.lab_transitions[1:])
        except StarkSenseError:
            lines = [math.nan] * k_max
        rows.append([float(a)] + lines)
    header = ["a_d_ghz"] + [f"line_k{k}" for k in range(1, k_max + 1)]
    write_csv(args.out, header, rows)
    return EXIT_OK


def _qudit_for_simulation(cfg: RunConfig, levels: int):
    from .dynamics import DrivenQudit

    params = _transmon(cfg)
    if params is not None:
        if "circuit.omega_q" in cfg or "circuit.gamma" in cfg:
            raise cfg.error("circuit.omega_q", "give exactly one of (omega_q, gamma) or (E_C, E_J)")
        return DrivenQudit.from_transmon(params, levels)
    # analytic ladder: E_k = k omega_q - gamma k (k + 1) / 4 with harmonic couplings
    c = _circuit(cfg)
    k = np.arange(levels)
    energies = k * c.omega_q - c.gamma * k * (k + 1) / 4
    return DrivenQudit(energies, np.sqrt(np.arange(1, levels)))


def cmd_spectrum(args) -> int:
    from .dynamics import (
        SimulationConfig,
        find_peaks,
        normalize_columns,
        sweep_spectrum,
    )

    cfg = _config(args)
    if not args.out:
        raise CliError("spectrum needs --out")
    sim_fields = {}
    for name, conv in (("T1", float), ("T2", float), ("n_therm", float), ("T_sim", float),
                       ("levels", int), ("integrator_tolerance", float),
                       ("averaging_window_fraction", float), ("steps_per_period", int),
                       ("integrator", str)):
        key = "simulation." + name
        if key in cfg:
            v = cfg.get(key)
            if conv is int:
                v = cfg.integer(key)
            elif conv is float:
                v = cfg.number(key)
            sim_fields[name] = v
    try:
        sim = SimulationConfig(**sim_fields)
    except InvalidParams as exc:
        raise ConfigError(f"{cfg.source}: simulation: {exc}") from None
    probe = cfg.axis("probe.frequency")
    if probe is None:
        raise cfg.error("probe.frequencies", "required (list or frequency_start/stop/step)")
    amps = cfg.axis("drive.amplitude")
    if amps is None:
        amps = np.array([0.0])
    f_d = cfg.number("drive.frequency", positive=True)
    if f_d is None:
        raise cfg.error("drive.frequency", "required")
    a_p = cfg.number("probe.amplitude", 0.02)
    qudit = _qudit_for_simulation(cfg, sim.levels)
    threads = cfg.integer("simulation.threads")
    grid = sweep_spectrum(qudit, probe, amps, f_d, a_p, sim, threads=threads)
    normalize = args.normalize or cfg.flag("output.normalize", False)
    if normalize:
        grid = normalize_columns(grid)
    resolved = cfg.resolved()
    resolved.update({f"simulation.{k}": v for k, v in asdict(sim).items()})
    resolved["probe.amplitude"] = a_p
    resolved["order"] = _order(args)
    write_spectrum(grid, args.out, resolved, __version__)
    if args.peaks:
        prom = cfg.number("output.prominence", args.prominence)
        peaks = find_peaks(grid if grid.normalized else normalize_columns(grid), prom)
        rows = []
        for j, col in enumerate(peaks.columns):
            for p in col:
                rows.append([float(grid.drive_values[j]), p.frequency, p.height, p.width])
        write_csv(args.peaks, ["drive_value", "probe_ghz", "height", "width_ghz"], rows)
    n_bad = int(grid.failed.sum())
    if n_bad:
        print(f"warning: {n_bad} cells failed and are marked nan", file=sys.stderr)
        return EXIT_ROWS_FAILED
    return EXIT_OK


def _sensing_input(cfg: RunConfig, args, omega01, omega02h, omega_d):
    from .sensing import SensingInput

    if args.bare_omega01 is not None or args.bare_gamma is not None:
        if args.bare_omega01 is None or args.bare_gamma is None:
            raise CliError("--bare-omega01 and --bare-gamma go together")
        b01, bg = args.bare_omega01, args.bare_gamma
    else:
        c = _circuit(cfg)
        b01, bg = c.omega01, c.gamma
    delta = args.delta_mhz * 1e-3
    return SensingInput(omega01, omega02h, b01, bg, omega_d, delta)


def _estimate_dict(est) -> dict:
    return {
        "mode": est.mode,
        "amplitude_ghz": est.amplitude,
        "frequency_ghz": est.frequency,
        "amplitude_interval_ghz": list(est.amplitude_interval),
        "frequency_interval_ghz": None if est.frequency_interval is None
        else list(est.frequency_interval),
        "residual_ghz": est.residual,
        "consistency_ghz": est.consistency,
        "condition_number": est.condition,
        "ill_conditioned": est.ill_conditioned,
        "corner_failures": est.corner_failures,
    }


def cmd_sense(args) -> int:
    from .sensing import invert_fixed, invert_free, propagate_uncertainty

    cfg = _config(args)
    if args.omega01 is None or args.omega02half is None:
        raise CliError("sense needs --omega01 and --omega02half")
    inp = _sensing_input(cfg, args, args.omega01, args.omega02half, args.omega_d)
    order = _order(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        est = invert_fixed(inp, order) if inp.omega_d_known is not None else invert_free(inp, order)
        try:
            unc = propagate_uncertainty(inp, order)
            est = replace(est, amplitude_interval=unc.amplitude,
                          frequency_interval=unc.frequency, corner_failures=unc.failures)
        except StarkSenseError as exc:
            est = replace(est, amplitude_interval=(math.nan, math.nan),
                          frequency_interval=None if est.mode == "fixed" else (math.nan, math.nan),
                          corner_failures={"all": f"{type(exc).__name__}: {exc}"})
    out = _estimate_dict(est)
    out["input"] = {
        "omega01_ghz": inp.omega01_meas, "omega02half_ghz": inp.omega02_half_meas,
        "omega_d_ghz": inp.omega_d_known, "bare_omega01_ghz": inp.bare_omega01,
        "bare_gamma_ghz": inp.bare_gamma, "delta_ghz": inp.delta_meas, "order": order,
    }
    _emit_text(dumps(out) + "\n", args.out)
    return EXIT_ILL_CONDITIONED if est.ill_conditioned else EXIT_OK


CAL_IN = ["drive_ghz", "source_dbm", "omega01_ghz", "omega02half_ghz"]
CAL_OUT = ["drive_ghz", "amplitude_ghz", "amplitude_lo", "amplitude_hi", "attenuation_db", "status"]


def _resonator(cfg: RunConfig, args):
    from .sensing import ResonatorParams

    vals = {
        "g": args.g if args.g is not None else cfg.number("resonator.g"),
        "q_c": args.qc if args.qc is not None else cfg.number("resonator.Q_c"),
        "q_i": args.qi if args.qi is not None else cfg.number("resonator.Q_i"),
        "omega_r": args.omega_r if args.omega_r is not None else cfg.number("resonator.omega_r"),
    }
    given = [k for k, v in vals.items() if v is not None]
    if not given:
        return None
    if len(given) != 4:
        raise CliError("resonator needs g, Q_c, Q_i and omega_r together")
    try:
        return ResonatorParams(**vals)
    except InvalidParams as exc:
        raise CliError(str(exc)) from None


def cmd_calibrate(args) -> int:
    from .sensing import calibration_curve

    cfg = _config(args)
    if not args.input or not args.out:
        raise CliError("calibrate needs --input and --out")
    header, rows = read_csv(args.input)
    if header and header != CAL_IN:
        raise CliError(f"{args.input}: expected header {','.join(CAL_IN)}")
    resonator = _resonator(cfg, args)
    out_rows = []
    bad = 0
    order = _order(args)
    nan = math.nan
    for lineno, row in enumerate(rows, start=2):
        try:
            if len(row) != 4:
                raise ValueError("wrong column count")
            f_d, p_src, l1, l2 = (float(x) for x in row)
        except ValueError:
            out_rows.append([row[0] if row else "", nan, nan, nan, nan, "malformed"])
            bad += 1
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                inp = _sensing_input(cfg, args, l1, l2, f_d)
            curve = calibration_curve([inp], [p_src], resonator, order)
            p = curve.points[0]
        except (StarkSenseError, InvalidParams) as exc:
            out_rows.append([f_d, nan, nan, nan, nan, type(exc).__name__])
            bad += 1
            continue
        if not p.ok:
            bad += 1
        lo, hi = p.amplitude_interval
        out_rows.append([p.drive_frequency, p.amplitude, lo, hi, p.attenuation_db, p.status])
    write_csv(args.out, CAL_OUT, out_rows)
    if bad:
        print(f"warning: {bad} of {len(rows)} rows failed", file=sys.stderr)
        return EXIT_ROWS_FAILED
    return EXIT_OK


def cmd_convert(args) -> int:
    from . import sensing as s

    if args.amplitude is not None and args.photons is not None:
        raise CliError("give either --amplitude or --photons, not both")
    if args.power_dbm is not None and args.power_w is not None:
        raise CliError("give either --power-dbm or --power-w, not both")
    if args.g is not None and not args.g > 0:
        raise CliError("--g must be a positive frequency in GHz")
    # power conversions need the quality factors and frequency but not g
    q = (args.qc, args.qi, args.omega_r)
    resonator = None
    if any(v is not None for v in q):
        if any(v is None for v in q):
            raise CliError("power conversion needs --qc, --qi and --omega-r together")
        if not all(v > 0 for v in q):
            raise CliError("--qc, --qi and --omega-r must be positive")
        resonator = argparse.Namespace(q_c=args.qc, q_i=args.qi, omega_r=args.omega_r)
    out = {}
    n = args.photons
    if args.amplitude is not None:
        if args.amplitude < 0:
            raise CliError("--amplitude must be non-negative")
        if args.g is None:
            raise CliError("--amplitude needs --g")
        n = s.photon_number_from_amplitude(args.amplitude, args.g)
        out["amplitude_ghz"] = args.amplitude
    power = args.power_w
    if args.power_dbm is not None:
        power = s.dbm_to_watts(args.power_dbm)
    if power is not None:
        if power < 0:
            raise CliError("power must be non-negative")
        if resonator is None:
            raise CliError("power conversion needs --qc, --qi and --omega-r")
        n_from_p = s.photon_number_from_feedline_power(power, resonator.q_c, resonator.q_i,
                                                       resonator.omega_r)
        if n is not None:
            raise CliError("give either a power or an amplitude/photon number, not both")
        n = n_from_p
        out["feedline_power_w"] = power
        out["feedline_power_dbm"] = s.watts_to_dbm(power)
    if n is None:
        raise CliError("nothing to convert: give --amplitude, --photons, --power-dbm or --power-w")
    if n < 0:
        raise CliError("photon number must be non-negative")
    out["photon_number"] = n
    if args.g is not None and "amplitude_ghz" not in out:
        out["amplitude_ghz"] = s.amplitude_from_photon_number(n, args.g)
    if resonator is not None and "feedline_power_w" not in out:
        p = s.feedline_power_from_photon_number(n, resonator.q_c, resonator.q_i, resonator.omega_r)
        out["feedline_power_w"] = p
        out["feedline_power_dbm"] = s.watts_to_dbm(p)
    if args.source_dbm is not None:
        if "feedline_power_dbm" not in out:
            raise CliError("--source-dbm needs a resonator to compute the feedline power")
        out["attenuation_db"] = out["feedline_power_dbm"] - args.source_dbm
    _emit_text(dumps(out) + "\n", args.out)
    return EXIT_OK


# parser ---------------------------------------------------------------------


def _number_list(text):
    v = parse_value(text)
    items = v if isinstance(v, list) else [v]
    if any(isinstance(x, (bool, str)) for x in items):
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return [float(x) for x in items]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--out", help="output path (default: stdout where applicable)")
    common.add_argument("--order", type=int, choices=range(5), default=4,
                        help="perturbation order of the analytic lines (default 4)")

    circuit = argparse.ArgumentParser(add_help=False)
    g = circuit.add_argument_group("circuit (GHz)")
    g.add_argument("--omega-q", type=float, help="model frequency omega_q/2pi")
    g.add_argument("--gamma", type=float, help="model nonlinearity gamma/2pi")
    g.add_argument("--ec", type=float, help="charging energy E_C/h")
    g.add_argument("--ej", type=float, help="Josephson energy E_J/h")
    g.add_argument("--mapping", choices=["transitions", "charging"],
                   help="how (E_C, E_J) map onto (omega_q, gamma)")

    resonator = argparse.ArgumentParser(add_help=False)
    r = resonator.add_argument_group("readout resonator")
    r.add_argument("--g", type=float, help="qubit-resonator coupling g/2pi in GHz")
    r.add_argument("--qc", type=float, help="coupling quality factor")
    r.add_argument("--qi", type=float, help="internal quality factor")
    r.add_argument("--omega-r", type=float, help="resonator frequency in GHz")

    p = argparse.ArgumentParser(
        prog="stark-sense",
        description="AC Stark shift lines, master-equation spectra and drive sensing. " + UNITS,
        epilog=f"The environment variable STARK_SENSE_THREADS caps sweep threads. "
               f"Exit codes: {EXIT_NO_CONVERGENCE} no convergence, "
               f"{EXIT_ILL_CONDITIONED} ill-conditioned estimate, "
               f"{EXIT_INCONSISTENT} inconsistent lines, {EXIT_ROWS_FAILED} some rows/cells failed, "
               f"{EXIT_USAGE} bad usage or configuration.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    lv = sub.add_parser("levels", parents=[common, circuit],
                        help="analytic lines versus drive amplitude (CSV)")
    lv.add_argument("--drive-frequency", type=float, help="drive frequency in GHz")
    lv.add_argument("--amplitudes", type=_number_list, help="comma-separated A_D/2pi values")
    lv.set_defaults(func=cmd_levels)

    sp = sub.add_parser("spectrum", parents=[common, circuit],
                        help="master-equation spectroscopy sweep (CSV + JSON sidecar)")
    sp.add_argument("--drive-frequency", type=float, help="drive frequency in GHz")
    sp.add_argument("--amplitudes", type=_number_list, help="comma-separated A_D/2pi values")
    sp.add_argument("--probe-amplitude", type=float, help="A_P/2pi in GHz (default 0.02)")
    sp.add_argument("--normalize", action="store_true", help="column-normalize the grid")
    sp.add_argument("--peaks", help="also write extracted peaks to this CSV")
    sp.add_argument("--prominence", type=float, default=0.05,
                    help="peak prominence threshold on normalized columns")
    sp.set_defaults(func=cmd_spectrum)

    se = sub.add_parser("sense", parents=[common, circuit],
                        help="infer drive amplitude (and frequency) from two lines (JSON)")
    se.add_argument("--omega01", type=float, help="measured omega01 line in GHz")
    se.add_argument("--omega02half", type=float, help="measured omega02/2 line in GHz")
    se.add_argument("--omega-d", type=float, help="known drive frequency in GHz (fixed mode)")
    se.add_argument("--delta-mhz", type=float, default=1.0,
                    help="measurement uncertainty of each line in MHz (default 1)")
    se.add_argument("--bare-omega01", type=float, help="undriven omega01 in GHz")
    se.add_argument("--bare-gamma", type=float, help="model nonlinearity gamma/2pi in GHz")
    se.set_defaults(func=cmd_sense)

    ca = sub.add_parser("calibrate", parents=[common, circuit, resonator],
                        help="amplitude and attenuation per drive frequency (CSV)")
    ca.add_argument("--input", help="CSV with " + ",".join(CAL_IN))
    ca.add_argument("--delta-mhz", type=float, default=1.0,
                    help="measurement uncertainty of each line in MHz (default 1)")
    ca.add_argument("--bare-omega01", type=float, help="undriven omega01 in GHz")
    ca.add_argument("--bare-gamma", type=float, help="model nonlinearity gamma/2pi in GHz")
    ca.set_defaults(func=cmd_calibrate)

    co = sub.add_parser("convert", parents=[resonator],
                        help="amplitude / photon number / feedline power conversions (JSON)")
    co.add_argument("--out", help="output path (default stdout)")
    co.add_argument("--amplitude", type=float, help="drive amplitude A/2pi in GHz")
    co.add_argument("--photons", type=float, help="resonator photon number")
    co.add_argument("--power-dbm", type=float, help="feedline power in dBm")
    co.add_argument("--power-w", type=float, help="feedline power in watts")
    co.add_argument("--source-dbm", type=float, help="source power in dBm (gives attenuation)")
    co.set_defaults(func=cmd_convert)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except InconsistentInput as exc:
        print(f"inconsistent input: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (StarkSenseError, InvalidParams) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
