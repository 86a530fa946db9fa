"""Command-line front end: ``nvmem <subcommand> [options]``.

Every subcommand writes CSV/JSON (and PNG unless ``--no-figures``) plus a
``manifest.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (coherence_decay_time, coherence_series, dark_nv0_problem, dark_nvm_problem,
                       illuminated_problem, integrate_master)
from .filters import (FilterSpec, NoiseSpectrum, chi_decay, filter_closed_form, filter_numeric,
                      pulse_train)
from .io import RunManifest, default_out_dir, read_csv, write_csv, write_json
from .optimizer import (Method, ScalingCurve, coupling_scan, find_intercept, fit_power_law, log_grid,
                        optimal_power, sweep_power)
from .physics import (Species, coupling_locus, max_distance_for_coupling, target_transition)
from .scenario import ScenarioError, default_scenario_text, parse_scenario, scenario_from_text, scenario_hash
from .sequences import compose_correlation_sequence, simulate_sequence
from .spectroscopy import (TimeSignal, _lorentz, fit_complex_lorentzian, resonance_positions,
                           sweep_spectrum, sweep_tau, synthesize_ramsey, zero_fill_fft)

FIXTURE = "ramsey_23p8ms.csv"


class _Ctx:
    """Resolved scenario, output directory and manifest of one run."""

    def __init__(self, args):
        if args.scenario:
            path = Path(args.scenario)
            if not path.is_file():
                raise ScenarioError([f"file not found: {path}"], str(path))
            text = path.read_text(encoding="utf-8")
            self.scenario = parse_scenario(path)
        else:
            text = default_scenario_text()
            self.scenario = scenario_from_text(text, "<default>")
        self.args = args
        self.out = Path(args.out or self.scenario.output.dir or default_out_dir())
        self.out.mkdir(parents=True, exist_ok=True)
        self.figures = self.scenario.output.figures and not args.no_figures
        self.manifest = RunManifest(args.command, scenario_hash(text), args.seed)

    def csv(self, name, header, rows, comment=None):
        write_csv(self.out / name, header, rows, comment)
        self.manifest.outputs.append(name)

    def json(self, name, obj):
        write_json(self.out / name, obj)
        self.manifest.outputs.append(name)

    def figure(self, name, fn, *a, **kw):
        if self.figures:
            fn(self.out / name, *a, **kw)
            self.manifest.outputs.append(name)


def _plot():
    from . import plotting
    return plotting


def _grid(args, default):
    """Override a default grid with --start/--stop/--num/--log."""
    if args.start is None and args.stop is None:
        return default
    if args.start is None or args.stop is None:
        raise ValueError("--start and --stop must be given together")
    n = args.num or 41
    if args.log:
        return np.logspace(np.log10(args.start), np.log10(args.stop), n)
    return np.linspace(args.start, args.stop, n)


# Subcommands ---------------------------------------------------------------

def cmd_simulate(ctx, args):
    sc = ctx.scenario
    d = sc.dissipation
    a = sc.physics.A_par_targets[sc.simulate.target]
    model = d.model
    if model == "dark_nv0":
        prob = dark_nv0_problem(a, d.t1_nv0)
    elif model == "illuminated":
        prob = illuminated_problem(a, d.illumination_model(), d.t1_sensor, d.init_fidelity)
    else:
        prob = dark_nvm_problem(a, d.t1_sensor, d.init_fidelity)
        if model == "none":
            prob = replace(prob, channels=())
    est = coherence_decay_time(prob)
    t_final = args.t_final or sc.simulate.t_final
    if t_final is None:
        if not np.isfinite(est.t2star):
            raise ValueError("no decay in this model; set simulate.t_final")
        t_final = 4 * est.t2star
    times = np.linspace(0, t_final, sc.simulate.points)
    traj = integrate_master(prob.H, prob.channels, prob.rho0, times)
    cs = coherence_series(traj, prob.probe)
    ctx.csv("simulate.csv", ["t_seconds", "observable_real", "observable_imag", "ionized_fraction"],
            zip(times, cs.values.real, cs.values.imag, cs.signal_loss))
    ctx.json("simulate.json", dict(model=model, a_par_hz=a, t2star_s=est.t2star,
                                   t2star_surviving_s=est.t2star_surviving, survival_time_s=est.survival_time))
    ctx.figure("simulate.png", _plot().line_plot, times * 1e3,
               {"Re": cs.values.real, "Im": cs.values.imag}, "t (ms)", "target coherence")


def _spec_and_params(sc):
    params = sc.params()
    return params, sc.correlation_spec(rf_center=params.larmor_target)


def cmd_sequence(ctx, args):
    sc = ctx.scenario
    params, spec = _spec_and_params(sc)
    diss = sc.dissipation.sequence_dissipation()
    default = sc.sweep.grid() if sc.sweep.axis == "tau" else None
    taus = _grid(args, default)
    sch = compose_correlation_sequence(spec)
    ctx.csv("sequence_events.csv", ["index", "kind", "segment", "duration_s", "condition", "frequency_hz",
                                    "phase_rad", "cycled"],
            [(i, r["kind"], r["segment"], r["duration"], r.get("condition", ""), r.get("frequency", ""),
              r.get("phase", 0.0), int(r.get("cycled", False))) for i, r in enumerate(sch.to_records())])
    if taus is None:
        r = simulate_sequence(sch, params, diss, init_fidelity=sc.dissipation.init_fidelity)
        ctx.json("sequence.json", dict(memory_iz=r.memory_iz, memory_phase=r.memory_phase,
                                       stored_iz=r.stored_iz, signal_loss=r.signal_loss,
                                       total_time_s=sch.total_time, tau_s=sch.tau, t_c_s=sch.t_c))
        return
    tab = sweep_tau(params, spec, taus, diss, threads=args.threads)
    ctx.csv("sequence.csv", ["tau_s", "signal", "signal_loss"], zip(tab.grid, tab.signal, tab.signal_loss))
    ctx.figure("sequence.png", _plot().line_plot, tab.grid * 1e6, {"signal": tab.signal},
               "tau (us)", "memory signal", markers=True)


def cmd_spectrum(ctx, args):
    sc = ctx.scenario
    params, spec = _spec_and_params(sc)
    larmor = params.larmor_target
    if sc.sweep.axis == "rf_frequency":
        offsets = sc.sweep.grid()
        freqs = offsets + larmor if sc.sweep.relative_to_larmor else offsets
    else:
        freqs = larmor + np.linspace(-4000, 4000, 81)
    freqs = _grid(args, freqs - larmor) + larmor if args.start is not None else freqs
    tab = sweep_spectrum(params, spec, freqs, sc.dissipation.sequence_dissipation(), threads=args.threads,
                         init_fidelity=sc.dissipation.init_fidelity)
    off = tab.grid - larmor
    ctx.csv("spectrum.csv", ["rf_frequency_hz", "offset_hz", "signal", "signal_loss"],
            zip(tab.grid, off, tab.signal, tab.signal_loss))
    m_s = -1.0 if spec.sensor_state_during_tc == 1 else 0.0
    expected = [target_transition(params, k, m_s) - larmor for k in range(len(params.A_par_targets))]
    ctx.json("spectrum.json", dict(larmor_hz=larmor, sensor_m_s=m_s,
                                   resonance_offsets_hz=resonance_positions(off, tab.signal).tolist(),
                                   expected_offsets_hz=expected))
    ctx.figure("spectrum.png", _plot().line_plot, off, {"signal": tab.signal},
               "RF offset from Larmor (Hz)", "memory signal", markers=True)


def _load_fixture():
    return resources.files("nvmem").joinpath("data", FIXTURE)


def cmd_fit(ctx, args):
    if args.synthesize is not None:
        sig = synthesize_ramsey(args.synthesize, args.detuning, noise_sigma=args.noise_sigma, rng=args.seed)
        source = f"synthetic T2*={args.synthesize:g} s"
    else:
        src = Path(args.input) if args.input else _load_fixture()
        header, data = read_csv(src)
        if data.shape[1] < 2 or data.shape[0] < 8:
            raise ValueError(f"{src}: need at least two columns (time, signal) and 8 rows")
        sig = TimeSignal(data[:, 0], data[:, 1])
        source = str(src)
    if args.domain == "time":
        from .dynamics import extract_t2star
        r = extract_t2star(sig.values, sig.times)
        ctx.json("fit.json", dict(source=source, domain="time", t2star_s=r.t2star,
                                  fwhm_hz=1 / (np.pi * r.t2star), detuning_hz=r.frequency,
                                  stderr=r.stderr, converged=r.converged))
        return
    sp = zero_fill_fft(sig, args.zero_fill)
    r = fit_complex_lorentzian(sp)
    one = sp.one_sided()
    model = _lorentz([r.amplitude, r.phase, r.center, r.fwhm, r.baseline.real, r.baseline.imag],
                     one.frequencies, one.acquisition_time, r.center > r.fwhm)
    ctx.csv("fit_spectrum.csv", ["frequency_hz", "re", "im", "model_re", "model_im"],
            zip(one.frequencies, one.values.real, one.values.imag, model.real, model.imag))
    ctx.json("fit.json", dict(source=source, domain="spectrum", center_hz=r.center, fwhm_hz=r.fwhm,
                              t2star_s=1 / (np.pi * r.fwhm), amplitude=r.amplitude, phase_rad=r.phase,
                              stderr=r.stderr, converged=r.converged, zero_fill=args.zero_fill))
    win = (max(0.0, r.center - 8 * r.fwhm), r.center + 8 * r.fwhm)
    ctx.figure("fit.png", _plot().spectrum_fit_plot, one.frequencies, one.values, model, win)


def cmd_filter(ctx, args):
    fs = ctx.scenario.filter
    kind = args.kind or fs.kind
    eta_tau = fs.eta_tau if args.eta_tau is None else args.eta_tau
    eta_tc = fs.eta_tc if args.eta_tc is None else args.eta_tc
    n = args.n or fs.n
    spec = FilterSpec(fs.t, eta_tau, eta_tc)
    x = np.linspace(fs.omega_t_max / fs.points, fs.omega_t_max, fs.points)
    F = filter_closed_form(kind, spec, x, n)
    cols, rows = ["omega_t", "F"], [x, F]
    if kind in ("ramsey", "spin_echo", "cpmg", "pdd"):
        cols.append("F_numeric")
        rows.append(filter_numeric(pulse_train(kind, 1.0, n), x))
    comment = f"sequence={kind} eta_tau={eta_tau:g} eta_tc={eta_tc:g} n={n}"
    ctx.csv("filter.csv", cols, zip(*rows), comment)
    ctx.figure("filter.png", _plot().line_plot, x, {kind: F}, "omega t", "F(omega t)")


def cmd_chi(ctx, args):
    sc = ctx.scenario
    nz, fs = sc.noise, sc.filter
    S = NoiseSpectrum(nz.kind, S0=nz.S0, cutoff=nz.cutoff, amplitude=nz.amplitude, exponent=nz.exponent)
    kind = args.kind or fs.kind
    times = np.logspace(np.log10(nz.t_start), np.log10(nz.t_stop), nz.num)
    rows = []
    for t in times:
        spec = FilterSpec(t, fs.eta_tau, fs.eta_tc)
        r = chi_decay(S, lambda x, spec=spec: filter_closed_form(kind, spec, x, fs.n), t)
        rows.append((t, r.chi, r.W, r.abs_error))
    rows = np.array(rows)
    ctx.csv("chi.csv", ["t_s", "chi", "W", "chi_abs_error"], rows, f"sequence={kind} noise={nz.kind}")
    ctx.figure("chi.png", _plot().line_plot, rows[:, 0], {"W": rows[:, 2]}, "t (s)", "W = exp(-chi)",
               logx=True)


def cmd_sweep_power(ctx, args):
    sc = ctx.scenario
    d = sc.dissipation
    a = args.a_par or sc.physics.A_par_targets[0]
    default = sc.sweep.grid() if sc.sweep.axis == "laser_power" else log_grid(1e-3, 1e2, sc.sweep.points_per_decade)
    powers = _grid(args, default)
    model = d.illumination_model()
    sw = sweep_power(a, powers, model, t1_sensor=d.t1_sensor, init_fidelity=d.init_fidelity,
                     threads=args.threads)
    ctx.csv("sweep_power.csv", ["power_uW", "t2star_s", "t2star_surviving_s", "signal_retained", "usable"],
            zip(sw.powers, sw.t2star, sw.t2star_surviving, sw.signal_retained, sw.usable.astype(int)))
    out = dict(a_par_hz=a, grid_optimum_power_uW=sw.optimum[0], grid_optimum_t2star_s=sw.optimum[1],
               interior_maximum=sw.interior_maximum)
    if args.refine:
        o = optimal_power(a, model, t1_sensor=d.t1_sensor, init_fidelity=d.init_fidelity)
        out.update(optimal_power_uW=o.power, optimal_t2star_s=o.t2star, optimal_gamma_exc_per_s=o.gamma_exc)
    ctx.json("sweep_power.json", out)
    ctx.figure("sweep_power.png", _plot().line_plot, sw.powers, {"ensemble": sw.t2star * 1e3},
               "laser power (uW)", "T2* (ms)", logx=True, logy=True, markers=True)


def _coupling_grid(ctx, args):
    sc = ctx.scenario
    default = sc.sweep.grid() if sc.sweep.axis == "coupling" else log_grid(10, 1e6, sc.sweep.points_per_decade)
    return np.sort(_grid(args, default))


def _scan(ctx, method, grid, threads):
    d = ctx.scenario.dissipation
    return coupling_scan(method, grid, t1_sensor=d.t1_sensor, t1_nv0=d.t1_nv0,
                         model=d.illumination_model(), threads=threads)


def _curve_rows(c: ScalingCurve):
    p = c.powers if c.powers is not None else np.full(c.couplings.size, np.nan)
    return zip(c.couplings, c.t2star, p)


def cmd_sweep_coupling(ctx, args):
    method = args.method or ctx.scenario.sweep.method
    grid = _coupling_grid(ctx, args)
    c = _scan(ctx, method, grid, args.threads)
    ctx.csv("sweep_coupling.csv", ["a_par_hz", "t2star_s", "optimal_power_uW"], _curve_rows(c),
            f"method={method}")
    out = dict(method=method)
    if args.fit_window:
        f = fit_power_law(c, args.fit_window)
        out.update(exponent=f.exponent, exponent_stderr=f.stderr, fit_window_hz=list(args.fit_window))
    ctx.json("sweep_coupling.json", out)
    ctx.figure("sweep_coupling.png", _plot().line_plot, c.couplings, {method: c.t2star},
               "A_par (Hz)", "T2* (s)", logx=True, logy=True, markers=True)


def cmd_intercept(ctx, args):
    ma, mb = args.methods
    grid = _coupling_grid(ctx, args)
    ca, cb = _scan(ctx, ma, grid, args.threads), _scan(ctx, mb, grid, args.threads)
    a, t2 = find_intercept(ca, cb)
    ctx.csv("intercept.csv", ["a_par_hz", f"t2star_{ma}_s", f"t2star_{mb}_s"],
            zip(grid, ca.t2star, cb.t2star))
    ctx.json("intercept.json", dict(methods=[ma, mb], a_par_hz=a, t2star_s=t2))
    ctx.figure("intercept.png", _plot().line_plot, grid, {ma: ca.t2star, mb: cb.t2star},
               "A_par (Hz)", "T2* (s)", logx=True, logy=True)


def cmd_geometry(ctx, args):
    species = Species(args.species)
    a = args.a_par or ctx.scenario.physics.A_par_targets[0]
    d_max = max_distance_for_coupling(a, species)
    theta = np.linspace(0, np.pi, 361)
    locus = coupling_locus(a, species, theta)
    ctx.csv("geometry.csv", ["theta_deg", "distance_nm"], [(np.degrees(t), d * 1e9) for t, d in locus],
            f"species={species.value} a_par_hz={a:g}")
    ctx.json("geometry.json", dict(species=species.value, a_par_hz=a, max_distance_nm=d_max * 1e9,
                                   magic_angle_deg=float(np.degrees(np.arccos(1 / np.sqrt(3))))))
    if locus:
        th, dd = np.array(locus).T
        ctx.figure("geometry.png", _plot().line_plot, np.degrees(th), {"locus": dd * 1e9},
                   "polar angle (deg)", "distance (nm)")


COMMANDS = {
    "simulate": cmd_simulate, "sequence": cmd_sequence, "spectrum": cmd_spectrum, "fit": cmd_fit,
    "filter": cmd_filter, "chi": cmd_chi, "sweep-power": cmd_sweep_power,
    "sweep-coupling": cmd_sweep_coupling, "intercept": cmd_intercept, "geometry": cmd_geometry,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario YAML (default: packaged default scenario)")
    common.add_argument("--out", help="output directory (default: $NVMEM_OUT or ./nvmem_out)")
    common.add_argument("--seed", type=int, default=0, help="seed for random noise (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--start", type=float, help="first grid value of the swept axis")
    grid.add_argument("--stop", type=float, help="last grid value of the swept axis")
    grid.add_argument("--num", type=int, help="number of grid points")
    grid.add_argument("--log", action="store_true", help="logarithmic grid")

    p = argparse.ArgumentParser(prog="nvmem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nvmem {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="target coherence trajectory")
    s.add_argument("--t-final", type=float, help="end time, s (default 4 T2*)")
    sub.add_parser("sequence", parents=[common, grid], help="correlation sequence, optionally vs tau (s)")
    sub.add_parser("spectrum", parents=[common, grid], help="RF frequency sweep (offsets from Larmor, Hz)")
    s = sub.add_parser("fit", parents=[common], help="T2* / linewidth from a time signal")
    s.add_argument("--input", help="CSV with columns time_s, signal (default: shipped 23.8 ms fixture)")
    s.add_argument("--synthesize", type=float, metavar="T2STAR", help="fit a synthetic Ramsey signal")
    s.add_argument("--detuning", type=float, default=200.0, help="detuning of the synthetic signal, Hz")
    s.add_argument("--noise-sigma", type=float, default=0.0)
    s.add_argument("--zero-fill", type=int, default=8)
    s.add_argument("--domain", choices=["spectrum", "time"], default="spectrum")
    s = sub.add_parser("filter", parents=[common], help="filter-function table")
    s.add_argument("--kind", choices=["this_work", "prior_work", "ramsey", "spin_echo", "cpmg", "pdd"])
    s.add_argument("--eta-tau", type=float)
    s.add_argument("--eta-tc", type=float)
    s.add_argument("--n", type=int, help="pulse number for cpmg/pdd")
    s = sub.add_parser("chi", parents=[common], help="noise-induced decay W(t)")
    s.add_argument("--kind", choices=["this_work", "prior_work", "ramsey", "spin_echo", "cpmg", "pdd"])
    s = sub.add_parser("sweep-power", parents=[common, grid], help="T2* versus laser power (uW)")
    s.add_argument("--a-par", type=float, help="coupling, Hz (default: first target)")
    s.add_argument("--refine", action="store_true", help="golden-section refinement of the optimum")
    s = sub.add_parser("sweep-coupling", parents=[common, grid], help="T2* versus A_par (Hz)")
    s.add_argument("--method", choices=[m.value for m in Method])
    s.add_argument("--fit-window", type=float, nargs=2, metavar=("LO", "HI"), help="power-law fit window, Hz")
    s = sub.add_parser("intercept", parents=[common, grid], help="crossing of two scaling curves")
    s.add_argument("--methods", nargs=2, choices=[m.value for m in Method],
                   default=["dark_nv0", "repump_optimal"])
    s = sub.add_parser("geometry", parents=[common], help="dipolar distance for a coupling")
    s.add_argument("--a-par", type=float, help="coupling, Hz (default: first target)")
    s.add_argument("--species", choices=[x.value for x in Species], default="C13")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ctx = _Ctx(args)
    except ScenarioError as exc:
        print(f"nvmem {args.command}: {exc}", file=sys.stderr)
        return 2
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            COMMANDS[args.command](ctx, args)
        except (ValueError, RuntimeError, OSError, KeyError) as exc:
            print(f"nvmem {args.command}: error: {exc} (scenario '{ctx.scenario.name}')", file=sys.stderr)
            return 1
    ctx.manifest.warnings = sorted({str(w.message) for w in caught})
    ctx.manifest.finish(ctx.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
