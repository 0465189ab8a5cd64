#!/usr/bin/env python3
"""
Command-line front end: run trajectories, ensembles and probes from a run config.

Exit codes: 0 success, 1 usage or config error, 2 ensemble outside the
standard-error band, 3 numerical failure (non-finite amplitudes, oversized
jump probability, or leakage above the hard limit).
"""
import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, beable, guiding, hilbert, models, output, unravel
from .config.model_config import PRESETS
from .config.run_config import PROBES, RunConfig, load_run_config, render_template
from .config.system_config import resolve_output_dir
from .errors import ConfigError, ModalJumpError, NumericalError, StepSizeError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ACCEPTANCE = 2
EXIT_NUMERICAL = 3

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def show_banner():
    """Show the modal-jumps banner"""
    banner = r"""
    ┌┬┐┌─┐┌┬┐┌─┐┬      ┬┬ ┬┌┬┐┌─┐┌─┐
    ││││ │ ││├─┤│      ││ ││││├─┘└─┐
    ┴ ┴└─┘─┴┘┴ ┴┴─┘  └┘└─┘┴ ┴┴  └─┘

     Bell-type jump unravelings of a driven atom in a discrete bath
    """
    print(banner)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Run config (INI) or run_manifest.json of an earlier run")
    common.add_argument("--preset", type=str, choices=sorted(PRESETS), help="Physical preset")
    common.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    common.add_argument("--threads", type=int, help="Worker threads for ensembles")
    common.add_argument("--out", type=str, help="Output directory (overrides MODALJUMP_OUTPUT_DIR)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only, no banner")

    parser = argparse.ArgumentParser(
        description="Jump-like unravelings of non-Markovian atom-bath dynamics",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    subparsers.add_parser("trajectory", parents=[common], help="Simulate one typical trajectory")

    ensemble_parser = subparsers.add_parser("ensemble", parents=[common],
                                            help="Average many trajectories and compare with the reduced state")
    ensemble_parser.add_argument("--trajectories", "-n", type=int, help="Number of trajectories")

    probe_parser = subparsers.add_parser("probe", parents=[common], help="Write a diagnostic series")
    probe_parser.add_argument("--what", type=str, choices=PROBES, help="Diagnostic to write")
    probe_parser.add_argument("--probe-time", type=float, help="Time for rates-at and born-at")
    probe_parser.add_argument("--tau", type=int, help="Temporal-mode index for ctau (1..kappa)")

    template_parser = subparsers.add_parser("template", help="Print a commented default config")
    template_parser.add_argument("--preset", type=str, choices=sorted(PRESETS), help="Preset to show")
    return parser


def configure_logging(args):
    level = logging.INFO
    if getattr(args, 'verbose', False):
        level = logging.DEBUG
    elif getattr(args, 'quiet', False):
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)


def load_config(args):
    """Config file (or defaults) with command-line overrides applied, then resolved"""
    loaded = load_run_config(args.config) if args.config else RunConfig()
    config = loaded.with_overrides('model', preset=args.preset)
    config = config.with_overrides('run', seed=args.seed, threads=args.threads,
                                   n_trajectories=getattr(args, 'trajectories', None))
    config = config.with_overrides('probe', what=getattr(args, 'what', None),
                                   time=getattr(args, 'probe_time', None), tau=getattr(args, 'tau', None))
    return loaded, config.resolve()


def build_model(config):
    section = config.model
    params = models.ModelParams(rabi=section.rabi,
                                couplings=[complex(re_part, im_part) for re_part, im_part in section.couplings],
                                detunings=section.detunings)
    spec = hilbert.build_space(params.num_modes, config.numerics.cutoff)
    return models.build_model(spec, params, basis_kind=section.basis,
                              approximation=section.approximation, name=section.preset or 'custom')


def initial_state(config, model):
    atom = config.initial.amplitudes()
    return hilbert.product_state(model.spec, atom, config.initial.occupations)


def integrate(config, model, t_final=None):
    """Guiding state for the run, from the snapshot cache when one matches"""
    grid = guiding.TimeGrid.spanning(t_final if t_final is not None else config.numerics.t_final,
                                     config.numerics.dt)
    cache = Path(config.run.cache) if config.run.cache else None
    if cache is not None and cache.exists():
        logger.info(f"Loading guiding snapshots from {cache}")
        result = guiding.load_guiding(cache, model, grid)
    else:
        result = guiding.evolve(initial_state(config, model), model, grid,
                                leakage_tolerance=config.numerics.leakage_tolerance)
        if cache is not None:
            guiding.save_guiding(cache, result)
    if result.peak_leakage > config.numerics.leakage_hard_limit:
        raise NumericalError(f"Fock-space leakage {result.peak_leakage:.3g} above hard limit "
                             f"{config.numerics.leakage_hard_limit}; raise the cutoff")
    return result


def guiding_diagnostics(result):
    return {
        'peak_leakage': result.peak_leakage,
        'leakage_flag': result.leakage_flag,
        'max_norm_error': result.max_norm_error,
        'snapshot_stride': result.stride,
    }


def prepare_output(args, config):
    out_dir = resolve_output_dir(args.out, config.run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def manifest(command, config, model, started, files, diagnostics):
    return {
        'version': __version__,
        'command': command,
        'config': config.as_manifest_dict(),
        'model': model.describe(),
        'seed': config.run.seed,
        'diagnostics': diagnostics,
        'files': [Path(f).name for f in files],
        'wall_time': time.time() - started,
    }


def cmd_trajectory(args, loaded, config):
    """Simulate one trajectory and write trajectory.csv, jumps.csv and the manifest"""
    started = time.time()
    if 'n_trajectories' in loaded.run.model_fields_set:
        logger.warning("n_trajectories is ignored by the trajectory command")
    model = build_model(config)
    measure = unravel.measure_for(model)
    result = integrate(config, model)
    trajectory = unravel.run_trajectory(model, measure, result, config.run.seed,
                                        p_max=config.numerics.p_max, floor=config.numerics.probability_floor)

    out_dir = prepare_output(args, config)
    files = [output.write_trajectory_csv(out_dir / 'trajectory.csv', trajectory),
             output.write_jumps_csv(out_dir / 'jumps.csv', trajectory)]
    diagnostics = {**trajectory.diagnostics(), **guiding_diagnostics(result)}
    output.write_manifest(out_dir / 'run_manifest.json',
                          manifest('trajectory', config, model, started, files, diagnostics))

    events = unravel.jump_events(trajectory)
    up = sum(1 for event in events if event.direction == 'up')
    print(f"Trajectory: {len(events)} jumps ({up} up, {len(events) - up} down) over "
          f"t in [0, {result.grid.t_final:g}]")
    print(f"Output written to {out_dir}")
    return EXIT_OK


def cmd_ensemble(args, loaded, config):
    """Run an ensemble, write ensemble.csv and the manifest; exit 2 outside the 3-sigma band"""
    started = time.time()
    model = build_model(config)
    measure = unravel.measure_for(model)
    result = integrate(config, model)
    ensemble = unravel.run_ensemble(model, measure, result, config.run.n_trajectories, config.run.seed,
                                    threads=config.run.threads, batch_size=config.run.batch_size,
                                    p_max=config.numerics.p_max, floor=config.numerics.probability_floor)
    difference = analysis.ensemble_vs_exact(ensemble, result, measure)
    fractions = difference.fraction_within(3.0)
    passed = difference.passes(3.0, 0.99)

    out_dir = prepare_output(args, config)
    files = [output.write_ensemble_csv(out_dir / 'ensemble.csv', ensemble, difference)]
    diagnostics = {
        **ensemble.diagnostics(),
        **guiding_diagnostics(result),
        'fraction_within_3se': [float(f) for f in fractions],
        'max_trace_distance': float(difference.trace_distance.max()),
        'acceptance': passed,
    }
    output.write_manifest(out_dir / 'run_manifest.json',
                          manifest('ensemble', config, model, started, files, diagnostics))

    print(f"Ensemble of {ensemble.n_trajectories}: fraction within 3 SE "
          f"x={fractions[0]:.4f} y={fractions[1]:.4f} z={fractions[2]:.4f}")
    print(f"Acceptance {'passed' if passed else 'FAILED'}; output written to {out_dir}")
    return EXIT_OK if passed else EXIT_ACCEPTANCE


def _probe_ctau(config, model, out_dir):
    grid = guiding.TimeGrid.spanning(config.numerics.t_final, config.numerics.dt)
    params = model.params
    taus = [config.probe.tau] if config.probe.tau else range(1, params.num_modes + 1)
    series = np.array([models.temporal_coefficients(params, t) for t in grid.times])
    profiles = []
    for tau in taus:
        if not 1 <= tau <= params.num_modes:
            raise ConfigError(f"[probe] tau {tau} outside 1..{params.num_modes}")
        profiles.append((tau, int(params.labels[tau - 1]), series[:, tau - 1]))
        weight = np.abs(series[:, tau - 1]) ** 2
        peaks = analysis.peak_times(weight, grid.times, height=0.5 * weight.max())
        print(f"c_{tau}(t)^2 peaks at t = {', '.join(f'{t:.4g}' for t in peaks[:5])}"
              f"{' ...' if len(peaks) > 5 else ''}")
    return output.write_ctau_csv(out_dir / 'probe_ctau.csv', grid.times, profiles)


def _probe_at(config, model, out_dir):
    t = config.probe.time
    steps = guiding.TimeGrid.spanning(config.numerics.t_final, config.numerics.dt)
    steps.index_of(t)
    result = integrate(config, model, t_final=max(t, config.numerics.dt))
    state = result.state_at(t)
    measure = unravel.measure_for(model)
    if config.probe.what == 'born-at':
        probabilities = beable.born_distribution(state, measure)
        return output.write_born_csv(out_dir / 'probe_born.csv', measure.configs(), probabilities)
    source = config.probe.config or (0,) * model.spec.num_modes
    table = beable.bell_rates(state, model, measure, source, t, dt=config.numerics.dt,
                              floor=config.numerics.probability_floor, p_max=config.numerics.p_max)
    print(f"{len(table.nonzero())} nonzero rates out of {table.source} at t = {t:g} "
          f"(Pr = {table.probability:.6g})")
    return output.write_rates_csv(out_dir / 'probe_rates.csv', t, table)


def cmd_probe(args, loaded, config):
    """Write c_tau(t) profiles, the rate table at a time, or the Born distribution at a time"""
    started = time.time()
    model = build_model(config)
    out_dir = prepare_output(args, config)
    if config.probe.what == 'ctau':
        path = _probe_ctau(config, model, out_dir)
    else:
        path = _probe_at(config, model, out_dir)
    output.write_manifest(out_dir / 'run_manifest.json',
                          manifest('probe', config, model, started, [path], {'probe': config.probe.what}))
    print(f"Output written to {path}")
    return EXIT_OK


def cmd_template(args):
    print(render_template(args.preset), end='')
    return EXIT_OK


COMMANDS = {
    'trajectory': cmd_trajectory,
    'ensemble': cmd_ensemble,
    'probe': cmd_probe,
}


def main(argv=None):
    """Main entry point for the CLI"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        show_banner()
        parser.print_help()
        return EXIT_OK
    if args.command == 'template':
        return cmd_template(args)

    configure_logging(args)
    if not args.quiet:
        show_banner()
    try:
        loaded, config = load_config(args)
        return COMMANDS[args.command](args, loaded, config)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, StepSizeError) as e:
        print(f"Numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ModalJumpError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"Error: cannot write output: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
