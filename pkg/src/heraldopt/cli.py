"""Command-line experiment runner.

Subcommands:
  bootstrap   find ideal-detector angles by multi-start optimization
  train       run one training from given initial angles
  sweep       run train once per success-threshold value
  eval        single loss/success/fidelity evaluation at given angles

Exit codes: 0 ok, 1 usage or config error, 2 bootstrap failure,
3 malformed input file.
"""

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import learning, mesh
from .config import load_config
from .exceptions import BootstrapError, HeraldoptError, ValidationError
from .fock import fidelity_with_pure
from .gate import ideal_postselect

USAGE_ERROR = 1
BOOTSTRAP_FAILURE = 2
MALFORMED_INPUT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


def _fmt(value):
    """17 significant digits: lossless round-trip of 64-bit floats."""
    return f"{value:.17g}"


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_trajectory(path, trajectory):
    lines = ["iteration,loss,success,fidelity"]
    lines.extend(
        f"{r.iteration},{_fmt(r.loss)},{_fmt(r.success)},{_fmt(r.fidelity)}"
        for r in trajectory
    )
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_json(path, doc):
    _atomic_write(path, json.dumps(doc, indent=2) + "\n")


def _load_context(args, s_star=None, iterations=None):
    config = load_config(args.config)
    if args.out is not None:
        config = dataclasses.replace(config, output_directory=args.out)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    setup = config.make_setup()
    target = config.make_target()
    detector = config.make_detector()
    hyper = config.hyperparams(s_star=s_star, iterations=iterations)
    return config, setup, target, detector, hyper


def cmd_bootstrap(args):
    config, setup, target, _, _ = _load_context(args)
    out_dir = config.output_directory
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    try:
        angles = learning.bootstrap_ideal(
            setup,
            target,
            hyper_overrides=config.bootstrap_overrides(),
            restarts=config.bootstrap_restarts,
        )
    except BootstrapError as exc:
        print(f"bootstrap failed: {exc}", file=sys.stderr)
        if exc.best_params is not None:
            best_path = os.path.join(out_dir, "bootstrap_best_candidate.json")
            mesh.save_angles(exc.best_params, best_path)
            print(f"best candidate written to {best_path}", file=sys.stderr)
        return BOOTSTRAP_FAILURE
    state, success = ideal_postselect(setup, mesh.build_unitary(angles))
    fidelity = fidelity_with_pure(state, target)
    angles_path = os.path.join(out_dir, "bootstrap_angles.json")
    mesh.save_angles(angles, angles_path)
    _write_json(
        os.path.join(out_dir, "bootstrap_report.json"),
        {
            "ideal_fidelity": fidelity,
            "ideal_success": success,
            "wall_time_s": time.perf_counter() - started,
            "angles_path": angles_path,
        },
    )
    print(
        f"bootstrap: ideal fidelity={fidelity:.10f} success={success:.8f} "
        f"angles={angles_path}"
    )
    return 0


def _run_training(config, setup, target, detector, hyper, initial):
    """One training run; returns (final angles, trajectory, summary dict)."""
    started = time.perf_counter()
    final, trajectory = learning.train(setup, detector, target, hyper, initial)
    evaluator = learning.LossEvaluator(setup, detector, target, hyper)
    _, base_success, base_fidelity = evaluator.value(initial)
    _, final_success, final_fidelity = evaluator.value(final)
    summary = {
        "s_star": hyper.s_star,
        "baseline_fidelity": base_fidelity,
        "baseline_success": base_success,
        "final_fidelity": final_fidelity,
        "final_success": final_success,
        "iterations": hyper.iterations,
        "wall_time_s": time.perf_counter() - started,
    }
    return final, trajectory, summary


def cmd_train(args):
    config, setup, target, detector, hyper = _load_context(args)
    initial = mesh.load_angles(args.angles)
    if initial.modes != config.modes:
        raise ValidationError(
            f"angle file is for {initial.modes} modes, config expects {config.modes}"
        )
    out_dir = config.output_directory
    os.makedirs(out_dir, exist_ok=True)
    final, trajectory, summary = _run_training(
        config, setup, target, detector, hyper, initial
    )
    angles_path = os.path.join(out_dir, "final_angles.json")
    mesh.save_angles(final, angles_path)
    _write_trajectory(os.path.join(out_dir, "trajectory.csv"), trajectory)
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    print(
        "train: baseline_fidelity={baseline_fidelity:.10f} "
        "final_fidelity={final_fidelity:.10f} final_success={final_success:.8f} "
        "wall_time_s={wall_time_s:.2f}".format(**summary)
    )
    return 0


def _sweep_tag(s_star):
    return f"{s_star:.6g}".replace(".", "p").replace("-", "m")


def cmd_sweep(args):
    config, setup, target, detector, _ = _load_context(args)
    if not config.sweep_s_star:
        print("error: the sweep list of s_star values is empty", file=sys.stderr)
        return USAGE_ERROR
    out_dir = config.output_directory
    os.makedirs(out_dir, exist_ok=True)

    if args.angles is not None:
        initial_path = args.angles
        initial = mesh.load_angles(initial_path)
    else:
        code = cmd_bootstrap(args)
        if code != 0:
            return code
        initial_path = os.path.join(out_dir, "bootstrap_angles.json")
        initial = mesh.load_angles(initial_path)
    if initial.modes != config.modes:
        raise ValidationError(
            f"angle file is for {initial.modes} modes, config expects {config.modes}"
        )

    def run_row(s_star):
        hyper = config.hyperparams(s_star=s_star)
        try:
            final, trajectory, summary = _run_training(
                config, setup, target, detector, hyper, initial
            )
        except HeraldoptError as exc:
            return (_fmt(s_star), "error", "error", f"ERROR: {exc}")
        tag = _sweep_tag(s_star)
        angles_path = os.path.join(out_dir, f"final_angles_sstar_{tag}.json")
        mesh.save_angles(final, angles_path)
        _write_trajectory(
            os.path.join(out_dir, f"trajectory_sstar_{tag}.csv"), trajectory
        )
        return (
            _fmt(s_star),
            _fmt(summary["final_fidelity"]),
            _fmt(summary["final_success"]),
            angles_path,
        )

    # baseline row: evaluation at the initial angles under the biased detector
    evaluator = learning.LossEvaluator(setup, detector, target, config.hyperparams())
    _, base_success, base_fidelity = evaluator.value(initial)
    rows = [("baseline", _fmt(base_fidelity), _fmt(base_success), initial_path)]

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows.extend(pool.map(run_row, config.sweep_s_star))
    else:
        rows.extend(run_row(s) for s in config.sweep_s_star)

    lines = ["s_star,final_fidelity,final_success,angles_path"]
    lines.extend(",".join(row) for row in rows)
    _atomic_write(os.path.join(out_dir, "sweep.csv"), "\n".join(lines) + "\n")

    achieved = [float(r[1]) for r in rows[1:] if r[1] != "error"]
    if achieved:
        print(f"sweep: best final_fidelity={max(achieved):.10f} over {len(achieved)} runs")
    print(f"sweep results written to {os.path.join(out_dir, 'sweep.csv')}")
    return 0


def cmd_eval(args):
    config, setup, target, detector, hyper = _load_context(args)
    angles = mesh.load_angles(args.angles)
    if angles.modes != config.modes:
        raise ValidationError(
            f"angle file is for {angles.modes} modes, config expects {config.modes}"
        )
    value, success, fidelity = learning.loss(angles, setup, detector, target, hyper)
    print(
        f"eval: loss={_fmt(value)} success={_fmt(success)} fidelity={_fmt(fidelity)}"
    )
    return 0


def build_parser():
    parser = _Parser(
        prog="heraldopt",
        description="Train interferometer angles that suppress detector-bias "
        "errors in nondeterministic state preparation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, needs_angles):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="YAML experiment config")
        cmd.add_argument("--out", default=None, help="output directory override")
        cmd.add_argument("--seed", type=int, default=None, help="seed override")
        cmd.add_argument("--threads", type=int, default=1, help="parallel sweep rows")
        if needs_angles == "required":
            cmd.add_argument("--angles", required=True, help="initial angle JSON file")
        elif needs_angles == "optional":
            cmd.add_argument(
                "--angles",
                default=None,
                help="initial angle JSON file (default: run bootstrap first)",
            )
        cmd.set_defaults(func=func)

    add("bootstrap", cmd_bootstrap, needs_angles=None)
    add("train", cmd_train, needs_angles="required")
    add("sweep", cmd_sweep, needs_angles="optional")
    add("eval", cmd_eval, needs_angles="required")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        # config errors are usage errors; malformed data files are exit 3
        message = str(exc)
        print(f"error: {message}", file=sys.stderr)
        if "angle file" in message or "CSV" in message:
            return MALFORMED_INPUT
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MALFORMED_INPUT
    except HeraldoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
