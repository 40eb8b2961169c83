"""Command-line front end.

    trimlstat {identity,mdratio,variance,conditions,remainders,simulate}
              --config FILE [--out DIR] [--seed U64] [--workers K]
              [--ignore-conditions]

Each flag can also be given through an environment variable with the
``TRIMLSTAT_`` prefix (``TRIMLSTAT_CONFIG``, ``TRIMLSTAT_OUT``,
``TRIMLSTAT_SEED``, ``TRIMLSTAT_WORKERS``, ``TRIMLSTAT_IGNORE_CONDITIONS``).
A flag beats the environment, which beats the config file.

Exit codes: 0 success, 1 configuration or usage error, 2 acceptance breach.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend, conditions, montecarlo
from .config import load_config
from .errors import ConfigError, TrimLStatError
from .report import RunManifest, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_BREACH = 0, 1, 2
ENV_PREFIX = "TRIMLSTAT_"

log = logging.getLogger("trimlstat")

IDENTITY_COLUMNS = ("replicate", "L_n", "L0_n", "L_tilde", "mu_n", "mu_tilde", "R1", "R2", "R_n",
                    "V_n", "A_n", "B_n", "N_alpha", "N_upper", "residual")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _truthy(text):
    return text is not None and text.strip().lower() not in ("", "0", "false", "no")


COMMANDS = {
    "identity": "check the exact remainder decomposition on simulated samples",
    "mdratio": "tail probabilities of the normalised statistic against the normal tail",
    "variance": "Monte Carlo variance ratio over the n grid",
    "conditions": "check hypotheses (i)-(iv) for the configuration",
    "remainders": "size of the remainder terms across the n grid",
    "simulate": "run every experiment above",
}


def build_parser():
    parser = _Parser(prog="trimlstat", description="Heavy-trimmed L-statistic experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="YAML config file [env TRIMLSTAT_CONFIG]")
        p.add_argument("--out", help="output directory (default: results) [env TRIMLSTAT_OUT]")
        p.add_argument("--seed", type=_u64, help="base seed, overrides the file [env TRIMLSTAT_SEED]")
        p.add_argument("--workers", type=_positive_int,
                       help="worker threads (default: 1) [env TRIMLSTAT_WORKERS]")
        p.add_argument("--ignore-conditions", action="store_true", default=None,
                       help="do not fail on violated hypotheses [env TRIMLSTAT_IGNORE_CONDITIONS]")
    return parser


@dataclass
class Run:
    command: str
    settings: object
    out_dir: str
    workers: int
    ignore_conditions: bool
    config_path: str

    @property
    def experiment(self):
        return self.settings.experiment

    def meta(self, **extra):
        base = {"command": self.command, "config_hash": self.settings.hash,
                "backend": _backend.BACKEND,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
        base.update(extra)
        return base

    def path(self, name):
        return os.path.join(self.out_dir, name)


def _resolve(args):
    config_path = args.config or _env("CONFIG")
    if not config_path:
        raise ConfigError("no config given (use --config or TRIMLSTAT_CONFIG)")
    seed = args.seed
    if seed is None and _env("SEED") is not None:
        try:
            seed = _u64(_env("SEED"))
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"TRIMLSTAT_SEED: {exc}") from None
    workers = args.workers
    if workers is None:
        try:
            workers = _positive_int(_env("WORKERS", "1"))
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"TRIMLSTAT_WORKERS: {exc}") from None
    ignore = args.ignore_conditions or _truthy(_env("IGNORE_CONDITIONS"))
    out_dir = args.out or _env("OUT", "results")
    settings = load_config(config_path, seed=seed)
    return Run(args.command, settings, out_dir, workers, bool(ignore), config_path)


# -- commands -----------------------------------------------------------------

def cmd_conditions(run):
    s = run.settings.section("conditions")
    report = conditions.run_conditions(run.experiment, s["t_grid"], s["n_grid"], s["epsilon"],
                                       s["trim_bound"], s["coefficient_bound"])
    meta = run.meta(epsilon=report.epsilon, epsilon_tilde=report.epsilon_tilde, nu=report.nu)
    write_csv(run.path("conditions.csv"), conditions.CONDITION_COLUMNS,
              conditions.report_rows(report), meta)
    write_csv(run.path("conditions_evidence.csv"), conditions.EVIDENCE_COLUMNS,
              conditions.evidence_rows(report), run.meta())
    for r in report.results:
        log.info("condition (%s): %s  %s", r.condition, r.status, r.detail)
    return report, (EXIT_OK if report.ok else EXIT_BREACH)


def cmd_identity(run):
    reps = run.settings.section("identity")["replications"]
    t0 = time.perf_counter()
    results = montecarlo.run_identity(run.experiment, reps, run.workers)
    rows = []
    for i, r in enumerate(results):
        rows.append({"replicate": i, "L_n": r.L_n, "L0_n": r.L0_n, "L_tilde": r.L_tilde,
                     "mu_n": r.mu_n, "mu_tilde": r.mu_tilde, "R1": r.R1, "R2": r.R2,
                     "R_n": r.R_n, "V_n": r.V_n, "A_n": r.A_n, "B_n": r.B_n,
                     "N_alpha": r.N_alpha, "N_upper": r.N_upper, "residual": r.residual})
    worst = max(abs(r.residual) for r in results)
    tol = 1e-10 * (1 + max(abs(r.L0_n) for r in results))
    write_csv(run.path("identity.csv"), IDENTITY_COLUMNS, rows,
              run.meta(wall_time=time.perf_counter() - t0, max_residual=worst, tolerance=tol))
    log.info("identity: %d replicates, max residual %.3g (tolerance %.3g)", len(results), worst, tol)
    return EXIT_OK if worst <= tol else EXIT_BREACH


def _condition_gate(run, report):
    if report.ok:
        return EXIT_OK
    if run.ignore_conditions:
        log.warning("hypotheses %s violated; continuing (--ignore-conditions)", report.failed)
        return EXIT_OK
    log.error("hypotheses %s violated; rerun with --ignore-conditions to accept", report.failed)
    return EXIT_BREACH


def cmd_mdratio(run, report=None):
    code = EXIT_OK
    if report is None:
        report, _ = cmd_conditions(run)
    code = max(code, _condition_gate(run, report))
    band = run.settings.section("band")
    tails = montecarlo.run_tails(run.experiment, run.workers, label=run.settings.hash)
    ok = tails.within_band(band["md_rel"], band["md_se_mult"])
    write_csv(run.path("tails.csv"), montecarlo.TAIL_COLUMNS, tails.rows(),
              run.meta(wall_time=tails.wall_time, kolmogorov=tails.kolmogorov,
                       normalization=run.experiment.normalization))
    log.info("mdratio: %d grid points, %d outside the band, Kolmogorov distance %.4g",
             tails.x.size, int((~ok).sum()), tails.kolmogorov)
    if not ok.all():
        code = EXIT_BREACH
    return code


def cmd_variance(run):
    exp = run.experiment
    reps = run.settings.section("variance")["replications"] or exp.replications
    exp = exp.with_replications(reps)
    t0 = time.perf_counter()
    rows, results = [], []
    for n in exp.n_grid:
        v = montecarlo.variance_ratio(exp, n, run.workers, ignore_moments=run.ignore_conditions)
        results.append(v)
        rows.append({"n": v.n, "R": v.replications, "ratio": v.ratio, "se": v.se,
                     "ratio_plain": v.ratio_plain, "se_plain": v.se_plain, "sigma": v.sigma,
                     "variance": v.variance, "deviation": v.deviation, "method": v.method})
        log.info("variance: n=%d ratio %.6f +- %.2g", v.n, v.ratio, v.se)
    write_csv(run.path("variance.csv"), montecarlo.VARIANCE_COLUMNS, rows,
              run.meta(wall_time=time.perf_counter() - t0))
    rel = run.settings.section("band")["variance_rel"]
    return EXIT_OK if results[-1].deviation <= rel else EXIT_BREACH


def cmd_remainders(run):
    d = run.settings.section("diagnostics")
    t0 = time.perf_counter()
    rows = montecarlo.remainder_diagnostics(run.experiment, d["epsilon1"],
                                            replications=d["replications"], workers=run.workers)
    out = [{"n": r.n, "R": r.replications, "delta_n": r.threshold, "p_remainder": r.p_remainder,
            "p_perturbation": r.p_perturbation, "scaled_mse": r.scaled_mse,
            "scaled_mse_se": r.scaled_mse_se, "scaled_mse_total": r.scaled_mse_total}
           for r in rows]
    write_csv(run.path("remainders.csv"), montecarlo.REMAINDER_COLUMNS, out,
              run.meta(wall_time=time.perf_counter() - t0))
    mse = np.array([r.scaled_mse for r in rows])
    log.info("remainders: n*E(R^2) = %s (%s)", ", ".join(f"{v:.3g}" for v in mse),
             "decreasing" if np.all(np.diff(mse) < 0) else "not decreasing")
    return EXIT_OK


def cmd_simulate(run):
    report, _ = cmd_conditions(run)
    codes = [cmd_identity(run), cmd_mdratio(run, report), cmd_variance(run), cmd_remainders(run)]
    return max(codes)


def _dispatch(run):
    if run.command == "conditions":
        return cmd_conditions(run)[1]
    handler = {"identity": cmd_identity, "mdratio": cmd_mdratio, "variance": cmd_variance,
               "remainders": cmd_remainders, "simulate": cmd_simulate}[run.command]
    return handler(run)


def _log_warning(message, category, filename, lineno, file=None, line=None):
    log.warning("%s", message)


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    warnings.showwarning = _log_warning
    args = build_parser().parse_args(argv)
    try:
        run = _resolve(args)
        os.makedirs(run.out_dir, exist_ok=True)
        RunManifest(config_path=os.path.abspath(run.config_path), config=run.settings.resolved,
                    command=run.command, out_dir=os.path.abspath(run.out_dir),
                    timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                    config_hash=run.settings.hash, backend=_backend.BACKEND,
                    workers=run.workers).write()
        code = _dispatch(run)
    except TrimLStatError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    log.info("exit %d", code)
    return code


if __name__ == "__main__":
    sys.exit(main())
