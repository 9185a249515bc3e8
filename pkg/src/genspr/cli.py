"""Command-line experiment runner.

One experiment builds a test problem, runs the solver once up to ``k_max``
and applies each requested stopping rule to the recorded history.  Reports
go to the output directory:

``history.csv``
    Columns ``k, phi_bar, sol_norm, gcv, rel_error``.
``summary.json``
    Per-rule ``k_stop`` and ``rel_error``, the best iterate, and the optimal
    Tikhonov comparison when ``--oracle`` is given.
``x_<rule>.bin``
    Selected solutions in the binary matrix format of
    :func:`genspr.operators.write_matrix`.

A JSON config file may hold one experiment (an object) or several (a list);
several experiments are written to numbered subdirectories.  Command-line
flags override config-file values.
"""

import argparse
import json
import logging
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .kernels import FAMILIES, KernelSpec
from .operators import write_matrix
from .problems import make_problem
from .spr import solve, write_history_csv
from .stopping import StopConfig, select_k

__all__ = ["ExperimentConfig", "parse_args", "run_experiment", "main", "SCHEMA_VERSION"]

log = logging.getLogger("genspr")

SCHEMA_VERSION = 1
PROBLEMS = ("gravity", "shaw", "blur2d")
SELECT_RULES = ("DP", "LC", "GCV", "best")
ORACLE_MAX_N = 2000

PROBLEM_DEFAULTS = {
    "gravity": {"n": 400, "kernel": {"family": "gaussian", "l": 0.1}, "noise": "white",
                "level": 5e-3},
    "shaw": {"n": 400, "kernel": {"family": "exponential", "l": 0.1, "nu": 1.0},
             "noise": "diagonal", "level": 1e-2},
    "blur2d": {"n": 64, "kernel": {"family": "matern", "l": 0.05, "nu": 2.5}, "noise": "white",
               "level": 2e-2},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """A fully resolved experiment."""

    problem: str = "gravity"
    n: int = 400
    kernel: KernelSpec = field(default_factory=KernelSpec)
    noise: str = "white"
    level: float = 5e-3
    seed: int = 0
    rules: tuple = ("DP", "LC", "GCV")
    k_max: int = 100
    tau: float = 1.01
    lookahead: int = 10
    window: int = 3
    reorth: str = "full"
    blur_width: float = 2.0
    jitter: float = None
    oracle: bool = False
    output_dir: str = "results"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.noise not in ("white", "diagonal"):
            raise ConfigError(f"unknown noise model {self.noise!r}")
        if not self.level > 0:
            raise ConfigError("noise level must be positive")
        if not self.tau > 1:
            raise ConfigError(f"tau must exceed 1, got {self.tau}")
        if self.k_max < 1:
            raise ConfigError("k_max must be at least 1")
        bad = [r for r in self.rules if r not in SELECT_RULES]
        if bad or not self.rules:
            raise ConfigError(f"rules must be a non-empty subset of {SELECT_RULES}, got {bad}")
        if self.reorth not in ("full", "none"):
            raise ConfigError("reorth must be 'full' or 'none'")
        dim = self.n * self.n if self.problem == "blur2d" else self.n
        if self.oracle and (self.problem == "blur2d" or dim > ORACLE_MAX_N):
            raise ConfigError(f"the dense oracle needs an explicit matrix with n <= {ORACLE_MAX_N}")

    def to_dict(self):
        d = asdict(self)
        d["kernel"] = self.kernel.to_dict()
        d["rules"] = list(self.rules)
        return d


_FLAG_KEYS = ("problem", "n", "noise", "level", "seed", "rules", "k_max", "tau", "lookahead",
              "window", "reorth", "blur_width", "jitter", "oracle", "output_dir")


def _build_parser():
    p = argparse.ArgumentParser(
        prog="genspr",
        description="Run subspace projection regularization experiments.")
    p.add_argument("--config", type=Path, help="JSON file with one experiment or a list")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--n", "--n1", dest="n", type=int,
                   help="grid size (image side length for blur2d)")
    p.add_argument("--kernel", choices=FAMILIES)
    p.add_argument("--l", type=float, help="kernel length scale")
    p.add_argument("--nu", type=float, help="Matern order or exponential exponent")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--noise", choices=("white", "diagonal"))
    p.add_argument("--level", type=float, help="relative noise level")
    p.add_argument("--seed", type=int)
    p.add_argument("--rule", dest="rules", action="append", choices=SELECT_RULES,
                   help="stopping rule to report; repeatable (default DP, LC and GCV)")
    p.add_argument("--tau", type=float, help="discrepancy principle factor, > 1")
    p.add_argument("--kmax", dest="k_max", type=int)
    p.add_argument("--lookahead", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--reorth", choices=("full", "none"))
    p.add_argument("--blur-width", dest="blur_width", type=float)
    p.add_argument("--jitter", type=float)
    p.add_argument("--oracle", action="store_true", default=None,
                   help="also run the dense Tikhonov comparison")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--overwrite", action="store_true",
                   help="replace an existing non-empty output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve(entry, flags):
    """Merge problem defaults, one config entry and flag overrides."""
    entry = dict(entry)
    for k, v in flags.items():
        if v is not None:
            entry[k] = v
    problem = entry.get("problem", "gravity")
    if problem not in PROBLEM_DEFAULTS:
        raise ConfigError(f"unknown problem {problem!r}; choose from {PROBLEMS}")
    base = PROBLEM_DEFAULTS[problem]
    kernel = dict(base["kernel"])
    given = entry.pop("kernel", None)
    if isinstance(given, dict):
        if given.get("family", kernel["family"]) != kernel["family"]:
            kernel = {}
        kernel.update(given)
    elif isinstance(given, str):
        if given != kernel["family"]:
            kernel = {}
        kernel["family"] = given
    for key, name in (("l", "l"), ("nu", "nu"), ("amplitude", "amplitude")):
        if entry.get(key) is not None:
            kernel[name] = entry.pop(key)
        entry.pop(key, None)
    merged = {k: v for k, v in base.items() if k != "kernel"}
    merged.update(entry)
    unknown = set(merged) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "rules" in merged:
        merged["rules"] = tuple(merged["rules"])
    try:
        return ExperimentConfig(kernel=KernelSpec(**kernel), **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _parse(argv):
    parser = _build_parser()
    ns = parser.parse_args(argv)
    flags = {k: getattr(ns, k) for k in _FLAG_KEYS}
    flags.update(kernel=ns.kernel, l=ns.l, nu=ns.nu, amplitude=ns.amplitude)
    entries = [{}]
    if ns.config is not None:
        try:
            raw = json.loads(ns.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {ns.config}: {exc}")
        entries = raw if isinstance(raw, list) else [raw]
        if not entries or not all(isinstance(e, dict) for e in entries):
            parser.error("config must be a JSON object or a non-empty list of objects")
    try:
        configs = [_resolve(e, flags) for e in entries]
    except (ConfigError, ValueError) as exc:
        parser.error(str(exc))
    if len(configs) > 1:
        configs = [replace(c, output_dir=str(Path(c.output_dir) / f"{i:02d}_{c.problem}"))
                   for i, c in enumerate(configs)]
    return configs, ns


def parse_args(argv=None):
    """Parse command-line arguments into an :class:`ExperimentConfig`.

    A config file holding a list yields a list of configs, each with its
    own output subdirectory.  Invalid input exits with status 2 and a usage
    message.
    """
    configs, _ = _parse(argv)
    return configs[0] if len(configs) == 1 else configs


def _rel_error(x, x_true):
    return float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))


def _write_reports(config, directory):
    problem = make_problem(config.problem, config.n, config.kernel, noise=config.noise,
                           level=config.level, seed=config.seed, blur_width=config.blur_width,
                           jitter=config.jitter)
    result = solve(problem, StopConfig("none"), k_max=config.k_max, reorth=config.reorth,
                   store_basis=config.reorth == "full")
    history = result.history
    write_history_csv(history, directory / "history.csv")

    errors = np.asarray(history["rel_error"], dtype=float)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "m": problem.A.m,
        "n": problem.A.n,
        "n_iter": result.n_iter,
        "termination": result.termination,
        "rules": {},
    }
    if errors.size:
        summary["best_k"] = int(np.argmin(errors)) + 1
        summary["best_error"] = float(errors.min())
    else:
        summary["best_k"], summary["best_error"] = 0, 1.0

    for rule in config.rules:
        stop = StopConfig(rule=rule, tau=config.tau, lookahead=config.lookahead,
                          window=config.window)
        k, committed = select_k(history, stop, problem.A.m)
        x = result.solution_at(k)
        summary["rules"][rule] = {"k_stop": int(k), "rel_error": _rel_error(x, problem.x_true),
                                  "committed": bool(committed)}
        write_matrix(directory / f"x_{rule}.bin", x)

    if config.oracle:
        from .oracle import gsvd_pair, optimal_lambda

        g = gsvd_pair(problem.A, problem.M, problem.N)
        opt = optimal_lambda(g, problem.b, problem.x_true)
        summary["lambda_opt"] = opt.lam
        summary["lambda_on_boundary"] = bool(opt.on_boundary)
        summary["tikhonov_error"] = _rel_error(opt.x, problem.x_true)
        write_matrix(directory / "x_tikhonov.bin", opt.x)

    (directory / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def run_experiment(config, overwrite=False):
    """Run one experiment and write its reports to ``config.output_dir``.

    Reports are assembled in a scratch directory next to the target and
    moved into place only on success, so a failed run leaves nothing
    behind.
    """
    out = Path(config.output_dir)
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise FileExistsError(f"{out} exists and is not empty (use --overwrite)")
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".genspr-", dir=out.parent))
    try:
        summary = _write_reports(config, scratch)
        if out.exists():
            shutil.rmtree(out)
        scratch.rename(out)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    return summary


def main(argv=None):
    configs, ns = _parse(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(message)s")
    for config in configs:
        log.info("running %s n=%d seed=%d", config.problem, config.n, config.seed)
        try:
            summary = run_experiment(config, overwrite=ns.overwrite)
        except Exception as exc:
            print(f"genspr: error: {exc}", file=sys.stderr)
            return 1
        rows = ", ".join(f"{r} k={v['k_stop']} err={v['rel_error']:.4g}"
                         for r, v in summary["rules"].items())
        print(f"{config.output_dir}: best k={summary['best_k']} "
              f"err={summary['best_error']:.4g}; {rows}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
