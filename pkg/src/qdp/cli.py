"""``qdp`` command line: privacy profiles, fuzz suites and the robustness experiment.

Every command reads a JSON config and writes its artifacts next to ``--out``.
CSV floats use 17 significant digits with LF line endings. Exit codes are 0
on success, 1 on usage or config errors and 2 when a fuzz suite finds a
violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, figures, privacy, suites
from .robustness import ExperimentConfig, load_dataset, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_bytes((text + "\n").encode("utf-8"))


def sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _get(block: dict, key: str, default=None, kind=float, required: bool = False):
    if key not in block:
        if required:
            raise ConfigError(f"missing required parameter {key!r}")
        return default
    val = block[key]
    try:
        if kind is list:
            if not isinstance(val, list):
                raise TypeError
            return val
        if kind is int and (isinstance(val, bool) or not float(val).is_integer()):
            raise TypeError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"parameter {key!r} has invalid value {val!r}") from None


def _eps_grid(block: dict, default_max: float = 3.0, default_points: int = 100) -> np.ndarray:
    if "eps" in block:
        return np.asarray([float(e) for e in _get(block, "eps", kind=list)], float)
    lo = _get(block, "eps_min", 0.0)
    hi = _get(block, "eps_max", default_max)
    num = _get(block, "eps_points", default_points, int)
    if num < 1:
        raise ConfigError("eps_points must be >= 1")
    return np.linspace(lo, hi, num) if num > 1 else np.array([lo])


def _profile_table(prof: privacy.PrivacyProfile):
    header = ["epsilon", "delta_old", "delta_new", "delta_min", "difference"]
    rows = []
    for i, e in enumerate(prof.epsilons):
        old = prof.delta_old[i]
        new = None if prof.delta_new is None else prof.delta_new[i]
        rows.append([e, old, new, prof.deltas[i], None if new is None else old - new])
    return header, rows


def profile_fig_privacy(block: dict) -> tuple[list, list, dict]:
    n = _get(block, "n", 15, int)
    p = _get(block, "p", 0.5)
    d2 = _get(block, "d2", 0.5)
    tau = _get(block, "tau", min(1.0, math.sqrt(2 * d2)))
    eps = _eps_grid(block)

    def eta(gamma: float) -> float:
        return privacy.d2_to_hockey_stick(d2, math.log(gamma))

    prof = privacy.profile_mixture_global(p, n, tau, eps, eta)
    header, rows = _profile_table(prof)
    return header, rows, {"n": n, "p": p, "d2": d2, "tau": tau}


def profile_mixture(block: dict, mode: str) -> tuple[list, list, dict]:
    p = _get(block, "p", required=True)
    tau = _get(block, "tau", required=True)
    eps = _eps_grid(block)
    size_key = "k" if mode == "local" else "n"
    size = _get(block, size_key, _get(block, "n", None, int), int)
    if size is None:
        raise ConfigError(f"missing required parameter {size_key!r}")
    if mode == "purity":
        zeta = _get(block, "zeta", required=True)
        prof = privacy.profile_purity(p, size, tau, zeta, eps, local=bool(block.get("local", False)),
                                      sound=bool(block.get("sound", False)))
    else:
        eta = _get(block, "eta", None)
        fn = privacy.profile_mixture_local if mode == "local" else privacy.profile_mixture_global
        prof = fn(p, size, tau, eps, eta)
    header, rows = _profile_table(prof)
    return header, rows, dict(prof.params)


def _n_values(block: dict) -> list[int]:
    ns = block.get("n_values", list(range(1, 51)))
    try:
        out = [int(v) for v in ns]
    except (TypeError, ValueError):
        raise ConfigError("n_values must be a list of integers") from None
    if not out or min(out) < 1:
        raise ConfigError("n_values must be non-empty and positive")
    return out


def profile_fig_max_div(block: dict) -> tuple[list, list, dict]:
    eps = _get(block, "epsilon", 1.0)
    tau = _get(block, "tau", 0.1)
    ell = _get(block, "ell", 1, int)
    rows = [[n, privacy.max_div_bound_trace(eps, tau), privacy.max_div_bound_w1(eps, n),
             privacy.max_div_bound_local(eps, n, ell, tau)] for n in _n_values(block)]
    return ["n", "bound_trace", "bound_w1", "bound_local"], rows, {"epsilon": eps, "tau": tau, "ell": ell}


def profile_fig_error(block: dict) -> tuple[list, list, dict]:
    """Bounds on the probability of error below a*n when measuring the mean of Z on |1^n>.

    The trace and W1 columns are concentration upper bounds. The local column
    is the success guarantee 1 - exp(-a n / alpha) of the Laplace local
    measurement.
    """
    eps = _get(block, "epsilon", 1.0)
    tau = _get(block, "tau", 0.1)
    ell = _get(block, "ell", 1, int)
    a = _get(block, "a", 0.5)
    rows = []
    for n in _n_values(block):
        alpha, _ = privacy.efficient_local_measurement(ell, tau, eps, a, 0.0, 0.0)
        rows.append([n, min(1.0, privacy.concentration_bound_trace(eps, tau, a, n)),
                     min(1.0, privacy.concentration_bound_w1(eps, a, n)), -math.expm1(-a * n / alpha)])
    return ["n", "bound_trace", "bound_w1", "bound_local"], rows, {"epsilon": eps, "tau": tau, "ell": ell, "a": a}


PROFILE_MODES = {
    "fig-privacy-profiles": profile_fig_privacy,
    "fig-max-div": profile_fig_max_div,
    "fig-error": profile_fig_error,
    "global": lambda b: profile_mixture(b, "global"),
    "local": lambda b: profile_mixture(b, "local"),
    "purity": lambda b: profile_mixture(b, "purity"),
}


def cmd_profile(cfg: dict, out: Path, seed, plot: bool) -> int:
    mode = cfg.get("mode", "fig-privacy-profiles")
    if mode not in PROFILE_MODES:
        raise ConfigError(f"unknown profile mode {mode!r}; choose from {sorted(PROFILE_MODES)}")
    block = cfg.get("params", {})
    if not isinstance(block, dict):
        raise ConfigError("params must be a JSON object")
    try:
        header, rows, info = PROFILE_MODES[mode](block)
    except (ValueError, OverflowError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    write_csv(out, header, rows)
    if plot:
        x = [r[0] for r in rows]
        curves = {h: [r[i] for r in rows] for i, h in enumerate(header[1:], start=1)
                  if h != "difference" and all(r[i] is not None for r in rows)}
        if mode == "fig-privacy-profiles" or header[0] == "epsilon":
            figures.plot_curves(x, curves, sibling(out, ".png"), "epsilon", "delta", title=mode)
        else:
            figures.plot_curves(x, curves, sibling(out, ".png"), "n", "bound", title=mode,
                                logy=mode == "fig-max-div" or mode == "fig-error")
    return EXIT_OK


def cmd_fuzz(cfg: dict, out: Path, seed, plot: bool) -> int:
    name = cfg.get("suite")
    if name not in suites.SUITES:
        raise ConfigError(f"unknown suite {name!r}; choose from {sorted(suites.SUITES)}")
    if seed is None:
        raise ConfigError("fuzz suites need a seed")
    params = dict(cfg.get("params", {}))
    if "trials" in cfg:
        params["trials"] = _get(cfg, "trials", kind=int)
    try:
        report = suites.SUITES[name](seed=seed, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for suite {name!r}: {exc}") from None
    body = report.to_dict()
    body["seed"] = seed
    write_json(out, body)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _experiment_config(cfg: dict) -> ExperimentConfig:
    base = ExperimentConfig()
    kw = {}
    for key in ("m", "epochs", "eps_points"):
        if key in cfg:
            kw[key] = _get(cfg, key, kind=int)
    for key in ("beta", "lr", "init_scale", "test_fraction", "eps_min", "eps_max"):
        if key in cfg:
            kw[key] = _get(cfg, key)
    for key in ("p_values", "tau_values", "ranges"):
        if key in cfg:
            conv = int if key == "ranges" else float
            try:
                kw[key] = tuple(conv(v) for v in _get(cfg, key, kind=list))
            except (TypeError, ValueError):
                raise ConfigError(f"parameter {key!r} must be a list of numbers") from None
    if "optimizer" in cfg:
        kw["optimizer"] = str(cfg["optimizer"])
    out = ExperimentConfig(**{**base.__dict__, **kw})
    if out.optimizer not in ("gd", "adam"):
        raise ConfigError(f"unknown optimizer {out.optimizer!r}")
    if not (out.p_values and out.tau_values) or out.m < 1:
        raise ConfigError("need non-empty p_values and tau_values and m >= 1")
    if any(not 0 <= v <= 1 for v in out.p_values + out.tau_values):
        raise ConfigError("p and tau values must lie in [0, 1]")
    return out


def default_dataset():
    return resources.files("qdp") / "data" / "iris.csv"


def cmd_certify(cfg: dict, out: Path, seed, plot: bool, record_time: bool = False) -> int:
    if seed is None:
        raise ConfigError("certify needs a seed")
    exp = _experiment_config(cfg)
    dataset = cfg.get("dataset")
    try:
        if dataset is None:
            with resources.as_file(default_dataset()) as path:
                data = load_dataset(path)
            source = "bundled:iris.csv"
        else:
            data = load_dataset(dataset)
            source = str(dataset)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    start = time.perf_counter()
    rows, info = run_experiment(data, exp, seed)
    elapsed = time.perf_counter() - start
    write_csv(out, ["p", "tau", "certified_accuracy", "test_accuracy"],
              [[r.p, r.tau, r.certified_accuracy, r.test_accuracy] for r in rows])
    manifest = {
        "command": "certify",
        "version": __version__,
        "seed": seed,
        "dataset": source,
        "classes": list(data.classes),
        "hyperparameters": {k: (list(v) if isinstance(v, tuple) else v) for k, v in exp.__dict__.items()},
        "eps_grid": exp.eps_grid().tolist(),
        "csv": out.name,
        **info,
        "wall_time_s": elapsed if record_time else None,
    }
    write_json(sibling(out, ".json"), manifest)
    if plot:
        figures.plot_certified(rows, sibling(out, ".png"))
    return EXIT_OK


COMMANDS = {"profile": cmd_profile, "fuzz": cmd_fuzz, "certify": cmd_certify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="JSON config file")
        sp.add_argument("--out", required=True, type=Path, help="primary output file")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        if name != "fuzz":
            sp.add_argument("--no-plot", action="store_true", help="skip the PNG beside the output")
        if name == "certify":
            sp.add_argument("--record-wall-time", action="store_true",
                            help="store elapsed seconds in the manifest (breaks byte-identical re-runs)")
    return ap


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        cmd = cfg.get("command", args.command)
        if cmd != args.command:
            raise ConfigError(f"config is for {cmd!r}, not {args.command!r}")
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        args.out.parent.mkdir(parents=True, exist_ok=True)
        plot = not getattr(args, "no_plot", True)
        if args.command == "certify":
            return cmd_certify(cfg, args.out, seed, plot, args.record_wall_time)
        return COMMANDS[args.command](cfg, args.out, seed, plot)
    except ConfigError as exc:
        print(f"qdp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
