"""Command-line experiment runner.

    simconc VERB [--config FILE] [--space KIND] [--dim N[,N...]] [--dataset iid:N|iid:exp:RATE|sep:DELTA]
                 [--eps E[,E...]] [--queries Q] [--seed S] [--out DIR] [--alpha-c1 C1] [--alpha-c2 C2] ...

Verbs: profile, instability, theorem, sweep, stable-check, alpha.

``--config`` takes a flat ``key = value`` file or a ``manifest.json`` written
by an earlier run; command-line flags override it.  Exit codes: 0 ok,
2 configuration error, 3 statistical contract violated, 4 I/O error.
"""

import argparse
from dataclasses import asdict, dataclass, fields
import hashlib
import io
import json
import math
import os
import sys

import numpy as np
import scipy

from simconc import __version__, analysis, concentration, workload
from simconc.spaces import Kind, Space

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_IO = 0, 2, 3, 4

EXPERIMENTS = ("profile", "instability", "theorem", "sweep", "stable-check", "alpha")
ALPHA_METHODS = ("WitnessMC", "NormalLevyBound", "BruteForce", "ExtremalBall")

# keys that do not change any artifact; kept out of the manifest
_VOLATILE = ("out", "workers")


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


@dataclass
class RunConfig:
    experiment: str
    space: str = "sphere-geodesic"
    dim: tuple = (20,)
    dataset: str = "iid:1000"
    eps: tuple = (0.5,)
    queries: int = 2000
    seed: int = 0
    out: str = "simconc-out"
    alpha_c1: float | None = None
    alpha_c2: float | None = None
    tol: float | None = None
    samples: int = 100_000
    method: str = "WitnessMC"
    max_rejections: int = 10_000
    max_points: int = 5_000
    override_homogeneity: bool = False
    workers: int = 1

    @classmethod
    def from_mapping(cls, raw):
        """Build from string (or already typed) values; collects every parse error."""
        errors = []
        kwargs = {}
        names = {f.name for f in fields(cls)}
        for key, value in raw.items():
            key = key.strip().replace("-", "_")
            if key not in names:
                errors.append(f"unknown key {key!r}")
                continue
            try:
                kwargs[key] = _PARSERS.get(key, str)(value)
            except (TypeError, ValueError):
                errors.append(f"{key}: cannot parse {value!r}")
        if "experiment" not in kwargs:
            errors.append("experiment: missing")
        if errors:
            raise ConfigError(errors)
        return cls(**kwargs)

    def canonical(self):
        out = asdict(self)
        for key in _VOLATILE:
            out.pop(key)
        out["dim"] = list(self.dim)
        out["eps"] = list(self.eps)
        return out


def _list(parse):
    def inner(value):
        if isinstance(value, (list, tuple)):
            return tuple(parse(v) for v in value)
        text = str(value).strip()
        return tuple(parse(v) for v in text.split(",")) if text else ()
    return inner


def _optional_float(value):
    return None if value in (None, "", "none", "None") else float(value)


def _bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


_PARSERS = {
    "experiment": str,
    "space": str,
    "dim": _list(int),
    "dataset": str,
    "eps": _list(float),
    "queries": int,
    "seed": int,
    "out": str,
    "alpha_c1": _optional_float,
    "alpha_c2": _optional_float,
    "tol": _optional_float,
    "samples": int,
    "method": str,
    "max_rejections": int,
    "max_points": int,
    "override_homogeneity": _bool,
    "workers": int,
}


def parse_dataset(text):
    """``iid:N`` -> ("iid", N); ``iid:exp:RATE`` -> ("iid-exp", RATE); ``sep:DELTA`` -> ("sep", DELTA)."""
    parts = str(text).split(":")
    if len(parts) == 2 and parts[0] == "iid":
        return "iid", int(parts[1])
    if len(parts) == 3 and parts[0] == "iid" and parts[1] == "exp":
        return "iid-exp", float(parts[2])
    if len(parts) == 2 and parts[0] == "sep":
        return "sep", float(parts[1])
    raise ValueError(f"bad dataset spec {text!r}")


def validate(config):
    """Every problem with ``config``, one line each; empty when runnable."""
    diags = []
    if config.experiment not in EXPERIMENTS:
        diags.append(f"experiment: unknown {config.experiment!r} (expected one of {', '.join(EXPERIMENTS)})")
    try:
        kind = Kind(config.space)
    except ValueError:
        kind = None
        diags.append(f"space: unknown kind {config.space!r} (expected one of {', '.join(k.value for k in Kind)})")
    if not config.dim:
        diags.append("dim: at least one dimension required")
    for n in config.dim:
        if n < 1:
            diags.append(f"dim: {n} is not a positive integer")
    if list(config.dim) != sorted(config.dim):
        diags.append("dim: dimensions must be sorted ascending")
    if not config.eps:
        diags.append("eps: at least one value required")
    for e in config.eps:
        if not (math.isfinite(e) and e > 0):
            diags.append(f"eps: {e} must be positive")
        elif config.experiment == "theorem" and not e < 1:
            diags.append(f"eps: {e} outside (0, 1); the lower-bound theorem requires 0 < eps < 1")
    for key in ("queries", "samples", "max_rejections", "max_points", "workers"):
        if getattr(config, key) < 1:
            diags.append(f"{key}: must be positive")
    if config.experiment in ("instability", "theorem", "sweep", "profile") and config.queries < 100:
        diags.append("queries: at least 100 required")
    if config.seed < 0:
        diags.append("seed: must be non-negative")
    for key in ("alpha_c1", "alpha_c2", "tol"):
        value = getattr(config, key)
        if value is not None and not (math.isfinite(value) and value > 0):
            diags.append(f"{key}: must be positive")
    if config.method not in ALPHA_METHODS:
        diags.append(f"method: unknown {config.method!r}")
    try:
        mode, value = parse_dataset(config.dataset)
    except ValueError as exc:
        diags.append(f"dataset: {exc}")
        mode, value = None, None
    if mode in ("iid",) and value < 1:
        diags.append("dataset: N must be positive")
    if mode == "iid-exp" and not value > 0:
        diags.append("dataset: growth rate must be positive")
    if mode == "sep" and kind is not None and config.dim:
        diam = Space(kind, max(1, config.dim[0])).diameter
        if not 0 < value < diam:
            diags.append(f"dataset: delta {value} must lie in (0, diameter = {diam})")
        elif config.experiment == "stable-check" and not value < diam / 8:
            diags.append(f"dataset: delta {value} must be below diameter/8 = {diam / 8} for stable-check")
    if config.experiment == "stable-check" and mode is not None and mode != "sep":
        diags.append("dataset: stable-check needs a separated dataset (sep:DELTA)")
    if config.experiment == "sweep" and mode == "sep":
        diags.append("dataset: sweep needs an iid dataset")
    if mode == "iid-exp" and config.experiment != "sweep":
        diags.append("dataset: iid:exp:RATE is only meaningful for sweep")
    if config.experiment == "alpha" and kind is not None and config.method in ("BruteForce", "ExtremalBall"):
        if kind is not Kind.HAMMING:
            diags.append(f"method: {config.method} needs the hamming space")
        elif config.method == "BruteForce" and any(n > 4 for n in config.dim):
            diags.append("method: BruteForce needs dim <= 4")
        elif config.method == "ExtremalBall" and any(n % 2 == 0 for n in config.dim):
            diags.append("method: ExtremalBall needs odd dim")
    return diags


# ------------------------------------------------------------------ running


class _Artifacts:
    def __init__(self, out):
        self.out = out
        self.digests = {}

    def write(self, name, text):
        path = os.path.join(self.out, name)
        data = text.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(data)
        self.digests[name] = hashlib.sha256(data).hexdigest()


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    return str(obj)


def _tag(value):
    return repr(float(value))


def _constants(config, space):
    return concentration.default_levy_constants(space, config.alpha_c1, config.alpha_c2)


def _build(config, space):
    mode, value = parse_dataset(config.dataset)
    if mode == "sep":
        return workload.build_dataset_separated(space, value, config.seed, config.max_rejections, config.max_points)
    return workload.build_dataset_iid(space, value, config.seed)


def _run_profile(config, art):
    out = []
    for n in config.dim:
        space = Space(config.space, n)
        wl = _build(config, space)
        prof = workload.profile(wl, config.eps[0], config.queries, config.seed, config.tol, config.workers)
        art.write(f"dataset_n{n}.json", workload.dumps_workload(wl) + "\n")
        out.append({"dim": n, "dataset_size": len(wl), "build": wl.metadata, **prof.as_dict()})
    return {"profiles": out}, True


def _run_instability(config, art):
    rows = []
    for n in config.dim:
        space = Space(config.space, n)
        wl = _build(config, space)
        for e in config.eps:
            res = analysis.instability_fraction(wl, e, config.queries, config.seed, config.workers)
            art.write(f"queries_n{n}_eps{_tag(e)}.csv", res.batch.to_csv())
            rows.append({"dim": n, "eps": e, "dataset_size": len(wl), "fraction": res.fraction,
                         "stderr": res.stderr, "num_coincident": res.num_coincident})
    return {"instability": rows}, True


def _run_theorem(config, art):
    reports = []
    ok = True
    for n in config.dim:
        space = Space(config.space, n)
        wl = _build(config, space)
        for e in config.eps:
            rep = analysis.verify_theorem(wl, e, config.queries, _constants(config, space), config.seed,
                                          config.tol, config.override_homogeneity, config.workers)
            art.write(f"queries_n{n}_eps{_tag(e)}.csv", rep.batch.to_csv())
            reports.append({"dim": n, **rep.as_dict()})
            if rep.status != "informational" and not rep.contract_holds:
                ok = False
    return {"theorem": reports}, ok


def _run_sweep(config, art):
    mode, value = parse_dataset(config.dataset)
    size = analysis.exponential_size(value) if mode == "iid-exp" else value
    constants = None
    if config.alpha_c1 is not None or config.alpha_c2 is not None:
        constants = _constants(config, Space(config.space, config.dim[0]))
    sweeps = []
    for e in config.eps:
        res = analysis.dimension_sweep(config.space, config.dim, size, e, config.queries, config.seed,
                                       constants, workers=config.workers)
        buf = io.StringIO()
        res.write_csv(buf)
        art.write(f"sweep_eps{_tag(e)}.csv", buf.getvalue())
        sweeps.append({"eps": e, **res.as_dict()})
    return {"sweep": sweeps}, True


def _run_stable(config, art):
    _, delta = parse_dataset(config.dataset)
    reports = []
    ok = True
    for n in config.dim:
        rep = analysis.stable_workload_check(Space(config.space, n), delta, config.queries, config.seed,
                                             config.eps[0], config.max_rejections, config.max_points,
                                             config.workers)
        reports.append({"dim": n, **rep.as_dict()})
        ok = ok and rep.passed
    return {"stable_check": reports}, ok


def _run_alpha(config, art):
    curves = []
    lines = ["dim,eps,alpha_lower,alpha_upper,stderr"]
    for n in config.dim:
        space = Space(config.space, n)
        curve = concentration.concentration_curve(space, config.eps, config.method, config.samples,
                                                  config.seed, _constants(config, space))
        rows = curve.as_rows()
        for r in rows:
            lines.append(",".join([str(n)] + [repr(r[k]) for k in ("eps", "alpha_lower", "alpha_upper", "stderr")]))
        curves.append({"dim": n, "method": curve.method, "mc_samples": curve.mc_samples, "rows": rows})
    art.write("alpha.csv", "\n".join(lines) + "\n")
    return {"alpha": curves}, True


_RUNNERS = {
    "profile": _run_profile,
    "instability": _run_instability,
    "theorem": _run_theorem,
    "sweep": _run_sweep,
    "stable-check": _run_stable,
    "alpha": _run_alpha,
}


def manifest(config, digests):
    consts = {}
    for n in config.dim:
        c = _constants(config, Space(config.space, n))
        consts[str(n)] = {"C1": c.C1, "C2": c.C2, "n": c.n}
    return {
        "experiment": config.experiment,
        "config": config.canonical(),
        "seed": config.seed,
        "constants": consts,
        "versions": {"simconc": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "artifacts": dict(sorted(digests.items())),
    }


def run(config, stderr=None):
    """Execute ``config``; returns an exit status and writes artifacts under ``config.out``."""
    stderr = stderr or sys.stderr
    diags = validate(config)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(config.out, exist_ok=True)
        art = _Artifacts(config.out)
        report, ok = _RUNNERS[config.experiment](config, art)
        report = {"experiment": config.experiment, "contract_ok": ok, **report}
        art.write("report.json", _json(report))
        man = manifest(config, art.digests)
        with open(os.path.join(config.out, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_json(man))
    except analysis.DegenerateWorkloadError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=stderr)
        return EXIT_IO
    if not ok:
        print("theorem check failed: statistical contract violated (see report.json)", file=stderr)
        return EXIT_CONTRACT
    return EXIT_OK


def read_config_file(path):
    """Key/value pairs from a flat config file or a run manifest."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return dict(doc["config"]) if "config" in doc else doc
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"{path}:{lineno}: expected key = value"])
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def build_parser():
    p = argparse.ArgumentParser(prog="simconc", description="Concentration-of-measure experiments on similarity workloads")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="key = value file or manifest.json from an earlier run")
    p.add_argument("--space", help=f"one of {', '.join(k.value for k in Kind)}")
    p.add_argument("--dim", help="dimension, or comma-separated dimensions")
    p.add_argument("--dataset", help="iid:N, iid:exp:RATE (sweep) or sep:DELTA")
    p.add_argument("--eps", help="comma-separated eps values")
    p.add_argument("--queries", help="number of query samples")
    p.add_argument("--seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--alpha-c1", dest="alpha_c1")
    p.add_argument("--alpha-c2", dest="alpha_c2")
    p.add_argument("--tol")
    p.add_argument("--samples", help="Monte-Carlo samples for alpha curves")
    p.add_argument("--method", help=f"alpha method: {', '.join(ALPHA_METHODS)}")
    p.add_argument("--max-rejections", dest="max_rejections")
    p.add_argument("--max-points", dest="max_points")
    p.add_argument("--workers")
    p.add_argument("--override-homogeneity", dest="override_homogeneity", action="store_const", const="true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    raw = {}
    try:
        if args.config:
            raw.update(read_config_file(args.config))
        raw.update({k: v for k, v in vars(args).items() if k != "config" and v is not None})
        config = RunConfig.from_mapping(raw)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
