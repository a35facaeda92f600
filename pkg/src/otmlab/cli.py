r"""Batch experiment runner emitting CSV/JSON artifacts with manifests.

The runner performs no mathematics of its own: every emitted number is
produced by an operation of the computational modules (hashfam, tails,
nets, entropy, otm).  Each subcommand reads one declarative configuration
-- a JSON or YAML file, command-line flags, or a mix where every parameter
comes from exactly one source (the same key given in both places is an
error, never a silent override) -- and writes CSV/JSON data files plus a
manifest recording the configuration hash, library versions, runtime and
per-file checksums.  The wall-clock timestamp lives only in the manifest,
so rerunning an experiment with the same configuration and seed produces
byte-identical data files.

Validation failures print a machine-readable JSON error object to stderr
and exit nonzero.  The default output directory is the current directory,
overridden by the OTMLAB_OUTPUT_DIR environment variable, overridden by
--output-dir.
"""

import hashlib
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import entropy as entropy_mod
from . import nets as nets_mod
from . import otm as otm_mod
from . import tails as tails_mod
from .hashfam import sample_hash
from .quantum import assemble_two_local, SeparableOutcome

ENV_OUTPUT_DIR = "OTMLAB_OUTPUT_DIR"

ENTROPY_CSV_COLUMNS = ["instance", "joint_entropy", "alpha", "bound", "value",
                       "rule", "event_probability", "certified"]

THEOREM_CSV_COLUMNS = ["k", "ell", "theta", "delta0", "alpha", "eps0", "gamma",
                       "m", "phi", "d", "depth_mode", "r", "delta_term",
                       "eps_term", "eta_term", "tail_term", "total",
                       "total_log2", "net_log2", "envelope_log2",
                       "envelope_holds"]


def _fail(message, **detail):
    """Print a machine-readable validation error and exit nonzero."""
    doc = {"error": "validation", "message": message}
    if detail:
        doc["detail"] = detail
    click.echo(json.dumps(doc, sort_keys=True), err=True)
    sys.exit(2)


def _load_config(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail("cannot read config file: %s" % exc)
    suffix = Path(path).suffix.lower()
    try:
        if suffix in (".yaml", ".yml"):
            import yaml
            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        _fail("cannot parse config file %s: %s" % (path, exc))
    if not isinstance(doc, dict):
        _fail("config file %s must hold a single mapping" % path)
    return doc


def _merge(config, flags):
    """Combine a config mapping with flag values; duplicate keys are errors."""
    merged = dict(config)
    for key, value in flags.items():
        if value is None:
            continue
        if key in config:
            _fail("parameter %r is set in both the config file and a flag; "
                  "pick one source" % key)
        merged[key] = value
    return merged


def _check_keys(cfg, required, optional):
    for key in required:
        if key not in cfg:
            _fail("missing required parameter %r" % key)
    unknown = sorted(set(cfg) - set(required) - set(optional))
    if unknown:
        _fail("unknown parameters: %s" % ", ".join(unknown))


def _outdir(flag):
    path = Path(flag or os.environ.get(ENV_OUTPUT_DIR) or ".")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail("cannot create output directory %s: %s" % (path, exc))
    return path


def _canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions():
    import importlib.metadata
    import mpmath
    import scipy
    return {
        "python": sys.version.split()[0],
        "otmlab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "click": importlib.metadata.version("click"),
    }


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _finish(outdir, prefix, experiment, cfg, outputs, started):
    """Write the manifest and report the artifact paths on stdout."""
    manifest = {
        "experiment": experiment,
        "config": cfg,
        "config_sha256": hashlib.sha256(_canonical(cfg).encode()).hexdigest(),
        "versions": _versions(),
        "runtime_seconds": round(time.time() - started, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
    }
    manifest_path = outdir / ("%s_manifest.json" % prefix)
    _write_json(manifest_path, manifest)
    for p in list(outputs) + [manifest_path]:
        click.echo(str(p))


def _float_list(cfg, key):
    raw = cfg[key]
    if isinstance(raw, str):
        raw = [piece for piece in raw.replace(",", " ").split() if piece]
    try:
        return [float(v) for v in raw]
    except (TypeError, ValueError):
        _fail("parameter %r must be a list of numbers" % key)


def _require_seed(cfg):
    seed = cfg.get("seed")
    if seed is None:
        _fail("this experiment is stochastic; --seed (or a config seed) is mandatory")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        _fail("seed must be a nonnegative integer, got %r" % (seed,))
    return seed


@click.group()
def main():
    """Desk-scale experiment runner; see each subcommand's --help."""


_common = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="JSON or YAML config file."),
    click.option("--output-dir", default=None,
                 help="Output directory (default: $%s or cwd)." % ENV_OUTPUT_DIR),
    click.option("--out", default=None, help="Artifact name prefix."),
]


def _with_common(fn):
    for deco in reversed(_common):
        fn = deco(fn)
    return fn


@main.command()
@_with_common
@click.option("--kind", type=click.Choice(["linear", "quadratic"]), default=None)
@click.option("--ell", type=int, default=None)
@click.option("--r", "r_", type=int, default=None)
@click.option("--n", type=int, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--lambda-grid", "lambda_grid", default=None,
              help="Comma-separated thresholds; 0 rows report frequency 1.")
@click.option("--mode", type=click.Choice(["hash", "rademacher"]), default=None,
              help="Sign source for quadratic instances.")
@click.option("--seed", type=int, default=None)
def tails(config_path, output_dir, out, kind, ell, r_, n, trials, lambda_grid,
          mode, seed):
    """Monte Carlo tail frequencies against the closed-form bounds."""
    started = time.time()
    cfg = _merge(_load_config(config_path), {
        "kind": kind, "ell": ell, "r": r_, "n": n, "trials": trials,
        "lambda_grid": lambda_grid, "mode": mode, "seed": seed,
    })
    _check_keys(cfg, required=["kind", "ell", "r", "n", "trials",
                               "lambda_grid", "seed"], optional=["mode"])
    seed = _require_seed(cfg)
    grid = _float_list(cfg, "lambda_grid")
    rng = np.random.default_rng(seed)
    outdir = _outdir(output_dir)
    prefix = out or "tails"
    try:
        if cfg["kind"] == "linear":
            weights = rng.normal(size=cfg["n"])
            inst = tails_mod.LinearInstance(weights / np.linalg.norm(weights))
            result = tails_mod.empirical_tail_linear(
                inst, cfg["ell"], cfg["r"], grid, cfg["trials"], rng)
            bounds = [tails_mod.kite_bound(cfg["r"], inst.v, lam) for lam in grid]
            rows = tails_mod.tail_csv_rows(result, bounds, "kite", cfg["r"], seed)
        else:
            a = rng.normal(size=(cfg["n"], cfg["n"]))
            a = (a + a.T) / 2.0
            np.fill_diagonal(a, 0.0)
            a /= np.linalg.norm(a)
            inst = tails_mod.QuadraticInstance(a)
            result = tails_mod.empirical_tail_quadratic(
                inst, cfg["ell"], cfg["r"], grid, cfg["trials"], rng,
                mode=cfg.get("mode", "hash"))
            t = cfg["r"] // 2
            bounds = [tails_mod.crayfish_bound(t, inst.abs_frobenius,
                                               inst.abs_operator, lam)
                      for lam in grid]
            rows = tails_mod.tail_csv_rows(result, bounds, "crayfish", t, seed)
    except ValueError as exc:
        _fail(str(exc))
    csv_path = outdir / ("%s.csv" % prefix)
    tails_mod.write_tail_csv(csv_path, rows)
    _finish(outdir, prefix, "tails", cfg, [csv_path], started)


@main.command()
@_with_common
@click.option("--family", type=click.Choice(["separable", "two-local"]), default=None)
@click.option("--m", type=int, default=None)
@click.option("--mu", type=float, default=None)
@click.option("--d", type=int, default=None, help="Circuit depth (two-local only).")
@click.option("--samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
def nets(config_path, output_dir, out, family, m, mu, d, samples, seed):
    """Covering-radius sampling and cardinality accounting for the nets."""
    started = time.time()
    cfg = _merge(_load_config(config_path), {
        "family": family, "m": m, "mu": mu, "d": d, "samples": samples,
        "seed": seed,
    })
    _check_keys(cfg, required=["family", "m", "mu", "samples", "seed"],
                optional=["d"])
    seed = _require_seed(cfg)
    if not isinstance(cfg["samples"], int) or cfg["samples"] < 1:
        _fail("samples must be a positive integer")
    rng = np.random.default_rng(seed)
    outdir = _outdir(output_dir)
    prefix = out or "nets"
    m, mu = cfg["m"], cfg["mu"]
    try:
        if cfg["family"] == "separable":
            if cfg.get("d") is not None:
                _fail("d applies only to the two-local family")
            spec = nets_mod.separable_net(m, mu)
            bounds = nets_mod.cardinality_bounds(m, mu)
            log2_bound = bounds["separable_log2"]
            delta = spec.qubit_net.delta
            dists = []
            for _ in range(cfg["samples"]):
                factors = [nets_mod.sample_qubit_element(rng) for _ in range(m)]
                target = SeparableOutcome(factors).assemble()
                snapped = spec.point(spec.covering_index(factors))
                dists.append(float(np.linalg.norm(
                    target.matrix - snapped.matrix, 2)))
            d_out = ""
        else:
            if cfg.get("d") is None:
                _fail("the two-local family requires d")
            spec = nets_mod.two_local_net(m, cfg["d"], mu)
            bounds = nets_mod.cardinality_bounds(m, mu, d=cfg["d"])
            log2_bound = bounds["two_local_log2"]
            delta = spec.kraus_net.delta
            dists = []
            for _ in range(cfg["samples"]):
                outcome = nets_mod.sample_two_local_outcome(m, cfg["d"], rng)
                target = assemble_two_local(outcome)
                snapped = assemble_two_local(spec.covering_map(outcome))
                dists.append(float(np.linalg.norm(
                    target.matrix - snapped.matrix, 2)))
            d_out = str(cfg["d"])
    except ValueError as exc:
        _fail(str(exc))
    dists = np.asarray(dists)
    row = {
        "m": str(m), "d": d_out, "mu": "%.17g" % mu, "delta": "%.17g" % delta,
        "log2_bound": "%.17g" % log2_bound,
        "log2_enumerated": "%.17g" % spec.log2_size,
        "covering_radius_p99": "%.17g" % float(np.quantile(dists, 0.99)),
        "samples": str(cfg["samples"]), "seed": str(seed),
    }
    csv_path = outdir / ("%s.csv" % prefix)
    nets_mod.write_net_csv(csv_path, [row])
    json_path = outdir / ("%s.json" % prefix)
    _write_json(json_path, {
        "family": cfg["family"],
        "cardinality_bounds": bounds,
        "log2_enumerated": spec.log2_size,
        "covering_radius_max": float(dists.max()),
        "covering_radius_p99": float(np.quantile(dists, 0.99)),
        "within_mu_fraction": float((dists <= mu + 1e-12).mean()),
    })
    _finish(outdir, prefix, "nets", cfg, [csv_path, json_path], started)


@main.command()
@_with_common
@click.option("--count", type=int, default=None, help="Random instances to draw.")
@click.option("--n0", type=int, default=None)
@click.option("--n1", type=int, default=None)
@click.option("--nz", type=int, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--eps-prime", "eps_prime", type=float, default=None)
@click.option("--alpha", type=float, default=None,
              help="Joint level; defaults to each instance's smoothed entropy.")
@click.option("--seed", type=int, default=None)
def entropy(config_path, output_dir, out, count, n0, n1, nz, eps, eps_prime,
            alpha, seed):
    """Smoothed min-entropy and splitting certificates on random joints."""
    started = time.time()
    cfg = _merge(_load_config(config_path), {
        "count": count, "n0": n0, "n1": n1, "nz": nz, "eps": eps,
        "eps_prime": eps_prime, "alpha": alpha, "seed": seed,
    })
    _check_keys(cfg, required=["count", "n0", "n1", "nz", "eps", "eps_prime",
                               "seed"], optional=["alpha"])
    seed = _require_seed(cfg)
    if not isinstance(cfg["count"], int) or cfg["count"] < 1:
        _fail("count must be a positive integer")
    rng = np.random.default_rng(seed)
    outdir = _outdir(output_dir)
    prefix = out or "entropy"
    rows, records = [], []
    try:
        for i in range(cfg["count"]):
            table = rng.random((cfg["nz"], cfg["n0"], cfg["n1"])) + 0.01
            table /= table.sum(axis=(1, 2), keepdims=True)
            pz = rng.random(cfg["nz"]) + 0.1
            pz /= pz.sum()
            p = entropy_mod.joint_cond_dist(table, pz)
            joint = entropy_mod.smoothed_min_entropy(p, cfg["eps"])
            level = cfg.get("alpha")
            if level is None:
                level = joint["value"]
            res = entropy_mod.entropy_split(p, level, cfg["eps"], cfg["eps_prime"])
            cert = res["certificate"]
            record = {
                "instance": i,
                "joint_entropy": joint["value"],
                "alpha": level,
                "bound": cert["bound"],
                "value": cert["value"],
                "rule": cert["rule"],
                "event_probability": cert["event_probability"],
                "certified": bool(cert["value"] >= cert["bound"] - 1e-9),
            }
            records.append(record)
            rows.append({k: ("%.17g" % v if isinstance(v, float) else str(v))
                         for k, v in record.items()})
    except ValueError as exc:
        _fail(str(exc))
    csv_path = outdir / ("%s.csv" % prefix)
    import csv as _csv
    with open(csv_path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=ENTROPY_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    json_path = outdir / ("%s.json" % prefix)
    _write_json(json_path, {"instances": records})
    _finish(outdir, prefix, "entropy", cfg, [csv_path, json_path], started)


def _build_model(block):
    if not isinstance(block, dict) or "name" not in block:
        _fail("model must be a mapping with a 'name' field")
    name = block["name"]
    if name == "classical-leak":
        allowed = {"name", "ell", "beta", "positions"}
        unknown = sorted(set(block) - allowed)
        if unknown:
            _fail("unknown model parameters: %s" % ", ".join(unknown))
        positions = block.get("positions")
        if positions is not None:
            positions = tuple(positions)
        try:
            return otm_mod.ClassicalLeakSim(block.get("ell"), block.get("beta"),
                                            positions=positions)
        except (TypeError, ValueError) as exc:
            _fail(str(exc))
    if name == "wiesner":
        allowed = {"name", "m"}
        unknown = sorted(set(block) - allowed)
        if unknown:
            _fail("unknown model parameters: %s" % ", ".join(unknown))
        try:
            return otm_mod.WiesnerToyOtm(block.get("m"))
        except (TypeError, ValueError) as exc:
            _fail(str(exc))
    _fail("unknown model name %r (expected classical-leak or wiesner)" % name)


def _build_params(block):
    if not isinstance(block, dict):
        _fail("params must be a mapping of reduction parameters")
    try:
        return otm_mod.ReductionParams(**block)
    except TypeError as exc:
        _fail("bad reduction parameter: %s" % exc)
    except ValueError as exc:
        _fail(str(exc))


@main.command("otm-security")
@_with_common
@click.option("--hash-r", "hash_r", type=int, default=None,
              help="Independence order of the sampled F, G.")
@click.option("--delta", type=float, default=None,
              help="Outcome-negligibility level; defaults to params delta.")
@click.option("--seed", type=int, default=None)
def otm_security(config_path, output_dir, out, hash_r, delta, seed):
    """Evaluate the per-outcome security report for one model + parameters."""
    started = time.time()
    cfg = _merge(_load_config(config_path), {
        "hash_r": hash_r, "delta": delta, "seed": seed,
    })
    _check_keys(cfg, required=["model", "params", "hash_r", "seed"],
                optional=["delta"])
    seed = _require_seed(cfg)
    rng = np.random.default_rng(seed)
    outdir = _outdir(output_dir)
    prefix = out or "otm_security"
    model = _build_model(cfg["model"])
    params = _build_params(cfg["params"])
    level = cfg.get("delta")
    if level is None:
        level = params.delta
    try:
        F = sample_hash(model.ell, cfg["hash_r"], rng)
        G = sample_hash(model.ell, cfg["hash_r"], rng)
        otm = otm_mod.IdealBitOtm(F, G, model)
        report = otm_mod.evaluate_security(otm, level, params)
    except ValueError as exc:
        _fail(str(exc))
    csv_path = outdir / ("%s.csv" % prefix)
    otm_mod.write_security_csv(csv_path, report)
    json_path = outdir / ("%s.json" % prefix)
    Path(json_path).write_text(report.to_json() + "\n")
    _finish(outdir, prefix, "otm-security", cfg, [csv_path, json_path], started)


@main.command("theorem-bounds")
@_with_common
def theorem_bounds(config_path, output_dir, out):
    """Evaluate the security-bound term table at configured parameter points."""
    started = time.time()
    cfg = _merge(_load_config(config_path), {})
    _check_keys(cfg, required=["points"], optional=[])
    if not isinstance(cfg["points"], list) or not cfg["points"]:
        _fail("points must be a nonempty list of parameter mappings")
    outdir = _outdir(output_dir)
    prefix = out or "theorem_bounds"
    rows, records = [], []
    for block in cfg["points"]:
        params = _build_params(block)
        try:
            result = otm_mod.theorem_bound(params)
        except ValueError as exc:
            _fail(str(exc))
        records.append({"params": params.as_dict(), "bound": {
            k: v for k, v in result.items() if k not in ("terms", "terms_log2")
        } | {"terms": result["terms"], "terms_log2": result["terms_log2"]}})
        row = {
            "k": str(params.k), "ell": str(params.ell),
            "theta": "%.17g" % params.theta,
            "delta0": "%.17g" % params.delta0,
            "alpha": "%.17g" % params.alpha,
            "eps0": "%.17g" % params.eps0,
            "gamma": "%.17g" % params.gamma,
            "m": str(params.m),
            "phi": "" if params.phi is None else "%.17g" % params.phi,
            "d": "" if params.d is None else str(params.d),
            "depth_mode": str(params.depth_mode),
            "r": str(result["r"]),
            "total": "%.17g" % result["total"],
            "total_log2": "%.17g" % result["total_log2"],
            "net_log2": "%.17g" % result["net_log2"],
            "envelope_log2": "%.17g" % result["envelope_log2"],
            "envelope_holds": str(result["envelope_holds"]),
        }
        for name in ("delta_term", "eps_term", "eta_term", "tail_term"):
            row[name] = "%.17g" % result["terms"][name]
        rows.append(row)
    csv_path = outdir / ("%s.csv" % prefix)
    import csv as _csv
    with open(csv_path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=THEOREM_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    json_path = outdir / ("%s.json" % prefix)
    _write_json(json_path, {"points": records})
    _finish(outdir, prefix, "theorem-bounds", cfg, [csv_path, json_path], started)


@main.command("verify-all")
@click.option("--suite", default=None,
              help="Path to the acceptance test file (default: autodetect).")
def verify_all(suite):
    """Run the acceptance suite; exits with pytest's status."""
    if suite is None:
        candidates = [
            Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py",
            Path.cwd() / "tests" / "test_acceptance.py",
        ]
        for candidate in candidates:
            if candidate.exists():
                suite = candidate
                break
        else:
            _fail("cannot locate tests/test_acceptance.py; pass --suite")
    elif not Path(suite).exists():
        _fail("suite path %s does not exist" % suite)
    click.echo("running %s" % suite)
    sys.exit(subprocess.call([sys.executable, "-m", "pytest", str(suite), "-v"]))


if __name__ == "__main__":
    main()
