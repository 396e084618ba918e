"""Command-line pipeline: fit, simulate, check, diagnose.

Each command reads a JSON config (flags override file keys), writes its
artifacts into the output directory, and records a manifest carrying the
model hash so later stages refuse mismatched inputs.  Exit codes:
0 success, 1 validation failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .diagnostics import EnsembleStats, effect_curves
from .generator import SimulationRequest, iter_ensemble
from .inference import mpsrf, psrf_table, run_mcmc
from .model import RainfallSeries
from .splines import BasisSet, CovariateError


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; usage problems are
    validation failures here, so raise instead."""

    def error(self, message):
        raise io.ValidationError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="rainhmm",
                description="Clone-state hidden Markov model for hourly "
                            "rainfall: fit, simulate, check, diagnose.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--data", help="two-column (timestamp, mm) data file")
        sp.add_argument("--output-dir", dest="output_dir")

    f = sub.add_parser("fit", help="fit the model by MCMC")
    common(f)
    f.add_argument("--n-dry", dest="n_dry", type=int)
    f.add_argument("--n-wet", dest="n_wet", type=int)
    f.add_argument("--seasonal-knots", dest="seasonal_knots", type=int)
    f.add_argument("--overall-knots", dest="overall_knots", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn-in", dest="burn_in", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="simulate an ensemble from the "
                                        "fitted posterior")
    common(s)
    s.add_argument("--n-series", dest="n_series", type=int)
    s.add_argument("--simulation-seed", dest="simulation_seed", type=int)
    s.add_argument("--allow-cycling", dest="allow_cycling",
                   action="store_const", const=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="predictive checks of the ensemble "
                                     "against the observed series")
    common(c)
    c.add_argument("--top-k", dest="top_k", type=int)
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("diagnose", help="convergence diagnostics of a "
                                        "fitted posterior")
    common(d)
    d.set_defaults(func=cmd_diagnose)
    return p


def _config_from_args(args) -> io.RunConfig:
    keys = ("data", "output_dir", "n_dry", "n_wet", "seasonal_knots",
            "overall_knots", "chains", "iterations", "burn_in", "thin",
            "seed", "n_series", "simulation_seed", "allow_cycling", "top_k")
    overrides = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    config = io.load_config(args.config, overrides)
    if not config.data:
        raise io.ValidationError("no data file given (--data or config key)")
    return config


def _prepare(args):
    """Shared setup: config, ingested series, resolved bases, model hash."""
    config = _config_from_args(args)
    series = io.ingest(config.data)
    config = config.resolve_overall_knots(series.timestamps)
    bases = BasisSet.build(series.covariates,
                           seasonal_knots=config.seasonal_knots,
                           overall_knots=config.overall_knots)
    mhash = io.model_hash(config, io.file_sha256(config.data))
    os.makedirs(config.output_dir, exist_ok=True)
    return config, series, bases, mhash


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    config, series, bases, mhash = _prepare(args)
    try:
        chains = run_mcmc(series, config.priors(), config.space(), bases,
                          config.mcmc_settings())
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as e:
        raise io.NumericalError(f"fit failed: {e}")

    out = config.output_dir
    io.write_posterior(os.path.join(out, io.POSTERIOR_FILE), chains)
    psrf_block = None
    if chains.n_chains >= 2 and chains.n_retained >= 2:
        names, values, degenerate = psrf_table(chains)
        finite = values[np.isfinite(values)]
        psrf_block = {
            "per_parameter": {n: v for n, v in zip(names, values)},
            "median": float(np.median(finite)),
            "mean": float(np.mean(finite)),
            "mpsrf": mpsrf(chains),
            "degenerate": [n for n, d in zip(names, degenerate) if d],
        }
    io.write_manifest(os.path.join(out, io.FIT_MANIFEST), {
        "artifact": "fit",
        "model_hash": mhash,
        "config": io.config_as_dict(config),
        "data_sha256": io.file_sha256(config.data),
        "n_hours": series.n_hours,
        "seasonal_coefs": bases.seasonal.n_coef,
        "overall_coefs": bases.overall.n_coef,
        "chain_seeds": chains.seeds,
        "n_retained": chains.n_retained,
        "acceptance": chains.acceptance,
        "mean_loglik": [float(np.mean(chains.loglik[c]))
                        for c in range(chains.n_chains)],
        "psrf": psrf_block,
        "versions": io.versions(),
    })
    print(f"fit: {chains.n_chains} chains x {chains.n_retained} retained "
          f"draws -> {os.path.join(out, io.POSTERIOR_FILE)}")
    if psrf_block is not None:
        print(f"fit: median PSRF {psrf_block['median']:.4f}, "
              f"mean {psrf_block['mean']:.4f}, "
              f"MPSRF {psrf_block['mpsrf']:.4f}")
    return 0


def _load_posterior(config, bases, mhash):
    out = config.output_dir
    manifest = io.read_manifest(os.path.join(out, io.FIT_MANIFEST))
    io.require_matching_hash(manifest, mhash,
                             os.path.join(out, io.FIT_MANIFEST))
    layout = io.layout_from_knots(config.space(), manifest["seasonal_coefs"],
                                  manifest["overall_coefs"])
    return io.read_posterior(os.path.join(out, io.POSTERIOR_FILE), layout,
                             config.mcmc_settings())


def cmd_simulate(args) -> int:
    config, series, bases, mhash = _prepare(args)
    chains = _load_posterior(config, bases, mhash)
    request = SimulationRequest(timestamps=series.timestamps,
                                n_series=config.n_series,
                                seed=config.simulation_seed,
                                allow_cycling=config.allow_cycling)
    n_series = (chains.n_chains * chains.n_retained
                if config.n_series is None else config.n_series)
    out = config.output_dir
    values_path = os.path.join(out, io.ENSEMBLE_FILE)
    mm = np.lib.format.open_memmap(values_path, mode="w+", dtype=np.float64,
                                   shape=(n_series, series.n_hours))
    source = []
    iters = io.retained_iterations(chains.settings)
    try:
        for i, draw, sim in iter_ensemble(request, chains, config.space(),
                                          bases):
            mm[i] = sim.values
            c, j = divmod(draw, chains.n_retained)
            source.append({"series": i, "chain": int(chains.seeds[c]),
                           "iteration": int(iters[j])})
    except FloatingPointError as e:
        raise io.NumericalError(f"simulation failed: {e}")
    mm.flush()
    io.write_manifest(os.path.join(out, io.ENSEMBLE_MANIFEST), {
        "artifact": "ensemble",
        "model_hash": mhash,
        "values_file": io.ENSEMBLE_FILE,
        "n_series": n_series,
        "n_hours": series.n_hours,
        "start": str(series.timestamps[0]),
        "simulation_seed": config.simulation_seed,
        "allow_cycling": config.allow_cycling,
        "source_draws": source,
        "versions": io.versions(),
    })
    print(f"simulate: {n_series} series x {series.n_hours} hours "
          f"-> {values_path}")
    return 0


def cmd_check(args) -> int:
    config, series, bases, mhash = _prepare(args)
    out = config.output_dir
    manifest = io.read_manifest(os.path.join(out, io.ENSEMBLE_MANIFEST))
    io.require_matching_hash(manifest, mhash,
                             os.path.join(out, io.ENSEMBLE_MANIFEST))
    values_path = os.path.join(out, manifest["values_file"])
    if not os.path.exists(values_path):
        raise io.ArtifactError(f"expected ensemble file not found: "
                               f"{values_path}")
    mm = np.load(values_path, mmap_mode="r")
    if mm.shape[1] != series.n_hours:
        raise io.ArtifactError(
            f"ensemble horizon {mm.shape[1]} does not match the observed "
            f"record length {series.n_hours}")

    acc = EnsembleStats(series, top_k=config.top_k, lags=config.lags)
    for i in range(mm.shape[0]):
        sim = RainfallSeries(values=np.array(mm[i]),
                             timestamps=series.timestamps,
                             covariates=series.covariates)
        acc.add(sim)
    reports = {r.name: r for r in acc.finalize()}

    wanted = []
    for name in config.checks:
        if name == "sorted_values":
            wanted += [k for k in reports if k.startswith("sorted_values_")]
        elif name != "effects":
            wanted.append(name)
    emitted = []
    for name in wanted:
        rep = reports[name]
        fname = f"check_{name}.csv"
        io.write_check_report(os.path.join(out, fname), rep)
        emitted.append({"name": name, "file": fname,
                        "n_coords": len(rep.labels),
                        "n_outside": rep.n_outside, "meta": rep.meta})

    if "effects" in config.checks:
        chains = _load_posterior(config, bases, mhash)
        for sname, rep in effect_curves(chains, bases).items():
            fname = f"effect_{sname}.csv"
            io.write_check_report(os.path.join(out, fname), rep)
            emitted.append({"name": rep.name, "file": fname,
                            "n_coords": len(rep.labels),
                            "n_outside": 0, "meta": rep.meta})

    io.write_manifest(os.path.join(out, io.CHECKS_MANIFEST), {
        "artifact": "checks",
        "model_hash": mhash,
        "n_series": int(mm.shape[0]),
        "quantile_method": "linear",
        "reports": emitted,
        "versions": io.versions(),
    })
    for e in emitted:
        print(f"check: {e['name']}: {e['n_outside']}/{e['n_coords']} "
              f"coordinates outside the 95% envelope -> {e['file']}")
    return 0


def cmd_diagnose(args) -> int:
    config, series, bases, mhash = _prepare(args)
    chains = _load_posterior(config, bases, mhash)
    if chains.n_chains < 2 or chains.n_retained < 2:
        raise io.ValidationError(
            "convergence diagnostics need at least 2 chains with at least "
            "2 retained draws each")
    names, values, degenerate = psrf_table(chains)
    m = mpsrf(chains)
    out = config.output_dir
    io.write_psrf_table(os.path.join(out, io.PSRF_FILE), names, values, m)
    finite = values[np.isfinite(values)]
    print(f"diagnose: {len(names)} monitored parameters "
          f"-> {os.path.join(out, io.PSRF_FILE)}")
    print(f"diagnose: median PSRF {np.median(finite):.4f}, "
          f"mean {np.mean(finite):.4f}, max {np.max(values):.4f}, "
          f"MPSRF {m:.4f}")
    if degenerate.any():
        print(f"diagnose: {int(degenerate.sum())} parameter(s) had zero "
              f"within-chain variance")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except io.NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 2
    except (io.ValidationError, CovariateError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
