"""Data ingestion, run configuration, and artifact persistence.

Every artifact written here is deterministic for fixed inputs and seed:
floats are serialized with shortest round-trip `repr`, JSON manifests
have sorted keys, and nothing records wall-clock time.  Each manifest
carries a hash of the model-defining configuration plus the data file, so
downstream commands can refuse artifacts produced under a different
setup.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import re
from dataclasses import asdict, dataclass, replace

import numba
import numpy as np
import scipy

from . import __version__
from .inference import ChainSet, MCMCSettings, ParameterLayout, PriorSpec
from .model import GRID_MM, RainfallSeries, StateSpace

POSTERIOR_FILE = "posterior.csv"
FIT_MANIFEST = "fit_manifest.json"
ENSEMBLE_FILE = "ensemble_values.npy"
ENSEMBLE_MANIFEST = "ensemble_manifest.json"
CHECKS_MANIFEST = "checks_manifest.json"
PSRF_FILE = "psrf.csv"

_MAX_REPORTED_PROBLEMS = 20


class ValidationError(Exception):
    """Bad input: data, configuration, or command usage (exit code 1)."""


class IngestError(ValidationError):
    """Data file rejected; problems lists each offence found."""

    def __init__(self, path, problems):
        self.path = path
        self.problems = list(problems)
        shown = self.problems[:_MAX_REPORTED_PROBLEMS]
        more = len(self.problems) - len(shown)
        lines = "\n  ".join(shown)
        msg = f"{path}: {len(self.problems)} problem(s)\n  {lines}"
        if more > 0:
            msg += f"\n  ... and {more} more"
        super().__init__(msg)


class ArtifactError(ValidationError):
    """Missing or mismatched upstream artifact."""


class NumericalError(RuntimeError):
    """Numerical failure during fitting or simulation (exit code 2)."""


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration; file keys mirror the field names.

    overall_knots None means automatic: the number of distinct calendar
    years in the record, floored at the basis minimum of 4.  n_series
    None means one simulated series per retained draw.
    """

    data: str = ""
    output_dir: str = "out"
    n_dry: int = 3
    n_wet: int = 2
    seasonal_knots: int = 6
    overall_knots: int | None = None
    intercept_scale: float = 10.0
    nu_scale: float = float(np.sqrt(2.0))
    ridge: float = 1e-8
    chains: int = 4
    iterations: int = 20000
    burn_in: int = 10000
    thin: int = 10
    seed: int = 0
    n_series: int | None = None
    simulation_seed: int = 0
    allow_cycling: bool = False
    top_k: int = 800
    lags: tuple = (1, 2, 6, 24)
    checks: tuple = ("dry_top_k", "spearman_autocorr",
                     "seasonal_zero_proportion", "sorted_values",
                     "sorted_daily", "sorted_monthly", "effects")

    def validate(self):
        if self.n_dry < 1 or self.n_wet < 1:
            raise ValidationError("n_dry and n_wet must be at least 1")
        if self.seasonal_knots < 4:
            raise ValidationError("seasonal_knots must be at least 4")
        if self.overall_knots is not None and self.overall_knots < 4:
            raise ValidationError("overall_knots must be at least 4")
        if self.chains < 1:
            raise ValidationError("chains must be at least 1")
        if not 0 <= self.burn_in <= self.iterations:
            raise ValidationError("burn_in must lie in [0, iterations]")
        if self.thin < 1 or self.top_k < 1:
            raise ValidationError("thin and top_k must be positive")
        if any(int(l) < 1 for l in self.lags):
            raise ValidationError("lags must be positive integers")
        known = {"dry_top_k", "spearman_autocorr", "seasonal_zero_proportion",
                 "sorted_values", "sorted_daily", "sorted_monthly", "effects"}
        bad = [c for c in self.checks if c not in known]
        if bad:
            raise ValidationError(f"unknown check name(s): {bad}; "
                                  f"known: {sorted(known)}")
        return self

    def priors(self) -> PriorSpec:
        return PriorSpec(intercept_scale=self.intercept_scale,
                         nu_scale=self.nu_scale, ridge=self.ridge)

    def space(self) -> StateSpace:
        return StateSpace(self.n_dry, self.n_wet)

    def mcmc_settings(self) -> MCMCSettings:
        return MCMCSettings(n_chains=self.chains, n_iter=self.iterations,
                            burn_in=self.burn_in, thin=self.thin,
                            seed=self.seed)

    def resolve_overall_knots(self, timestamps) -> "RunConfig":
        """Fill in overall_knots from the record's distinct calendar years."""
        if self.overall_knots is not None:
            return self
        years = np.unique(np.asarray(timestamps, dtype="datetime64[s]")
                          .astype("datetime64[Y]")).size
        return replace(self, overall_knots=max(4, int(years)))


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus overriding keys.

    Unknown keys in the file are rejected so that manifests stay
    bit-exact; overrides (CLI flags) win over file keys.
    """
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise ValidationError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                values = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config file {path} is not valid JSON: {e}")
        if not isinstance(values, dict):
            raise ValidationError(f"config file {path} must hold an object")
    allowed = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ValidationError(
            f"unknown config key(s) {unknown}; allowed: {sorted(allowed)}")
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    for key in ("lags", "checks"):
        if key in values:
            values[key] = tuple(values[key])
    try:
        return RunConfig(**values).validate()
    except TypeError as e:
        raise ValidationError(str(e))


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def model_hash(config: RunConfig, data_sha256: str) -> str:
    """Hash of everything that defines the fitted model.

    Simulation and checking settings are excluded: the same posterior can
    legitimately feed many simulate/check runs.
    """
    subset = {k: getattr(config, k) for k in
              ("n_dry", "n_wet", "seasonal_knots", "overall_knots",
               "intercept_scale", "nu_scale", "ridge", "chains",
               "iterations", "burn_in", "thin", "seed")}
    subset["data_sha256"] = data_sha256
    blob = json.dumps(subset, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def versions() -> dict:
    return {"package": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__,
            "python": platform.python_version()}


# ---------------------------------------------------------------------------
# Series ingestion and serialization
# ---------------------------------------------------------------------------

_SPLIT = re.compile(r"[,;\t]|\s+")


def ingest(path: str) -> RainfallSeries:
    """Read and validate a two-column (ISO timestamp, rainfall mm) file.

    Values within 1e-6 of the 0.2 mm grid are snapped onto it; anything
    else (off-grid, negative, unparsable, duplicate or non-hourly
    timestamps, gaps) is collected into one itemized rejection.
    """
    if not os.path.exists(path):
        raise ValidationError(f"data file not found: {path}")
    stamps, values, problems = [], [], []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f for f in _SPLIT.split(line) if f]
            # a timestamp with a space separator splits into two tokens
            if len(fields) == 3 and ":" in fields[1]:
                fields = [fields[0] + "T" + fields[1], fields[2]]
            if len(fields) != 2:
                problems.append(f"line {ln}: expected 2 columns, got "
                                f"{len(fields)}")
                continue
            try:
                ts = np.datetime64(fields[0], "s")
            except ValueError:
                if ln == 1:
                    continue    # tolerate a header line
                problems.append(f"line {ln}: bad timestamp {fields[0]!r}")
                continue
            try:
                val = float(fields[1])
            except ValueError:
                problems.append(f"line {ln}: bad value {fields[1]!r}")
                continue
            if val < 0:
                problems.append(f"line {ln}: negative value {fields[1]}")
                continue
            k = round(val / GRID_MM)
            if abs(val - k * GRID_MM) > 1e-6:
                problems.append(f"line {ln}: value {fields[1]} is not a "
                                f"multiple of {GRID_MM} mm")
                continue
            stamps.append(ts)
            values.append(k * GRID_MM)
    if not stamps and not problems:
        raise IngestError(path, ["file contains no data rows"])
    if not problems:
        ts = np.array(stamps, dtype="datetime64[s]")
        sec = ts.astype("int64")
        off = np.nonzero(sec % 3600 != 0)[0]
        for i in off[:_MAX_REPORTED_PROBLEMS]:
            problems.append(f"timestamp {ts[i]} is not on the hour")
        if off.size == 0:
            step = np.diff(sec)
            for i in np.nonzero(step == 0)[0][:_MAX_REPORTED_PROBLEMS]:
                problems.append(f"duplicate timestamp {ts[i + 1]}")
            for i in np.nonzero(step < 0)[0][:_MAX_REPORTED_PROBLEMS]:
                problems.append(f"timestamp {ts[i + 1]} goes backwards")
            for i in np.nonzero(step > 3600)[0][:_MAX_REPORTED_PROBLEMS]:
                problems.append(f"gap of {step[i] // 3600} hours after {ts[i]}")
    if problems:
        raise IngestError(path, problems)
    return RainfallSeries.create(np.array(values), ts)


def write_series_csv(path: str, series: RainfallSeries):
    """Two-column file that ingest() reads back to the identical series."""
    stamps = np.datetime_as_string(series.timestamps, unit="s")
    with open(path, "w") as fh:
        fh.write("timestamp,mm\n")
        for t, v in zip(stamps, series.values):
            fh.write(f"{t},{v:.1f}\n")


# ---------------------------------------------------------------------------
# Posterior persistence
# ---------------------------------------------------------------------------

def retained_iterations(settings: MCMCSettings) -> np.ndarray:
    """Original chain iteration number of each retained draw."""
    return settings.burn_in + settings.thin * np.arange(
        1, settings.n_retained + 1)


def write_posterior(path: str, chains: ChainSet):
    """One row per retained draw: chain id, iteration, named parameters."""
    names = chains.layout.names
    iters = retained_iterations(chains.settings)
    with open(path, "w") as fh:
        fh.write("chain,iteration," + ",".join(names) + "\n")
        for c in range(chains.n_chains):
            for j in range(chains.n_retained):
                row = ",".join(repr(float(x)) for x in chains.draws[c, j])
                fh.write(f"{c},{iters[j]},{row}\n")


def read_posterior(path: str, layout: ParameterLayout,
                   settings: MCMCSettings) -> ChainSet:
    """Load a posterior table back into a ChainSet.

    Likelihood traces and acceptance rates are not part of the table;
    they come back as NaN / empty (the manifest keeps the originals).
    """
    if not os.path.exists(path):
        raise ArtifactError(f"expected posterior file not found: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["chain", "iteration"] or header[2:] != layout.names:
            raise ArtifactError(
                f"{path}: posterior columns do not match the configured "
                f"model (has {len(header) - 2} parameters, expected "
                f"{layout.n_params})")
        rows, chain_ids = [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            chain_ids.append(int(parts[0]))
            rows.append(np.array([float(x) for x in parts[2:]]))
    if not rows:
        raise ArtifactError(f"{path}: posterior table is empty")
    chain_ids = np.array(chain_ids)
    ids = np.unique(chain_ids)
    per = [np.nonzero(chain_ids == c)[0] for c in ids]
    if len({p.size for p in per}) != 1:
        raise ArtifactError(f"{path}: chains have unequal numbers of draws")
    draws = np.stack([np.stack([rows[i] for i in p]) for p in per])
    nan = np.full(draws.shape[:2], np.nan)
    return ChainSet(layout, settings, [int(c) for c in ids], draws,
                    nan.copy(), nan.copy(), [])


def layout_from_knots(space: StateSpace, seasonal_coefs: int,
                      overall_coefs: int) -> ParameterLayout:
    """Rebuild the parameter layout without touching the data.

    The layout depends on the bases only through their coefficient
    counts, so a manifest that records those counts is enough.
    """
    class _Counts:
        def __init__(self, n):
            self.n_coef = n

    class _Shim:
        seasonal = _Counts(seasonal_coefs)
        overall = _Counts(overall_coefs)

    return ParameterLayout.create(space, _Shim())


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def write_manifest(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_jsonify)
        fh.write("\n")


def _jsonify(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def read_manifest(path: str) -> dict:
    if not os.path.exists(path):
        raise ArtifactError(f"expected manifest not found: {path}")
    with open(path) as fh:
        return json.load(fh)


def require_matching_hash(manifest: dict, expected: str, path: str):
    got = manifest.get("model_hash")
    if got != expected:
        raise ArtifactError(
            f"{path} was produced under a different configuration or data "
            f"file (model hash {got} != expected {expected}); refusing to "
            f"mix artifacts")


def config_as_dict(config: RunConfig) -> dict:
    d = asdict(config)
    d["lags"] = list(config.lags)
    d["checks"] = list(config.checks)
    return d


# ---------------------------------------------------------------------------
# Check report tables
# ---------------------------------------------------------------------------

def write_check_report(path: str, report):
    with open(path, "w") as fh:
        fh.write("label,observed,lo,median,hi,inside\n")
        for i in range(len(report.labels)):
            fh.write(",".join([
                str(report.labels[i]),
                repr(float(report.observed[i])),
                repr(float(report.lo[i])),
                repr(float(report.median[i])),
                repr(float(report.hi[i])),
                str(int(bool(report.inside[i]))),
            ]) + "\n")


def write_psrf_table(path: str, names, values, mpsrf_value: float):
    finite = np.asarray(values)[np.isfinite(values)]
    with open(path, "w") as fh:
        fh.write("parameter,psrf\n")
        for n, v in zip(names, values):
            fh.write(f"{n},{repr(float(v))}\n")
        fh.write(f"(median),{repr(float(np.median(finite)))}\n")
        fh.write(f"(mean),{repr(float(np.mean(finite)))}\n")
        fh.write(f"(mpsrf),{repr(float(mpsrf_value))}\n")
