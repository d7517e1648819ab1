"""Hardware presets, experiment configuration files and batch runs.

Configuration files are flat ``key = value`` lists; ``#`` starts a comment.
List values are comma separated.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, HwLsfpError
from .hardware import IDEAL, HardwareProfile, _check_bits, build_bussgang_matrices
from .optimizer import mm_optimize
from .performance import equal_power_slp, estimate_sinr_terms, per_ue_se
from .precoding import PrecoderKind
from .scenario import SystemConfig, build_channel_statistics, dbm_to_watt, generate_network

log = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1
SCHEMES = ("SLP", "LSFP")
BANDWIDTH_HZ = 20e6


@dataclass(frozen=True)
class Preset:
    kappa_bs: float
    kappa_ue: float
    bs_bits: tuple
    ue_bits: object


PRESETS = {
    "ideal": Preset(0.0, 0.0, (IDEAL,), IDEAL),
    "low": Preset(0.01, 0.01, (3, 4, 5, 6), 5),
    "moderate": Preset(0.1, 0.05, (2, 3, 4, 6), 4),
    "high": Preset(0.175, 0.1, (1, 2, 3, 4), 3),
    "severe": Preset(0.15, 0.15, (1,), 1),
}
PRESET_ORDER = tuple(PRESETS)


def preset_profile(name: str, n_antennas: int) -> HardwareProfile:
    """Hardware profile of a named preset; BS bit levels cover equal antenna shares."""
    try:
        p = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return HardwareProfile.uniform(n_antennas, p.kappa_bs, p.kappa_ue, p.bs_bits, p.ue_bits)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one batch run.

    The optional ``kappa_bs``, ``kappa_ue``, ``bs_bits`` and ``ue_bits``
    override the corresponding preset entries.
    """

    preset: str = "ideal"
    seed: int = 0
    n_cells: int = 4
    n_ues: int = 5
    n_antennas: int = 100
    tau_p: int | None = None
    tau_c: int = 200
    pilot_power_dbm: float = 23.0
    noise_power_dbm: float = -96.0
    rho_d: float = 1.0
    area_side: float = 1000.0
    min_distance: float = 35.0
    asd_deg: float = 30.0
    precoders: tuple = ("MR", "DU", "DA")
    schemes: tuple = SCHEMES
    mc_samples: int = 500
    mm_iters: int = 50
    mm_tol: float = 1e-4
    mm_accelerate: bool = True
    n_jobs: int = 1
    kappa_bs: float | None = None
    kappa_ue: float | None = None
    bs_bits: tuple | None = None
    ue_bits: object = None
    output: str = "results.csv"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        for kind in self.precoders:
            PrecoderKind.parse(kind)
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ConfigError(f"unknown scheme {scheme!r}; expected SLP or LSFP")
        if self.mc_samples < 1 or self.mm_iters < 1:
            raise ConfigError("mc_samples and mm_iters must be positive")
        if not self.mm_tol > 0:
            raise ConfigError("mm_tol must be positive")
        for name in ("kappa_bs", "kappa_ue"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be >= 0")
        try:
            if self.bs_bits is not None:
                [_check_bits(b) for b in self.bs_bits]
            if self.ue_bits is not None:
                _check_bits(self.ue_bits)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.system()  # dimension and power checks

    def system(self) -> SystemConfig:
        return SystemConfig(
            n_cells=self.n_cells,
            n_ues=self.n_ues,
            n_antennas=self.n_antennas,
            tau_p=self.tau_p,
            tau_c=self.tau_c,
            pilot_power=dbm_to_watt(self.pilot_power_dbm),
            rho_d=self.rho_d,
            noise_power=dbm_to_watt(self.noise_power_dbm),
            area_side=self.area_side,
            min_distance=self.min_distance,
            asd_deg=self.asd_deg,
            seed=int(self.seed),
        )

    def profile(self) -> HardwareProfile:
        p = PRESETS[self.preset]
        return HardwareProfile.uniform(
            self.n_antennas,
            p.kappa_bs if self.kappa_bs is None else self.kappa_bs,
            p.kappa_ue if self.kappa_ue is None else self.kappa_ue,
            p.bs_bits if self.bs_bits is None else self.bs_bits,
            p.ue_bits if self.ue_bits is None else self.ue_bits,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def desk_config(**changes) -> ExperimentConfig:
    """Small network for quick runs: 2 cells, 2 UEs, 16 antennas, 500 samples."""
    values = dict(n_cells=2, n_ues=2, n_antennas=16, mc_samples=500)
    values.update(changes)
    return ExperimentConfig(**values)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_TUPLE_KEYS = ("precoders", "schemes", "bs_bits")
_SECTION = "experiment"


def _parse_value(key: str, text: str):
    text = text.strip()
    if text.lower() in ("none", ""):
        if key in ("bs_bits", "ue_bits", "kappa_bs", "kappa_ue", "tau_p"):
            return None
        raise ValueError("a value is required")
    if key in _TUPLE_KEYS:
        items = tuple(s.strip() for s in text.split(",") if s.strip())
        if key == "bs_bits":
            return tuple(s if s == IDEAL else int(s) for s in items)
        if key == "precoders":
            return tuple(PrecoderKind.parse(s).value for s in items)
        return tuple(s.upper() for s in items)
    if key == "ue_bits":
        return text if text == IDEAL else int(text)
    if key == "mm_accelerate":
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"expected a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    default = _FIELDS[key].default
    if key in ("preset", "output"):
        return text
    if isinstance(default, bool):
        return text.lower() in ("true", "1", "yes")
    if isinstance(default, int) or key == "tau_p":
        return int(text)
    return float(text)


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), start=1):
        if line.split("=", 1)[0].strip().lower() == key:
            return i
    return 0


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for key, raw in parser[_SECTION].items():
        line = _line_of(text, key)
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{line}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{line}: bad value for {key!r}: {exc}") from None
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        bad = next((k for k in values if k in str(exc)), None)
        where = f"{source}:{_line_of(text, bad)}" if bad else source
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def dump_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(format_config(config), encoding="utf-8")
    return path


@dataclass
class ResultRow:
    scheme: str
    precoder: str
    preset: str
    seed: int
    per_ue_se: np.ndarray | None
    sum_se: float
    mm_iterations: int
    converged: bool
    runtime_s: float = 0.0
    status: str = "ok"

    HEADER = ("scheme", "precoder", "preset", "seed", "sum_se", "mm_iterations", "converged", "status", "per_ue_se")

    def as_csv(self) -> list:
        per_ue = "" if self.per_ue_se is None else ";".join(repr(float(x)) for x in np.ravel(self.per_ue_se))
        sum_se = "" if self.per_ue_se is None else repr(float(self.sum_se))
        return [
            self.scheme,
            self.precoder,
            self.preset,
            self.seed,
            sum_se,
            self.mm_iterations,
            int(self.converged),
            self.status,
            per_ue,
        ]


@dataclass
class ExperimentResult:
    rows: list[ResultRow]
    traces: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)

    def row(self, scheme: str, precoder: str) -> ResultRow:
        precoder = PrecoderKind.parse(precoder).value
        for r in self.rows:
            if r.scheme == scheme and r.precoder == precoder:
                return r
        raise KeyError((scheme, precoder))

    def sum_se(self, scheme: str, precoder: str) -> float:
        return self.row(scheme, precoder).sum_se


def trace_path(output, precoder: str) -> Path:
    output = Path(output)
    return output.with_name(f"{output.stem}_mm_{precoder}.csv")


def metadata_path(output) -> Path:
    output = Path(output)
    return output.with_name(f"{output.stem}.meta.json")


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every (precoder, scheme) combination and optionally write the outputs.

    All precoders share the network drop and the Monte-Carlo realizations.
    A failure in one combination is logged and recorded in its row; the
    others still run.
    """
    system = config.system()
    scenario = generate_network(system)
    stats = build_channel_statistics(scenario, system)
    bg = build_bussgang_matrices(config.profile(), system.n_cells, system.n_ues)
    rows, traces, weights = [], {}, {}
    for name in config.precoders:
        kind = PrecoderKind.parse(name).value
        t0 = time.perf_counter()
        try:
            terms = estimate_sinr_terms(stats, bg, system, kind, config.mc_samples, n_jobs=config.n_jobs)
        except (HwLsfpError, np.linalg.LinAlgError) as exc:
            log.error("precoder %s: term estimation failed: %s", kind, exc)
            for scheme in config.schemes:
                rows.append(ResultRow(scheme, kind, config.preset, config.seed, None, np.nan, 0, False, 0.0, f"error: {exc}"))
            continue
        t_terms = time.perf_counter() - t0
        for scheme in config.schemes:
            t1 = time.perf_counter()
            try:
                if scheme == "SLP":
                    w, n_iter, conv = equal_power_slp(system), 0, True
                else:
                    w, trace = mm_optimize(
                        terms,
                        rho_d=system.rho_d,
                        eps=config.mm_tol,
                        max_iters=config.mm_iters,
                        scale=system.prelog,
                        accelerate=config.mm_accelerate,
                    )
                    traces[kind] = trace
                    n_iter, conv = trace.n_iter, trace.converged
                se = per_ue_se(terms, w, system)
                weights[(scheme, kind)] = w
                rows.append(
                    ResultRow(
                        scheme, kind, config.preset, config.seed, se, float(np.sum(se)), n_iter, conv,
                        t_terms + time.perf_counter() - t1,
                    )
                )
            except (HwLsfpError, np.linalg.LinAlgError) as exc:
                log.error("%s/%s failed: %s", scheme, kind, exc)
                rows.append(ResultRow(scheme, kind, config.preset, config.seed, None, np.nan, 0, False, 0.0, f"error: {exc}"))
    result = ExperimentResult(rows, traces, weights)
    if write:
        write_outputs(result, config)
    return result


def write_outputs(result: ExperimentResult, config: ExperimentConfig) -> Path:
    """Results CSV, one MM trace CSV per optimized precoder and a metadata JSON.

    Timing only goes to the metadata file so that the CSV files are
    byte-identical across runs with the same configuration.
    """
    out = Path(config.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ResultRow.HEADER)
        for row in result.rows:
            writer.writerow(row.as_csv())
    for kind, trace in result.traces.items():
        trace.to_csv(trace_path(out, kind))
    meta = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
        "assumed_defaults": {
            "tau_c": config.tau_c,
            "rho_d_W": config.rho_d,
            "note": "coherence length and downlink budget are assumptions, not measured values",
        },
        "bandwidth_hz": BANDWIDTH_HZ,
        "runtime_s": {f"{r.scheme}/{r.precoder}": r.runtime_s for r in result.rows},
        "errors": {f"{r.scheme}/{r.precoder}": r.status for r in result.rows if r.status != "ok"},
    }
    metadata_path(out).write_text(json.dumps(meta, indent=2, default=str), encoding="utf-8")
    return out
