"""Batch experiment driver: configs, frequency sweeps, population traces,
resonance reports and CSV emission.

Output files are plain CSV (UTF-8, '.' decimal, 17 significant digits) with
a '#'-prefixed header block carrying the package version, a hash of the
resolved configuration and the configuration echo; a JSON sidecar stores the
full resolved configuration.  Identical configurations produce byte-identical
files regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.signal

from .version import __version__
from .errors import ConfigError, ToleranceError
from .dynamics import (
    decompose,
    population_trace,
    ring_spectra,
    select_bands,
    truncate_modes,
    direct_population_trace,
)
from .floquet import (
    FloquetSpectrum,
    ResonancePrediction,
    circle_gap,
    labeled_spectrum,
    parabolic_vertex,
    predict_resonances,
    REPORTED_MODES,
)
from .lattice import (
    ComplexState,
    GaussianState,
    LatticeSpec,
    RingDomain,
    SupercellGrid,
    UniformState,
    make_initial_state,
)
from .propagate import PropagationParams, default_params

DIP_PROMINENCE = 0.01       # smallest overlap dip counted as detected
PEAK_PROMINENCE = 0.02      # smallest n_max peak considered for refinement
REFINE_ABOVE = 0.4          # only refine n_max peaks above this level
REFINE_MIN_STEP = 1e-3

_CONFIG_KEYS = (
    "mass", "hbar", "v0", "delta", "spacing", "amplitude", "omega", "phases",
    "np", "sigma", "center", "domain", "supercells", "substeps", "horizon",
    "omega_start", "omega_stop", "omega_step", "outdir",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one batch computation."""

    lattice: LatticeSpec
    initial: GaussianState | UniformState
    domain: str = "supercell"            # "supercell" (kappa = 0) or "ring"
    supercells: int = 16
    grid_points: int = 480               # per supercell; divisible by n_p
    substeps: int | None = None          # None: scale with omega
    horizon: int = 400
    omega_start: float | None = None
    omega_stop: float | None = None
    omega_step: float | None = None
    outdir: str = "out"
    basis_size: int | None = None
    refine_peaks: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.domain not in ("supercell", "ring"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.domain == "ring" and self.supercells < 1:
            raise ConfigError("ring domain needs at least one supercell")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        grid = (self.omega_start, self.omega_stop, self.omega_step)
        if any(v is not None for v in grid):
            if any(v is None for v in grid):
                raise ConfigError("omega grid needs start, stop and step together")
            if self.omega_step <= 0 or self.omega_stop < self.omega_start:
                raise ConfigError("omega grid must be monotone increasing")
        # constructing the domain objects validates every module invariant
        try:
            self.make_domain()
            if isinstance(self.initial, GaussianState):
                make_initial_state(self.initial, self.make_domain())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def params_for(self, spec: LatticeSpec) -> PropagationParams:
        if self.substeps is not None:
            return PropagationParams(substeps_per_period=self.substeps)
        return default_params(spec)

    def make_domain(self) -> RingDomain:
        cell = SupercellGrid.for_spec(self.lattice, self.grid_points)
        cells = self.supercells if self.domain == "ring" else 1
        return RingDomain(cell, cells)

    def make_initial_state(self) -> ComplexState:
        return make_initial_state(self.initial, self.make_domain())

    def omega_grid(self) -> np.ndarray:
        if self.omega_start is None:
            raise ConfigError("configuration has no omega grid")
        count = int(math.floor((self.omega_stop - self.omega_start) / self.omega_step + 1e-9))
        return self.omega_start + self.omega_step * np.arange(count + 1)

    def as_dict(self) -> dict:
        spec = self.lattice
        initial: dict = {"kind": type(self.initial).__name__}
        if isinstance(self.initial, GaussianState):
            initial.update(sigma=self.initial.width, center=self.initial.center)
        return {
            "lattice": dataclasses.asdict(spec),
            "initial": initial,
            "domain": self.domain,
            "supercells": self.supercells,
            "grid_points": self.grid_points,
            "substeps": self.substeps,
            "horizon": self.horizon,
            "omega_start": self.omega_start,
            "omega_stop": self.omega_stop,
            "omega_step": self.omega_step,
            "outdir": self.outdir,
            "basis_size": self.basis_size,
            "refine_peaks": self.refine_peaks,
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_phase(token: str) -> float:
    token = token.strip()
    if token in ("pi", "+pi"):
        return math.pi
    if token == "-pi":
        return -math.pi
    if token.endswith("pi"):
        return float(token[:-2]) * math.pi
    return float(token)


def parse_config_text(text: str) -> dict:
    """Parse the flat key-value configuration format (``key = value`` lines,
    '#' comments); returns raw string values keyed by the documented names."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, _, val = line.partition(sep)
                break
        else:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = val.strip()
    return values


def config_from_values(values: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from raw key-value strings plus overrides."""
    merged = dict(values)
    for key, val in (overrides or {}).items():
        if val is not None:
            merged[key] = val

    def get(key, cast, default=None):
        if key not in merged or merged[key] in ("", None):
            return default
        try:
            return cast(merged[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {merged[key]!r}") from exc

    phases_raw = merged.get("phases", (0.0, math.pi, 0.0))
    if isinstance(phases_raw, str):
        phases = tuple(_parse_phase(tok) for tok in phases_raw.split(","))
    else:
        phases = tuple(float(p) for p in phases_raw)
    sites = get("np", int, len(phases))
    if sites != len(phases):
        raise ConfigError(
            f"np={sites} does not match the {len(phases)} supplied phases"
        )
    try:
        lattice = LatticeSpec(
            mass=get("mass", float, 1.0),
            hbar=get("hbar", float, 1.0),
            v0=get("v0", float, 1.0),
            delta=get("delta", float, 0.5),
            spacing=get("spacing", float, 10.0),
            amplitude=get("amplitude", float, 1.0),
            omega=get("omega", float, 1.0),
            phases=phases,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    domain = get("domain", str, "supercell")
    supercells = get("supercells", int, 16)
    sigma = get("sigma", float, 0.0)
    if sigma and sigma > 0:
        length = lattice.cell_length * (supercells if domain == "ring" else 1)
        default_center = math.floor(length / (2 * lattice.spacing)) * lattice.spacing
        initial = GaussianState(center=get("center", float, default_center), width=sigma)
    else:
        initial = UniformState()

    return ExperimentConfig(
        lattice=lattice,
        initial=initial,
        domain=domain,
        supercells=supercells,
        grid_points=get("grid_points", int, 480),
        substeps=get("substeps", int, None),
        horizon=get("horizon", int, 400),
        omega_start=get("omega_start", float, None),
        omega_stop=get("omega_stop", float, None),
        omega_step=get("omega_step", float, None),
        outdir=get("outdir", str, "out"),
        basis_size=get("basis_size", int, None),
        refine_peaks=bool(get("refine_peaks", int, 1)),
        workers=get("workers", int, 1),
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    return config_from_values(parse_config_text(Path(path).read_text()), overrides)


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepRecord:
    """Per-frequency summary; population fields are NaN in spectra-only sweeps."""

    omega: float
    n_max: float
    argmax_site: int
    argmax_m: int
    overlap: float
    eps_fgs: float
    gap: float
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SweepRecord, ...]
    failures: tuple[tuple[float, str], ...]
    config: ExperimentConfig

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _sweep_point(args) -> SweepRecord:
    config, omega, with_populations = args
    spec = replace(config.lattice, omega=float(omega))
    try:
        grid = SupercellGrid.for_spec(spec, config.grid_points)
        spectrum = labeled_spectrum(
            spec, 0.0, grid=grid, params=config.params_for(spec),
            basis_size=config.basis_size,
        )
        weights = np.abs(spectrum.overlaps(spectrum.uniform_reference())) ** 2
        eps = spectrum.quasienergies()
        gap = min(circle_gap(e, eps[0], spec) for e in eps[1:])
        n_max, arg_site, arg_m = math.nan, -1, -1
        if with_populations:
            ring = RingDomain(grid, 1)
            state = make_initial_state(config.initial, ring)
            dec = decompose(state, [spectrum])
            trace = population_trace(dec, range(config.horizon + 1))
            flat = int(np.argmax(trace.values))
            arg_site, arg_m = np.unravel_index(flat, trace.values.shape)
            n_max = float(trace.values[arg_site, arg_m])
            arg_site = int(trace.site_indices[arg_site])
            arg_m = int(trace.periods[arg_m])
        return SweepRecord(
            omega=float(omega), n_max=n_max, argmax_site=arg_site, argmax_m=arg_m,
            overlap=float(weights[0]), eps_fgs=float(eps[0]), gap=float(gap),
        )
    except (ValueError, ToleranceError) as exc:
        return SweepRecord(
            omega=float(omega), n_max=math.nan, argmax_site=-1, argmax_m=-1,
            overlap=math.nan, eps_fgs=math.nan, gap=math.nan, error=str(exc),
        )


def _run_points(config: ExperimentConfig, omegas, with_populations: bool):
    tasks = [(config, float(w), with_populations) for w in omegas]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def _refine_peaks(config: ExperimentConfig, records: list[SweepRecord]) -> list[SweepRecord]:
    """Bisect the grid around strong n_max peaks down to REFINE_MIN_STEP."""
    while True:
        records.sort(key=lambda r: r.omega)
        omegas = [r.omega for r in records]
        values = np.nan_to_num([r.n_max for r in records], nan=-1.0)
        peaks, _ = scipy.signal.find_peaks(values, prominence=PEAK_PROMINENCE)
        inserts = []
        for i in peaks:
            if values[i] < REFINE_ABOVE:
                continue
            for a, b in ((i - 1, i), (i, i + 1)):
                if omegas[b] - omegas[a] > REFINE_MIN_STEP:
                    inserts.append(0.5 * (omegas[a] + omegas[b]))
        if not inserts:
            return records
        records.extend(_run_points(config, inserts, True))


def run_nmax_sweep(config: ExperimentConfig) -> SweepResult:
    """Maximal site population within the horizon, per driving frequency.

    Runs on the single-supercell (kappa = 0) domain with the configured
    initial state; also records the ground-mode overlap, quasienergy and
    band gap from the same spectra.  Failed frequencies are recorded and
    skipped, never dropped.
    """
    if config.domain != "supercell":
        raise ConfigError("population sweeps run on the supercell (kappa = 0) domain")
    records = _run_points(config, config.omega_grid(), True)
    if config.refine_peaks:
        records = _refine_peaks(config, records)
    records.sort(key=lambda r: r.omega)
    failures = tuple((r.omega, r.error) for r in records if r.error)
    return SweepResult(records=tuple(records), failures=failures, config=config)


def run_overlap_sweep(config: ExperimentConfig) -> SweepResult:
    """Ground-mode uniform overlap (and gap) per frequency; no populations."""
    records = _run_points(config, config.omega_grid(), False)
    records.sort(key=lambda r: r.omega)
    failures = tuple((r.omega, r.error) for r in records if r.error)
    return SweepResult(records=tuple(records), failures=failures, config=config)


def run_evolution(
    config: ExperimentConfig,
    keep: int | None = None,
    bands: tuple[int, int] | None = None,
    method: str = "floquet",
):
    """Population trace of the configured initial state over the horizon.

    `keep` restricts the expansion to the most occupied bands, `bands`
    to an explicit (ground, excited) pair.  `method="direct"` integrates
    the ring directly instead of using the mode expansion.
    """
    spec = config.lattice
    state = config.make_initial_state()
    if method == "direct":
        if keep is not None or bands is not None:
            raise ConfigError("band truncations require the floquet method")
        return direct_population_trace(
            state, spec, config.params_for(spec), config.horizon
        )
    if method != "floquet":
        raise ConfigError(f"unknown evolution method {method!r}")
    spectra, _ = ring_spectra(
        spec, state.grid, params=config.params_for(spec), basis_size=config.basis_size
    )
    dec = decompose(state, spectra)
    if keep is not None:
        dec = truncate_modes(dec, keep)
    if bands is not None:
        dec = select_bands(dec, bands)
    return population_trace(dec, range(config.horizon + 1))


# ---------------------------------------------------------------------------
# dips and resonance reports

@dataclass(frozen=True)
class OverlapDip:
    omega: float
    depth: float
    prominence: float


def detect_overlap_dips(omegas, overlaps, prominence: float = DIP_PROMINENCE):
    """Local minima of the overlap curve with at least `prominence`,
    parabolic-refined on the sampling grid."""
    omegas = np.asarray(omegas, dtype=float)
    overlaps = np.asarray(overlaps, dtype=float)
    idx, props = scipy.signal.find_peaks(-overlaps, prominence=prominence)
    dips = []
    for rank, i in enumerate(idx):
        omega = parabolic_vertex(
            omegas[i - 1], omegas[i], omegas[i + 1],
            overlaps[i - 1], overlaps[i], overlaps[i + 1],
        )
        dips.append(
            OverlapDip(
                omega=omega,
                depth=float(overlaps[i]),
                prominence=float(props["prominences"][rank]),
            )
        )
    return tuple(dips)


@dataclass(frozen=True)
class ResonanceRow:
    prediction: ResonancePrediction
    nearest_dip: float      # NaN when no dip was detected in range
    residual: float


def pair_resonances(
    lattice: LatticeSpec,
    omegas,
    overlaps,
    alpha_max: int = 20,
    max_folds: int = 2,
    prominence: float = DIP_PROMINENCE,
) -> tuple[ResonanceRow, ...]:
    """Pair each predicted resonance inside the sampled window with the
    nearest detected overlap dip."""
    omegas = np.asarray(omegas, dtype=float)
    overlaps = np.asarray(overlaps, dtype=float)
    if omegas.size == 0:
        raise ConfigError("no sweep data to report on")
    good = ~np.isnan(overlaps)
    dips = detect_overlap_dips(omegas[good], overlaps[good], prominence)
    rows = []
    for pred in predict_resonances(lattice, alpha_max, max_folds):
        if not (omegas.min() <= pred.omega <= omegas.max()):
            continue
        if dips:
            nearest = min(dips, key=lambda d: abs(d.omega - pred.omega))
            rows.append(
                ResonanceRow(pred, nearest.omega, abs(nearest.omega - pred.omega))
            )
        else:
            rows.append(ResonanceRow(pred, math.nan, math.nan))
    return tuple(rows)


def report_resonances(
    sweep: SweepResult,
    alpha_max: int = 20,
    max_folds: int = 2,
    prominence: float = DIP_PROMINENCE,
) -> tuple[ResonanceRow, ...]:
    if not sweep.records:
        raise ConfigError("no sweep data to report on")
    return pair_resonances(
        sweep.config.lattice, sweep.column("omega"), sweep.column("overlap"),
        alpha_max, max_folds, prominence,
    )


# ---------------------------------------------------------------------------
# CSV emission

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _header_lines(config: ExperimentConfig, kind: str) -> list[str]:
    lines = [
        f"# driven-lattice {__version__} {kind}",
        f"# config_hash: {config.config_hash()}",
    ]
    for key, value in sorted(config.as_dict().items()):
        lines.append(f"# {key}: {value}")
    return lines


def _write_csv(path: Path, config: ExperimentConfig, kind: str,
               columns: list[str], rows, failures=()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = _header_lines(config, kind)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "kind": kind,
        "version": __version__,
        "config_hash": config.config_hash(),
        "config": config.as_dict(),
        "failures": [{"omega": w, "error": e} for w, e in failures],
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True, default=str) + "\n",
        encoding="utf-8",
    )
    return path


def write_evolution_csv(path, config: ExperimentConfig, trace) -> Path:
    period = config.lattice.period
    rows = (
        (int(m), m * period, int(s), trace.values[i, j])
        for j, m in enumerate(trace.periods)
        for i, s in enumerate(trace.site_indices)
    )
    return _write_csv(path, config, "evolve", ["m", "t", "s", "n_s"], rows)


def write_sweep_csv(path, sweep: SweepResult) -> Path:
    rows = (
        (r.omega, r.n_max, r.argmax_site, r.argmax_m, r.overlap, r.eps_fgs, r.gap)
        for r in sweep.records
    )
    return _write_csv(
        path, sweep.config, "sweep",
        ["omega", "n_max", "argmax_site", "argmax_m", "overlap", "eps_fgs", "gap"],
        rows, failures=sweep.failures,
    )


def write_modes_csv(path, config: ExperimentConfig, spectrum: FloquetSpectrum,
                    count: int = REPORTED_MODES) -> Path:
    """Sampled mode profiles; only the best-converged (lowest mean kinetic
    energy) `count` modes are reported."""
    kinetic = spectrum.mean_kinetic()
    keep = sorted(np.argsort(kinetic, kind="stable")[:count])
    x = spectrum.grid.positions()
    rows = (
        (spectrum.kappa, int(i), spectrum.modes[i].quasienergy,
         x[j], mode.state.psi[j].real, mode.state.psi[j].imag)
        for i in keep
        for mode in (spectrum.modes[i],)
        for j in range(spectrum.grid.points)
    )
    return _write_csv(
        path, config, "modes",
        ["kappa", "alpha", "eps", "x", "re_phi", "im_phi"], rows,
    )


def write_resonances_csv(path, config: ExperimentConfig, rows) -> Path:
    data = (
        (r.prediction.band_index, r.prediction.fold_count, r.prediction.omega,
         r.nearest_dip, r.residual)
        for r in rows
    )
    return _write_csv(
        path, config, "resonances",
        ["alpha", "n", "omega_res", "nearest_dip", "residual"], data,
    )


def read_sweep_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """(omega, overlap) columns back from a sweep CSV."""
    omegas, overlaps = [], []
    with open(path, encoding="utf-8") as handle:
        header = None
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            row = dict(zip(header, line.split(",")))
            omegas.append(float(row["omega"]))
            overlaps.append(float(row["overlap"]))
    if not omegas:
        raise ConfigError(f"no sweep records found in {path}")
    return np.array(omegas), np.array(overlaps)


def output_path(config: ExperimentConfig, name: str) -> Path:
    return Path(os.path.expanduser(config.outdir)) / name
