"""
Scenario pipelines behind the command line.

Each scenario writes CSV tables (17 significant digits, '.' separator,
'\\n' line endings) and a ``manifest.json`` with checksums. Sweep points that
fail are kept as rows with an ``error`` entry; the run then reports partial
failure through its exit status.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .config import ScenarioConfig, grid_values, parse_state_label
from .correlations import PAIRS, antibunched_pair_window, bundle_g2_delayed, steady_correlations
from .entanglement import witness_report
from .errors import NrBundleError
from .hilbert import SpaceDescriptor, StateVector, basis_state, number_operator
from .liouvillian import evolve_closed, evolve_open, model_liouvillian, steady_state
from .model import (PAIR_LABELS, ModelParams, build_hamiltonian, dressed_ket, dressed_states, refine_resonance,
                    resonance_detuning, resonance_residual)
from .trajectories import BUNDLE_PAIRS, CHANNELS, ensemble_from_liouvillian, run_liouvillian_trajectory

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2

# column schemas, pinned by golden tests
RESONANCE_COLUMNS = ["kind", "drive_side", "delta_ad", "residual", "refined_delta_ad", "gap"]
SPECTRUM_COLUMNS = ["drive_side", "delta_ad", "photon", "phonon", "magnon", "error"]
CORRELATION_COLUMNS = ["kappa", "drive_side", "g1_ab", "g2_ab", "g1_am", "g2_am", "flags", "error"]
DELAYED_COLUMNS = ["kappa", "drive_side", "pair", "tau", "g2"]
WITNESS_COLUMNS = ["kappa", "drive_side", "D1_ab", "D1_abs", "D1_am", "D1_ams", "error"]
JUMP_COLUMNS = ["drive_side", "seed", "time", "channel"]
DELAY_COLUMNS = ["drive_side", "pair", "kind", "delay"]
WITNESS_PARTITIONS = ("ab", "abs", "am", "ams")
TRACKED_LABELS = tuple(f"{a}{b}{m}{s}" for s in "+-" for a in (0, 1) for b in (0, 1) for m in (0, 1))
OCCUPATIONS = ("photon", "phonon", "magnon")


def dynamics_columns() -> list[str]:
    return ["drive_side", "t"] + [f"P_{k}" for k in TRACKED_LABELS] + list(OCCUPATIONS)


def ensemble_columns() -> list[str]:
    cols = ["drive_side", "t"]
    for c in CHANNELS:
        cols += [f"{c}_mean", f"{c}_stderr"]
    return cols


# ------------------------------------------------------------------ output

def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return "" if value is None else str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
            count += 1
    return count


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    scenario: str
    config_sha256: str
    code_version: str
    outputs: dict[str, dict] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    failed_points: int = 0
    status: str = "ok"
    schema_version: int = SCHEMA_VERSION

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "partial": EXIT_PARTIAL}.get(self.status, EXIT_FATAL)

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "config_sha256": self.config_sha256,
            "code_version": self.code_version,
            "status": self.status,
            "failed_points": self.failed_points,
            "outputs": self.outputs,
            "timings": self.timings,
        }


class _Writer:
    def __init__(self, out_dir: Path, manifest: RunManifest):
        self.out_dir = out_dir
        self.manifest = manifest

    def table(self, name: str, columns: Sequence[str], rows: Iterable[dict]):
        path = self.out_dir / name
        n = write_csv(path, columns, rows)
        self.manifest.outputs[name] = {"sha256": _sha256(path), "rows": n, "columns": list(columns)}

    def json(self, name: str, payload):
        path = self.out_dir / name
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        self.manifest.outputs[name] = {"sha256": _sha256(path)}


# ---------------------------------------------------------------- helpers

def _pool_map(fn: Callable, items: list, workers: int) -> list:
    """Map in order; results come back in input order whatever the completion order."""
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def operating_params(config: ScenarioConfig, drive_side: str) -> ModelParams:
    """Model parameters for one drive side, with delta_ad pinned to the operating point if one is set."""
    params = config.params(drive_side)
    op = config.operating_point
    if op is None:
        return params
    reference = params.with_side(op.drive_side.value)
    if op.refine:
        delta = refine_resonance(op.resonance, op.drive_side.value, reference, config.cutoffs.space()).delta_ad
    else:
        delta = resonance_detuning(op.resonance, op.drive_side.value, reference)
    return params.replace(delta_ad=delta)


def initial_state(config: ScenarioConfig, params: ModelParams, space: SpaceDescriptor) -> StateVector:
    atom, n_a, n_b, n_m = parse_state_label(config.initial_state)
    if atom in "+-":
        return dressed_ket(space, dressed_states(params.delta_sigma_d, params.xi), n_a, n_b, n_m, atom)
    return basis_state(space, 0 if atom == "g" else 1, n_a, n_b, n_m)


def _tracked_kets(params: ModelParams, space: SpaceDescriptor) -> dict[str, np.ndarray]:
    pair = dressed_states(params.delta_sigma_d, params.xi)
    return {label: dressed_ket(space, pair, int(label[0]), int(label[1]), int(label[2]), label[3]).amplitudes
            for label in TRACKED_LABELS}


def _dynamics_rows(side: str, times, states, kets, space) -> list[dict]:
    numbers = {m: number_operator(space, m).matrix for m in OCCUPATIONS}
    rows = []
    for t, s in zip(times, states):
        row = {"drive_side": side, "t": t}
        if isinstance(s, StateVector):
            psi = s.amplitudes
            for label, k in kets.items():
                row[f"P_{label}"] = abs(np.vdot(k, psi)) ** 2
            for m, n in numbers.items():
                row[m] = np.real(np.vdot(psi, n @ psi))
        else:
            rho = s.matrix
            for label, k in kets.items():
                row[f"P_{label}"] = np.real(np.vdot(k, rho @ k))
            for m, n in numbers.items():
                row[m] = np.real(np.sum(n.toarray().T * rho))
        rows.append(row)
    return rows


# --------------------------------------------------------------- scenarios

def _resonance_table(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    rows = []
    failed = 0
    for kind in PAIR_LABELS:
        for side in ("left", "right"):
            params = config.params(side)
            row = {"kind": kind, "drive_side": side}
            try:
                delta = resonance_detuning(kind, side, params)
                refined = refine_resonance(kind, side, params, space)
                row.update(delta_ad=delta, residual=resonance_residual(kind, side, params, delta),
                           refined_delta_ad=refined.delta_ad, gap=refined.gap)
            except NrBundleError as exc:
                log.warning("resonance %s/%s failed: %s", kind, side, exc)
                failed += 1
            rows.append(row)
    w.table("resonances.csv", RESONANCE_COLUMNS, rows)
    return failed


def _spectrum_point(args):
    params, space, method = args
    try:
        rho = steady_state(model_liouvillian(params, space), method=method)
    except NrBundleError as exc:
        return None, str(exc)
    return {m: float(np.real(np.sum(number_operator(space, m).matrix.toarray().T * rho.matrix)))
            for m in OCCUPATIONS}, ""


def _spectrum(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    grid = grid_values(config.grids.detuning)
    tasks, keys = [], []
    for side in config.drive_sides:
        base = config.params(side.value)
        for d in grid:
            tasks.append((base.replace(delta_ad=float(d)), space, config.solver.method))
            keys.append((side.value, float(d)))
    results = _pool_map(_spectrum_point, tasks, workers)
    rows = []
    failed = 0
    for (side, d), (occ, err) in zip(keys, results):
        row = {"drive_side": side, "delta_ad": d, "error": err}
        if occ is None:
            failed += 1
        else:
            row.update(occ)
        rows.append(row)
    w.table("spectrum.csv", SPECTRUM_COLUMNS, rows)
    return failed


def _closed_dynamics(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    times = grid_values(config.grids.time)
    rows = []
    for side in config.drive_sides:
        params = operating_params(config, side.value)
        psi0 = initial_state(config, params, space)
        rec = evolve_closed(psi0, build_hamiltonian(params, space), times)
        rows += _dynamics_rows(side.value, times, rec.states, _tracked_kets(params, space), space)
    w.table("closed_dynamics.csv", dynamics_columns(), rows)
    return 0


def _open_dynamics(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    times = grid_values(config.grids.time)
    rows = []
    for side in config.drive_sides:
        params = operating_params(config, side.value)
        psi0 = initial_state(config, params, space)
        rec = evolve_open(psi0.density(), model_liouvillian(params, space), times, rtol=config.solver.rtol)
        rows += _dynamics_rows(side.value, times, rec.states, _tracked_kets(params, space), space)
    w.table("open_dynamics.csv", dynamics_columns(), rows)
    return 0


def _trajectory(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    times = grid_values(config.grids.time)
    pop_rows, jump_rows, ens_rows, delay_rows = [], [], [], []
    for side in config.drive_sides:
        params = operating_params(config, side.value)
        L = model_liouvillian(params, space)
        psi0 = initial_state(config, params, space)
        rec = run_liouvillian_trajectory(L, psi0, times, config.seed)
        pop_rows += _dynamics_rows(side.value, times, rec.states, _tracked_kets(params, space), space)
        if config.trajectories == 1:
            jump_rows += [{"drive_side": side.value, "seed": rec.seed, "time": t, "channel": c} for t, c in rec.jumps]
            continue
        summary = ensemble_from_liouvillian(L, psi0, times, config.trajectories, config.seed, workers=workers)
        for i, t in enumerate(times):
            row = {"drive_side": side.value, "t": t}
            for c in CHANNELS:
                row[f"{c}_mean"] = summary.means[c][i]
                row[f"{c}_stderr"] = summary.stderr[c][i]
            ens_rows.append(row)
        for pair in BUNDLE_PAIRS:
            stats = summary.delays[pair]
            delay_rows += [{"drive_side": side.value, "pair": pair, "kind": "intra", "delay": d} for d in stats.intra]
            delay_rows += [{"drive_side": side.value, "pair": pair, "kind": "inter", "delay": d} for d in stats.inter]
        for seed, jumps in zip(summary.seeds, summary.jumps):
            jump_rows += [{"drive_side": side.value, "seed": seed, "time": t, "channel": c} for t, c in jumps]
    w.table("trajectory.csv", dynamics_columns(), pop_rows)
    w.table("jumps.csv", JUMP_COLUMNS, jump_rows)
    if config.trajectories > 1:
        w.table("ensemble.csv", ensemble_columns(), ens_rows)
        w.table("delays.csv", DELAY_COLUMNS, delay_rows)
    return 0


def _correlation_point(args):
    params, space, tau = args
    try:
        out = steady_correlations(params, space)
    except NrBundleError as exc:
        return None, [], str(exc)
    delayed = []
    if tau is not None:
        L = model_liouvillian(params, space)
        for pair in PAIRS:
            try:
                res = bundle_g2_delayed(L, out["rho"], pair, tau)
            except NrBundleError as exc:
                log.warning("delayed g2 for %s failed: %s", pair, exc)
                continue
            delayed += [(pair, t, v) for t, v in zip(res.tau, res.values)]
    out.pop("rho")
    return out, delayed, ""


def _correlation_sweep(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    kappas = grid_values(config.grids.kappa)
    tau = grid_values(config.grids.tau) if config.grids.tau is not None else None
    tasks, keys = [], []
    for side in config.drive_sides:
        base = operating_params(config, side.value)
        for k in kappas:
            tasks.append((base.with_kappa(float(k)), space, tau))
            keys.append((float(k), side.value))
    results = _pool_map(_correlation_point, tasks, workers)
    rows, delayed_rows = [], []
    failed = 0
    for (k, side), (out, delayed, err) in zip(keys, results):
        row = {"kappa": k, "drive_side": side, "error": err}
        if out is None:
            failed += 1
        else:
            row.update({c: out[c] for c in ("g1_ab", "g2_ab", "g1_am", "g2_am")})
            row["flags"] = ";".join(f"{p}_pair_window" for p in PAIRS
                                    if antibunched_pair_window(out[f"g1_{p}"], out[f"g2_{p}"]))
        rows.append(row)
        delayed_rows += [{"kappa": k, "drive_side": side, "pair": p, "tau": t, "g2": v} for p, t, v in delayed]
    w.table("correlations.csv", CORRELATION_COLUMNS, rows)
    if tau is not None:
        w.table("g2_delayed.csv", DELAYED_COLUMNS, delayed_rows)
    return failed


def _witness_point(args):
    params, space, method = args
    try:
        rho = steady_state(model_liouvillian(params, space), method=method)
        return {p: witness_report(rho, p).to_json() for p in WITNESS_PARTITIONS}, ""
    except NrBundleError as exc:
        return None, str(exc)


def _witness_sweep(config: ScenarioConfig, w: _Writer, workers: int) -> int:
    space = config.cutoffs.space()
    kappas = grid_values(config.grids.kappa)
    tasks, keys = [], []
    for side in config.drive_sides:
        base = operating_params(config, side.value)
        for k in kappas:
            tasks.append((base.with_kappa(float(k)), space, config.solver.method))
            keys.append((float(k), side.value))
    results = _pool_map(_witness_point, tasks, workers)
    rows, reports = [], []
    failed = 0
    for (k, side), (rep, err) in zip(keys, results):
        row = {"kappa": k, "drive_side": side, "error": err}
        if rep is None:
            failed += 1
        else:
            for p in WITNESS_PARTITIONS:
                row[f"D1_{p}"] = rep[p]["quantities"]["D1"]
            reports.append({"kappa": k, "drive_side": side, "reports": rep})
        rows.append(row)
    w.table("witness.csv", WITNESS_COLUMNS, rows)
    w.json("witness_matrices.json", reports)
    return failed


PIPELINES = {
    "resonance_table": _resonance_table,
    "spectrum": _spectrum,
    "closed_dynamics": _closed_dynamics,
    "open_dynamics": _open_dynamics,
    "trajectory": _trajectory,
    "correlation_sweep": _correlation_sweep,
    "witness_sweep": _witness_sweep,
}


def run_scenario(config: ScenarioConfig, out_dir: str | Path, workers: int = 1) -> RunManifest:
    """
    Execute ``config`` and write its tables plus ``manifest.json`` into ``out_dir``.

    Per-point failures set the status to "partial"; setup failures propagate.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config.scenario, config.sha256(), __version__)
    start = time.perf_counter()
    failed = PIPELINES[config.scenario](config, _Writer(out, manifest), max(1, int(workers)))
    manifest.timings["total_seconds"] = time.perf_counter() - start
    manifest.failed_points = failed
    manifest.status = "ok" if failed == 0 else "partial"
    (out / "manifest.json").write_text(json.dumps(manifest.to_json(), indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return manifest
