"""Config-driven experiment runner: JSON recipe in, CSV records + manifest out.

Unit convention in configs: every physical rate/frequency may be written as a
bare number (already rad/us) or as {"value": v, "two_pi": true|false}; with
two_pi=true the value is interpreted as v MHz quoted "X/2pi = v MHz", i.e.
X = 2*pi*v rad/us. Grid values follow the same flag as their base parameter.

Exit codes: 0 success, 2 config error, 3 resource refusal,
4 numerical-tolerance breach.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import gates, noise, protocols
from .dynamics import StiffSegment, ToleranceBreach
from .model import GateConfig, Schedule

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4

CONFIG_VERSION = 1
DEFAULT_CEILING_BYTES = 8 * 1024**3

KINDS = (
    "gate_fidelity_sweep",
    "decoherence_sweep",
    "noise_stochastic",
    "noise_systematic",
    "switch_demo",
    "combined_fig4",
    "cat_prep",
    "single_qubit",
)

METRIC_COLUMNS = ("t_g", "f_avg", "f_out", "p_c", "chi_residual", "beta_total",
                  "runtime_s", "seed")

_TWO_PI_PARAMS = ("kerr", "j_coupling", "delta", "omega_p")
_RATE_PARAMS = ("kappa", "gamma", "kappa0", "gamma0")


class ConfigError(ValueError):
    """Malformed experiment configuration."""


def _resolve_value(entry, key: str) -> float:
    """Bare number, or {"value": v, "two_pi": bool} -> rad/us."""
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return float(entry)
    if isinstance(entry, dict):
        try:
            v = float(entry["value"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number in 'value'") from None
        return 2.0 * np.pi * v if entry.get("two_pi", False) else v
    raise ConfigError(f"{key}: expected a number or {{value, two_pi}} object")


def _two_pi_flag(entry) -> bool:
    return isinstance(entry, dict) and bool(entry.get("two_pi", False))


@dataclass
class ExperimentSpec:
    kind: str
    mode: str
    output: str
    raw: dict
    grid: dict[str, list] = field(default_factory=dict)
    seed: int = 0
    ceiling_bytes: int = DEFAULT_CEILING_BYTES

    @property
    def grid_keys(self) -> list[str]:
        return sorted(self.grid)

    def grid_points(self):
        keys = self.grid_keys
        if not keys:
            return
        for combo in product(*(self.grid[k] for k in keys)):
            yield dict(zip(keys, combo))


def load_spec(path: str | Path, mode_override: str | None = None,
              seed_override: int | None = None) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"{path}: missing or unsupported 'version' (expected {CONFIG_VERSION})")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{path}: unknown kind {kind!r}; expected one of {KINDS}")
    mode = mode_override or doc.get("mode", "full")
    if mode not in ("full", "effective"):
        raise ConfigError(f"{path}: mode must be 'full' or 'effective'")
    grid = doc.get("grid", {})
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ConfigError(f"{path}: 'grid' must map parameter names to lists")
    seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)
    spec = ExperimentSpec(
        kind=kind,
        mode=mode,
        output=doc.get("output", f"{kind}.csv"),
        raw=doc,
        grid={k: list(v) for k, v in grid.items()},
        seed=seed,
        ceiling_bytes=int(doc.get("resource_ceiling_bytes", DEFAULT_CEILING_BYTES)),
    )
    # kind-specific sanity checks happen while building the base config
    if kind not in ("cat_prep", "single_qubit"):
        build_gate_config(spec)
    if kind == "combined_fig4" and mode == "full":
        cfg = build_gate_config(spec)
        if cfg.n_qubits > 2:
            raise ConfigError(
                f"{path}: combined_fig4 in full mode is limited to n_qubits <= 2"
            )
    return spec


def build_gate_config(spec: ExperimentSpec, overrides: dict | None = None) -> GateConfig:
    c = spec.raw.get("config")
    if not isinstance(c, dict):
        raise ConfigError("'config' section is required and must be an object")
    overrides = dict(overrides or {})
    # joint sweep alias: one grid key driving both bus decay and bus dephasing
    if "bus_rate" in overrides:
        v = float(overrides.pop("bus_rate"))
        overrides["kappa0"] = v
        overrides["gamma0"] = v

    def get(key, default=None):
        if key in overrides:
            base = c.get(key)
            if key in _TWO_PI_PARAMS and _two_pi_flag(base):
                return 2.0 * np.pi * float(overrides[key])
            return float(overrides[key])
        if key in c:
            return _resolve_value(c[key], key)
        return default

    try:
        n_qubits = int(overrides.get("n_qubits", c.get("n_qubits", 2)))
        kerr = get("kerr")
        j = get("j_coupling")
        if kerr is None or j is None:
            raise ConfigError("config requires 'kerr' and 'j_coupling'")
        m_loops = int(c.get("m_loops", 1))
        kw = dict(
            kappa=get("kappa", 0.0),
            gamma=get("gamma", 0.0),
            kappa0=get("kappa0", 0.0),
            gamma0=get("gamma0", 0.0),
            bus_dim=int(c.get("bus_dim", 10)),
            kpo_dim=int(c.get("kpo_dim", 25)),
        )
        if c.get("kpo_levels") is not None:
            kw["kpo_levels"] = int(c["kpo_levels"])
        if "alpha" in c or "alpha" in overrides:
            alpha = float(overrides.get("alpha", c.get("alpha")))
            delta = get("delta")
            return GateConfig.from_alpha(
                n_qubits, kerr, alpha, j, m_loops=m_loops, delta=delta, **kw
            )
        omega_p = get("omega_p")
        delta = get("delta")
        if omega_p is None or delta is None:
            raise ConfigError("config requires 'alpha' or both 'omega_p' and 'delta'")
        return GateConfig(
            n_qubits=n_qubits, kerr=kerr, omega_p=omega_p, j_coupling=j,
            delta=delta, m_loops=m_loops, **kw
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from None


# --- resource accounting --------------------------------------------------------


@dataclass(frozen=True)
class ResourceEstimate:
    bytes_required: int
    est_steps: int
    density: bool


def estimate_resources(spec: ExperimentSpec) -> ResourceEstimate:
    """State-storage estimate for the largest grid point (complex128 entries)."""
    if spec.kind == "cat_prep":
        dim = int(spec.raw.get("config", {}).get("dim", 30))
        c = spec.raw.get("config", {})
        density = _resolve_value(c.get("kappa", 0.0), "kappa") > 0 or _resolve_value(
            c.get("gamma", 0.0), "gamma"
        ) > 0
        n = dim * dim if density else dim
        return ResourceEstimate(n * 16, 2000, density)
    if spec.kind == "single_qubit":
        dim = int(spec.raw.get("config", {}).get("dim", 40))
        return ResourceEstimate(dim * 16 * 2, 500_000, False)
    cfg = build_gate_config(spec)
    dim = cfg.qubit_space.dim if spec.mode == "effective" else cfg.space.dim
    density = any(r > 0 for r in (cfg.kappa, cfg.gamma, cfg.kappa0, cfg.gamma0))
    entries = dim * dim if density else dim
    steps = 6000 if density else 2000
    return ResourceEstimate(entries * 16, steps, density)


# --- per-kind record computation ----------------------------------------------


def _base_record(point: dict, seed: int) -> dict:
    rec = dict(point)
    rec.update({k: "" for k in METRIC_COLUMNS})
    rec["seed"] = seed
    return rec


def _gate_metrics(rec: dict, result) -> dict:
    rec["t_g"] = result.t_end
    if result.f_avg is not None:
        rec["f_avg"] = result.f_avg
    if result.f_out is not None:
        rec["f_out"] = result.f_out
    if result.p_c is not None:
        rec["p_c"] = result.p_c
    rec["chi_residual"] = result.chi_residual
    rec["beta_total"] = result.beta_total
    return rec


def compute_record(spec: ExperimentSpec, point: dict) -> dict:
    t_start = time.perf_counter()
    rec = _base_record(point, spec.seed)
    kind = spec.kind

    if kind in ("gate_fidelity_sweep", "decoherence_sweep"):
        cfg = build_gate_config(spec, point)
        res = gates.run_gate(cfg, mode=spec.mode)
        _gate_metrics(rec, res)

    elif kind == "noise_stochastic":
        n = spec.raw.get("noise", {})
        eps_s = float(point.get("eps_s", n.get("eps_s", 0.0)))
        seed = int(point.get("seed", spec.seed))
        ns = noise.StochasticNoiseSpec(
            eps_s=eps_s, seed=seed, n_events=int(n.get("n_events", 1000)),
            targets=tuple(n.get("targets", ["J"])),
        )
        cfg = build_gate_config(spec, {k: v for k, v in point.items()
                                       if k not in ("eps_s", "seed")})
        sched = noise.noisy_schedule(cfg, ns, gates.gate_time(cfg))
        res = gates.run_gate(cfg, schedule=sched, mode=spec.mode)
        _gate_metrics(rec, res)
        rec["seed"] = seed

    elif kind == "noise_systematic":
        n = spec.raw.get("noise", {})
        targets = {k: int(v) for k, v in n.get("targets", {"t_g": -1}).items()}
        eps_a = float(point.get("eps_a", n.get("eps_a", 0.0)))
        cfg = build_gate_config(spec, {k: v for k, v in point.items() if k != "eps_a"})
        if eps_a != 0.0:
            cfg = noise.apply_systematic(cfg, noise.SystematicNoiseSpec(eps_a, targets))
        res = gates.run_gate(cfg, mode=spec.mode)
        _gate_metrics(rec, res)

    elif kind == "switch_demo":
        eps_a = float(point.get("eps_a", 0.05))
        scheme = point.get("scheme", "switched")
        cfg = build_gate_config(spec, {k: v for k, v in point.items()
                                       if k not in ("eps_a", "scheme")})
        if scheme == "fixed":
            run_cfg = cfg.replace(t_gate_factor=1.0 - eps_a)
            res = gates.run_gate(run_cfg, mode=spec.mode)
        else:
            plan = gates.plan_detuning_switch(
                cfg, eps_a, int(spec.raw.get("switch", {}).get("m_after", 1))
            )
            sched = plan.to_schedule(cfg.j_coupling)
            # a -eps_a gate-time error stops the run exactly at the switch time
            run_cfg = cfg.replace(
                delta=plan.delta_before, t_gate_factor=plan.tau / plan.t_total
            )
            res = gates.run_gate(run_cfg, schedule=sched, mode=spec.mode)
        _gate_metrics(rec, res)

    elif kind == "combined_fig4":
        n = spec.raw.get("noise", {})
        eps_a = float(point.get("eps_a", n.get("eps_a", 0.05)))
        cfg = build_gate_config(spec, {k: v for k, v in point.items() if k != "eps_a"})
        plan = gates.plan_detuning_switch(
            cfg, eps_a, int(spec.raw.get("switch", {}).get("m_after", 1))
        )
        sched = plan.to_schedule(cfg.j_coupling)
        sys_spec = noise.SystematicNoiseSpec(eps_a, {"J": -1, "delta": -1})
        sched = noise.perturb_schedule(sched, sys_spec)
        run_cfg = cfg.replace(
            j_coupling=cfg.j_coupling * (1.0 - eps_a),
            delta=plan.delta_before * (1.0 - eps_a),
            t_gate_factor=plan.tau / plan.t_total,
        )
        res = gates.run_gate(run_cfg, schedule=sched, mode=spec.mode)
        _gate_metrics(rec, res)

    elif kind == "cat_prep":
        c = spec.raw.get("config", {})
        kerr = _resolve_value(c.get("kerr", 1.0), "kerr")
        res = protocols.run_cat_prep(
            kerr,
            float(point.get("alpha", c.get("alpha", 2.0))),
            float(point.get("t0", c.get("t0", 1.7))),
            initial_fock=int(point.get("initial_fock", c.get("initial_fock", 0))),
            kappa=_resolve_value(c.get("kappa", 0.0), "kappa"),
            gamma=_resolve_value(c.get("gamma", 0.0), "gamma"),
            dim=int(c.get("dim", 30)),
        )
        rec["f_out"] = res.fidelity
        rec["p_c"] = res.margin

    elif kind == "single_qubit":
        c = spec.raw.get("config", {})
        kerr = _resolve_value(c.get("kerr", 1.0), "kerr")
        alpha = float(c.get("alpha", 2.0))
        t_gate = float(point.get("t_gate", c.get("t_gate", 5.0 / kerr)))
        use_h_add = bool(point.get("use_h_add", c.get("use_h_add", False)))
        params = protocols.design_single_qubit_drive(
            str(point.get("target", c.get("target", "hadamard"))), alpha, t_gate,
            use_h_add,
        )
        res = protocols.run_single_qubit_gate(
            kerr, kerr * alpha**2, params, use_h_add=use_h_add, t_gate=t_gate,
            dim=int(c.get("dim", 40)),
        )
        rec["t_g"] = t_gate
        rec["f_avg"] = res.fidelity

    else:  # pragma: no cover - load_spec already validated the kind
        raise ConfigError(f"unhandled kind {kind!r}")

    rec["runtime_s"] = round(time.perf_counter() - t_start, 6)
    return rec


def _record_sort_key(spec: ExperimentSpec, rec: dict):
    return tuple(str(rec.get(k, "")) for k in spec.grid_keys)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> list[dict]:
    points = list(spec.grid_points())
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(compute_record, [spec] * len(points), points))
    else:
        records = [compute_record(spec, p) for p in points]
    records.sort(key=lambda r: _record_sort_key(spec, r))
    return records


def write_outputs(spec: ExperimentSpec, records: list[dict], out_dir: str | Path,
                  wall_time_s: float) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / spec.output
    columns = spec.grid_keys + [c for c in METRIC_COLUMNS if c not in spec.grid_keys]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_fmt(rec.get(c, "")) for c in columns])

    import scipy

    from . import __version__

    manifest = {
        "config": spec.raw,
        "kind": spec.kind,
        "mode": spec.mode,
        "seed": spec.seed,
        "rng_algorithm": noise.RNG_ALGORITHM,
        "n_records": len(records),
        "wall_time_s": round(wall_time_s, 3),
        "versions": {
            "package": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    with open(csv_path.with_suffix(".manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def run(config_path: str, out_dir: str, workers: int = 1,
        seed_override: int | None = None, mode_override: str | None = None) -> int:
    t0 = time.perf_counter()
    try:
        spec = load_spec(config_path, mode_override, seed_override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        est = estimate_resources(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if est.density and est.bytes_required > spec.ceiling_bytes:
        print(
            "resource refusal: density-matrix run needs "
            f"{est.bytes_required} bytes (> ceiling {spec.ceiling_bytes})",
            file=sys.stderr,
        )
        return EXIT_RESOURCE
    try:
        records = run_experiment(spec, workers)
    except (ToleranceBreach, StiffSegment) as exc:
        print(f"numerical tolerance breach: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    csv_path = write_outputs(spec, records, out_dir, time.perf_counter() - t0)
    print(f"wrote {len(records)} records to {csv_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Run a cat-qubit gate experiment recipe (JSON in, CSV out).",
    )
    parser.add_argument("--config", required=True, help="path to the JSON recipe")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--mode", choices=["full", "effective"], default=None)
    args = parser.parse_args(argv)
    return run(args.config, args.out, args.workers, args.seed, args.mode)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
