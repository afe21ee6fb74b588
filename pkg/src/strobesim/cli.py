"""Config-driven experiment runner.

Subcommands: ``run <config>`` evolves the configured trajectories and
writes per-run CSVs, ``bound <config>`` prints a closed-form error report
as JSON, ``validate <config>`` compares TCL-2 against the exact
mode-truncated oracle, ``kernel <config>`` exports the tabulated bath
kernel, ``presets list`` names the shipped experiment configs. A config
argument is either a JSON file path or a preset name. Exit codes:
0 success, 2 config error, 3 numerical abort. STROBE_OUT overrides the
output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import bath as bath_mod
from . import bounds as bounds_mod
from . import models as models_mod
from . import oracle as oracle_mod
from . import tcl2


class ConfigError(ValueError):
    """Config file violates the schema; message names the offending field."""


class _Section:
    def __init__(self, data: dict, name: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{name}: expected an object")
        self.data = dict(data)
        self.name = name

    def get(self, key, default=None, required=False, types=None):
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.name}.{key}: missing required field")
            return default
        val = self.data[key]
        if types is not None and not isinstance(val, types):
            raise ConfigError(f"{self.name}.{key}: expected {types}, got {type(val).__name__}")
        return val


@dataclass
class ExperimentConfig:
    experiment_id: str
    units: str                        # "dimensionless" | "dimensional"
    model: dict
    schedule: dict
    bath: dict
    run: dict
    output: dict
    bound: dict = None
    oracle: dict = None
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "experiment_id": self.experiment_id,
            "units": self.units,
            "model": self.model,
            "schedule": self.schedule,
            "bath": self.bath,
            "run": self.run,
            "output": self.output,
        }
        if self.bound is not None:
            out["bound"] = self.bound
        if self.oracle is not None:
            out["oracle"] = self.oracle
        return out


_MODEL_TYPES = ("toric_vertex", "five_qubit")
_DEFAULT_STATES = {"toric_vertex": "ghz", "five_qubit": "logical0"}


def parse_config(path_or_dict) -> ExperimentConfig:
    """Load and validate an experiment config (path, preset name, or dict)."""
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
    else:
        p = Path(path_or_dict)
        if not p.exists():
            preset = _preset_path(str(path_or_dict))
            if preset is None:
                raise ConfigError(f"config {path_or_dict!r}: no such file or preset")
            p = preset
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root: expected an object")

    top = _Section(raw, "config")
    units = top.get("units", "dimensionless", types=str)
    if units not in ("dimensionless", "dimensional"):
        raise ConfigError(f"config.units: must be dimensionless or dimensional, got {units!r}")
    exp_id = top.get("experiment_id", required=True, types=str)

    model = _Section(raw.get("model", {}), "model")
    mtype = model.get("type", required=True, types=str)
    if mtype not in _MODEL_TYPES:
        raise ConfigError(f"model.type: unknown model {mtype!r}")
    if units == "dimensionless":
        model.get("epsilon", required=True, types=(int, float))
    else:
        if "omega" not in model.data and "gamma" not in model.data:
            raise ConfigError("model.omega (or model.gamma): required with dimensional units")

    sched = _Section(raw.get("schedule", {}), "schedule")
    if units == "dimensional":
        if "T" not in sched.data:
            raise ConfigError("schedule.T: required with dimensional units")
        if "tau_g" not in sched.data and "R" not in sched.data:
            raise ConfigError("schedule.tau_g (or schedule.R): required with dimensional units")
    else:
        sched.get("R", required=True)

    b = _Section(raw.get("bath", {}), "bath")
    family = b.get("family", "ohmic", types=str)
    if family not in ("ohmic", "discrete", "shifted_peak"):
        raise ConfigError(f"bath.family: unknown family {family!r}")
    if family == "ohmic":
        for key in (("eta_tilde", "x_c") if units == "dimensionless" else ("eta", "nu_c")):
            if key not in b.data:
                raise ConfigError(f"bath.{key}: required for the ohmic family "
                                  f"with {units} units")

    run = _Section(raw.get("run", {}), "run")
    if "n_cycles" not in run.data and "t_max" not in run.data:
        raise ConfigError("run.n_cycles (or run.t_max): required")
    which = run.get("evolve", ["tar", "sim"], types=list)
    for mu in which:
        if mu not in ("tar", "sim"):
            raise ConfigError(f"run.evolve: entries must be tar or sim, got {mu!r}")
    spc = run.get("steps_per_cycle", 40, types=int)
    if spc < 20:
        raise ConfigError("run.steps_per_cycle: must be at least 20")

    out = _Section(raw.get("output", {}), "output")
    out.get("dir", "out", types=str)

    n_sweeps = sum(isinstance(v, list) for v in
                   (sched.data.get("R"), sched.data.get("T"),
                    b.data.get("x_c"), b.data.get("nu_c")))
    if n_sweeps > 1:
        raise ConfigError("config: at most one of schedule.R, schedule.T, bath.x_c "
                          "may be a sweep list")

    return ExperimentConfig(
        experiment_id=exp_id, units=units, model=model.data, schedule=sched.data,
        bath=b.data, run=run.data, output=out.data,
        bound=raw.get("bound"), oracle=raw.get("oracle"), raw=raw)


# -- presets -------------------------------------------------------------------


def preset_names() -> list:
    root = resources.files("strobesim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _preset_path(name: str):
    root = resources.files("strobesim") / "presets"
    cand = root / f"{name}.json"
    return cand if cand.is_file() else None


# -- experiment assembly --------------------------------------------------------


def _sweep_entries(cfg: ExperimentConfig) -> list:
    """(label, model, schedule, bath_spec, n_cycles) per sweep point."""
    units = cfg.units
    entries = []

    def model_for(T):
        if units == "dimensionless":
            freq = cfg.model["epsilon"]
        else:
            freq = cfg.model.get("omega", cfg.model.get("gamma"))
        if cfg.model["type"] == "toric_vertex":
            return models_mod.toric_vertex_model(freq)
        return models_mod.five_qubit_model(freq)

    def bath_for(T, x_c_val=None):
        fam = cfg.bath.get("family", "ohmic")
        if fam == "discrete":
            return bath_mod.discrete_bath(cfg.bath["modes"], beta=cfg.bath.get("beta", np.inf))
        w = cfg.bath.get("w", 1.0)
        if units == "dimensionless":
            eta = cfg.bath["eta_tilde"]
            nu_c = x_c_val if x_c_val is not None else cfg.bath["x_c"]
            beta = cfg.bath.get("beta_tilde", np.inf)
        else:
            eta = cfg.bath["eta"]
            nu_c = x_c_val if x_c_val is not None else cfg.bath["nu_c"]
            beta = cfg.bath.get("beta", np.inf)
        if fam == "shifted_peak":
            center = cfg.bath.get("center", cfg.bath.get("x_bar", 0.0))
            return bath_mod.shifted_peak_bath(eta, center, nu_c)
        return bath_mod.ohmic_bath(eta=eta, nu_c=nu_c, beta=beta, w=w)

    def cycles_for(T):
        if "n_cycles" in cfg.run:
            return int(cfg.run["n_cycles"])
        return int(np.floor(cfg.run["t_max"] / T + 1e-9))

    sched_R = cfg.schedule.get("R")
    sched_T = cfg.schedule.get("T", 1.0 if units == "dimensionless" else None)
    xc_key = "x_c" if units == "dimensionless" else "nu_c"
    xc_val = cfg.bath.get(xc_key)

    if isinstance(sched_T, list):
        for T in sched_T:
            model = model_for(T)
            R = sched_R if sched_R is not None else cfg.schedule["tau_g"] / T
            sch = models_mod.gate_schedule(model, T, None, R=_snap_R(R, T, cfg))
            entries.append((f"T{T:g}", model, sch, bath_for(T), cycles_for(T)))
    elif isinstance(sched_R, list):
        T = sched_T
        model = model_for(T)
        for R in sched_R:
            sch = models_mod.gate_schedule(model, T, None, R=R)
            entries.append((f"R{float(models_mod.as_fraction(R)):g}", model, sch,
                            bath_for(T), cycles_for(T)))
    elif isinstance(xc_val, list):
        T = sched_T
        model = model_for(T)
        R = sched_R if sched_R is not None else cfg.schedule["tau_g"] / T
        sch = models_mod.gate_schedule(model, T, None, R=_snap_R(R, T, cfg))
        for xc in xc_val:
            entries.append((f"xc{xc:g}", model, sch, bath_for(T, xc), cycles_for(T)))
    else:
        T = sched_T
        model = model_for(T)
        R = sched_R if sched_R is not None else cfg.schedule["tau_g"] / T
        sch = models_mod.gate_schedule(model, T, None, R=_snap_R(R, T, cfg))
        entries.append(("", model, sch, bath_for(T), cycles_for(T)))
    return entries


def _snap_R(R, T, cfg) -> object:
    """tau_g/T from floats snaps to the nearest small rational."""
    if isinstance(R, str):
        return R
    return models_mod.as_fraction(R, "tau_g/T")


# -- CSV output -----------------------------------------------------------------


def emit_csv(table: dict, path: Path) -> None:
    """Write columns in insertion order; 17-significant-digit floats, LF."""
    cols = list(table.keys())
    n = len(next(iter(table.values())))
    lines = [",".join(cols)]
    for i in range(n):
        cells = []
        for c in cols:
            v = table[c][i]
            if isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(format(float(v), ".17g"))
        lines.append(",".join(cells))
    path.write_bytes(("\n".join(lines) + "\n").encode())


def _record_table(record, model, d_cross=None) -> dict:
    m = tcl2.metrics(record, model)
    table = {k: m[k] for k in ("N", "t", "P_g", "d_init", "trace_dev", "herm_dev", "min_eig")}
    if d_cross is not None:
        table["d_cross"] = d_cross
    return table


def _out_dir(cfg: ExperimentConfig) -> Path:
    env = os.environ.get("STROBE_OUT")
    d = Path(env) if env else Path(cfg.output.get("dir", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- subcommands -----------------------------------------------------------------


@dataclasses.dataclass
class RunResult:
    label: str
    mu: str
    record: object
    model: object
    d_cross: object = None           # set on the sim member of a paired entry


def run(cfg: ExperimentConfig, quiet: bool = False) -> list:
    """Run all configured trajectories and write their CSVs.

    Returns a RunResult per trajectory; files land in the output dir as
    <experiment-id>[_<label>]_<mu>.csv with d_cross attached to the sim
    CSV of each paired entry.
    """
    out_dir = _out_dir(cfg)
    which = cfg.run.get("evolve", ["tar", "sim"])
    results = []
    for (label, model, sched, spec, n_cycles) in _sweep_entries(cfg):
        state_id = cfg.run.get("initial_state", _DEFAULT_STATES[model.name])
        psi = models_mod.initial_state(model, state_id)
        rho0 = np.outer(psi, psi.conj())
        plan = tcl2.schedule_plan(sched, cfg.run.get("steps_per_cycle", 40))
        recs = {}
        for mu in which:
            recs[mu] = tcl2.evolve(rho0, mu, model, sched, spec,
                                   n_cycles=n_cycles, plan=plan)
        d_cross = None
        if "tar" in recs and "sim" in recs:
            d_cross = tcl2.paired_distance(recs["tar"], recs["sim"])
        stem = cfg.experiment_id + (f"_{label}" if label else "")
        for mu in which:
            paired = d_cross if (mu == "sim" and d_cross is not None) else None
            table = _record_table(recs[mu], model, paired)
            emit_csv(table, out_dir / f"{stem}_{mu}.csv")
            results.append(RunResult(label, mu, recs[mu], model, paired))
            if not quiet:
                final_pg = table["P_g"][-1]
                tail = f" final_d_cross={d_cross[-1]:.3e}" if paired is not None else ""
                print(f"{stem} mu={mu}: N={recs[mu].n_cycles} final_P_g={final_pg:.6f}"
                      f" max_trace_dev={recs[mu].trace_dev.max():.2e}"
                      f" max_herm_dev={recs[mu].herm_dev.max():.2e}{tail}")
    return results


def bound_report(cfg: ExperimentConfig) -> dict:
    """Closed-form bound for the configured experiment, plus optional sweep."""
    bsec = cfg.bound or {}
    n_cycles = int(bsec.get("n_cycles", cfg.run.get("n_cycles", 10)))
    margin = float(bsec.get("margin", 0.2))
    label, model, sched, spec, _ = _sweep_entries(cfg)[0]
    params = bounds_mod.regime_params(model, sched, spec, n_cycles)
    report = bounds_mod.table_bound(params, margin=margin).as_dict()
    report["n_cycles"] = n_cycles
    report["R"] = float(sched.R)
    out_dir = _out_dir(cfg)
    (out_dir / f"{cfg.experiment_id}_bound.json").write_bytes(
        (json.dumps(report, sort_keys=True, indent=2) + "\n").encode())

    sweep = bsec.get("sweep")
    if sweep:
        pname = sweep.get("param")
        values = sweep.get("values", [])
        if pname not in ("N", "R_M", "eps_max"):
            raise ConfigError("bound.sweep.param: must be N, R_M, or eps_max")
        rows = {"value": [], "total": [], "stroboscopic": [], "multi_gate": []}
        for v in values:
            p = dataclasses.replace(
                params,
                n_cycles=int(v) if pname == "N" else params.n_cycles,
                r_gate=float(v) if pname == "R_M" else params.r_gate,
                eps_max=float(v) if pname == "eps_max" else params.eps_max)
            rep = bounds_mod.table_bound(p, margin=margin)
            rows["value"].append(v)
            rows["total"].append(rep.total)
            rows["stroboscopic"].append(rep.stroboscopic_term)
            rows["multi_gate"].append(rep.multi_gate_term)
        emit_csv(rows, out_dir / f"{cfg.experiment_id}_bound_sweep.csv")
    return report


def validate(cfg: ExperimentConfig, quiet: bool = False) -> dict:
    """Oracle-vs-TCL2 comparison for the configured discrete-mode setup."""
    osec = cfg.oracle
    if not osec:
        raise ConfigError("oracle: section required for the validate subcommand")
    label, model, sched, _, _ = _sweep_entries(cfg)[0]
    omega_m = osec.get("mode_frequency")
    g = osec.get("coupling")
    if omega_m is None or g is None:
        raise ConfigError("oracle.mode_frequency and oracle.coupling: required")
    couple_to = int(osec.get("couple_to", 1))
    n_max = int(osec.get("n_max", 5))
    n_cycles = int(osec.get("n_cycles", 20))
    beta = float(osec.get("beta", np.inf)) if osec.get("beta") is not None else np.inf

    model_1 = dataclasses.replace(model, couplings=[model.couplings[couple_to - 1]])
    state_id = cfg.run.get("initial_state", _DEFAULT_STATES[model.name])
    psi = models_mod.initial_state(model, state_id)
    rho0 = np.outer(psi, psi.conj())

    jspec = oracle_mod.JointSpec(model=model_1, modes=[(omega_m, g)], n_max=n_max, beta=beta)
    orun = oracle_mod.exact_reduced_evolution(rho0, jspec, "sim", sched, n_cycles)
    dspec = bath_mod.discrete_bath([(omega_m, g)], beta=beta)
    rec = tcl2.evolve(rho0, "sim", model_1, sched, dspec, n_cycles=n_cycles,
                      steps_per_cycle=cfg.run.get("steps_per_cycle", 40))

    from .operators import trace_distance
    dist = np.array([trace_distance(a, b) for a, b in zip(orun.rhos, rec.rhos)])
    out_dir = _out_dir(cfg)
    emit_csv({
        "N": np.arange(n_cycles + 1),
        "t": orun.times,
        "d_tcl2_oracle": dist,
        "leakage": orun.leakage,
    }, out_dir / f"{cfg.experiment_id}_validate.csv")
    # the oracle trajectory itself, in the trajectory schema plus leakage
    oracle_table = {
        "N": np.arange(n_cycles + 1),
        "t": orun.times,
        "P_g": np.array([np.trace(model.ground_projector @ r).real for r in orun.rhos]),
        "d_init": np.array([trace_distance(_lab_frame(model, r, t), orun.rhos[0])
                            for r, t in zip(orun.rhos, orun.times)]),
        "trace_dev": np.array([abs(np.trace(r) - 1.0) for r in orun.rhos]),
        "herm_dev": np.array([np.linalg.norm(r - r.conj().T, 2) for r in orun.rhos]),
        "min_eig": np.array([np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T)))
                             for r in orun.rhos]),
        "leakage": orun.leakage,
    }
    emit_csv(oracle_table, out_dir / f"{cfg.experiment_id}_oracle.csv")
    summary = {"max_distance": float(dist.max()), "max_leakage": float(orun.leakage.max())}
    if not quiet:
        print(f"{cfg.experiment_id} validate: max|TCL2-oracle|={summary['max_distance']:.3e} "
              f"max_leakage={summary['max_leakage']:.2e}")
    return summary


def _lab_frame(model, rho, t):
    u = model.spectral.propagator(t)
    return u @ rho @ u.conj().T


def kernel_export(cfg: ExperimentConfig, quiet: bool = False):
    """Tabulate the configured bath kernel and write it as CSV."""
    ksec = cfg.raw.get("kernel", {})
    label, model, sched, spec, n_cycles = _sweep_entries(cfg)[0]
    plan = tcl2.schedule_plan(sched, cfg.run.get("steps_per_cycle", 40))
    delta = float(ksec.get("delta", plan.delta))
    n_max = int(ksec.get("n_max", n_cycles * round(sched.T / delta)))
    table = bath_mod.kernel_table(spec, delta, n_max)
    rows = list(bath_mod.kernel_csv_rows(table))
    cols = {
        "m": [r[0] for r in rows],
        "re_f": [r[1] for r in rows],
        "im_f": [r[2] for r in rows],
        "re_F": [r[3] for r in rows],
        "im_F": [r[4] for r in rows],
    }
    out_dir = _out_dir(cfg)
    path = out_dir / f"{cfg.experiment_id}_kernel.csv"
    emit_csv(cols, path)
    if not quiet:
        print(f"{cfg.experiment_id} kernel: {n_max + 1} rows, delta={delta:g} -> {path}")
    return path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="strobesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "bound", "validate", "kernel"):
        p = sub.add_parser(name)
        p.add_argument("config", help="config JSON path or preset name")
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("presets")
    p.add_argument("action", choices=["list"])
    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in preset_names():
            print(name)
        return 0
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            run(cfg, quiet=args.quiet)
        elif args.command == "bound":
            report = bound_report(cfg)
            print(json.dumps(report, sort_keys=True, indent=2))
        elif args.command == "validate":
            validate(cfg, quiet=args.quiet)
        elif args.command == "kernel":
            kernel_export(cfg, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (tcl2.IntegrationError, oracle_mod.OracleError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
