"""Command-line drivers for feedback-grown eigenstate preparation runs.

Four subcommands cover the experiment shapes the library supports:

``run``
    One feedback run (ground state or a projector-shifted excited-state
    target), emitting a per-layer CSV trace and a JSON summary.
``spectrum``
    Sequential deflation through the lowest ``count`` eigenstates, one
    trace per stage plus a spectrum summary.
``sweep``
    A family of runs along one axis (``R``, ``n`` or ``seed``) with a
    per-point aggregate row; points fail independently.
``validate``
    Informational checks of the convergence assumptions for a config.

Configs are single JSON documents; ``--shots``, ``--exact``, ``--seed``
and ``--out`` override the corresponding fields from the command line.
Exit codes: 0 success, 1 runtime failure (partial trace flushed),
2 config rejection.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .feedback import (
    DeflationStage,
    FeedbackConfig,
    FeedbackRunError,
    RunTrace,
    Shift,
    ShiftedOperator,
    alpha_from_bound,
    alpha_iterative,
    deflate_spectrum,
    run_falqon,
    run_fqae,
    tune_time_step,
)
from .models import (
    CONTROL_KINDS,
    H2Spec,
    IsingSpec,
    MfiSpec,
    build_h2,
    build_ising,
    build_mfi,
    random_ising,
    random_mfi,
    standard_controls,
)
from .pauli import PauliSum, parse_sum
from .sampling import ShotBudget, derive_seed
from .states import StateVector, dense_matrix, fidelity, reference_spectrum

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

DEFAULT_OUTPUT = "runs/experiment"
DEFAULT_DT_LADDER = (
    0.05, 0.04, 0.03, 0.025, 0.02, 0.015, 0.012, 0.01, 0.009, 0.008,
    0.007, 0.006, 0.005, 0.004, 0.003, 0.002, 0.0015, 0.001,
)
DEGENERACY_TOL = 1e-9
ELEMENT_TOL = 1e-12


class ConfigError(ValueError):
    """A config document failed validation before any run started."""


# ---------------------------------------------------------------------------
# config parsing


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"top-level JSON value in {path} must be an object")
    return doc


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing required field '{key}' in {where}")
    return obj[key]


def parse_model(spec: dict, base_dir: Path) -> Tuple[PauliSum, dict]:
    """Build the drift Hamiltonian from an inline spec or a file reference.

    Returns the operator together with a metadata dict echoed into
    summaries (family, size, instance seed where applicable).
    """
    if not isinstance(spec, dict):
        raise ConfigError("'model' must be an object")
    if "file" in spec:
        ref = base_dir / str(spec["file"])
        spec = _load_json(ref)

    family = str(_require(spec, "family", "'model'"))
    try:
        if family == "ising":
            n = int(_require(spec, "n", "ising model"))
            couplings = _require(spec, "couplings", "ising model")
            fields = _require(spec, "fields", "ising model")
            built = build_ising(IsingSpec(n, tuple(map(tuple, couplings)), tuple(fields)))
            return built, {"family": family, "n": n}
        if family == "ising_random":
            n = int(_require(spec, "n", "random ising model"))
            inst = int(_require(spec, "instance_seed", "random ising model"))
            low = float(spec.get("low", -2.0))
            high = float(spec.get("high", 2.0))
            built = build_ising(random_ising(n, inst, low=low, high=high))
            return built, {"family": family, "n": n, "instance_seed": inst}
        if family == "mfi":
            n = int(_require(spec, "n", "mfi model"))
            built = build_mfi(
                MfiSpec(
                    n,
                    float(_require(spec, "J", "mfi model")),
                    float(_require(spec, "h", "mfi model")),
                    float(_require(spec, "g", "mfi model")),
                )
            )
            return built, {"family": family, "n": n}
        if family == "mfi_random":
            n = int(spec.get("n", 12))
            inst = int(_require(spec, "instance_seed", "random mfi model"))
            built = build_mfi(random_mfi(n, inst))
            return built, {"family": family, "n": n, "instance_seed": inst}
        if family == "h2":
            r_val = float(_require(spec, "R", "h2 model"))
            table = spec.get("table")
            if table is not None:
                table = base_dir / str(table)
                if not table.exists():
                    raise ConfigError(f"h2 coefficient table not found: {table}")
            built = build_h2(H2Spec.from_table(r_val, path=table))
            return built, {"family": family, "n": 2, "R": r_val}
        if family == "pauli":
            text = str(_require(spec, "terms", "pauli model"))
            n = spec.get("n")
            built = parse_sum(text, n=None if n is None else int(n))
            return built, {"family": family, "n": built.n}
    except ConfigError:
        raise
    except (ValueError, LookupError, TypeError) as exc:
        raise ConfigError(f"invalid model spec: {exc}") from exc
    raise ConfigError(f"unknown model family '{family}'")


def parse_initial_state(spec, n: int) -> StateVector:
    """Accept 'plus' or a computational-basis bitstring like '01'."""
    if spec is None or spec == "plus":
        return StateVector.plus(n)
    if isinstance(spec, str):
        if len(spec) == n and set(spec) <= {"0", "1"}:
            return StateVector.basis(n, spec)
        raise ConfigError(f"initial state '{spec}' is neither 'plus' nor an {n}-bit string")
    raise ConfigError("initial state must be a string")


def parse_feedback(
    spec: dict,
    channels: int,
    seed: int,
    shots_override: Optional[int],
    exact_override: bool,
) -> FeedbackConfig:
    if not isinstance(spec, dict):
        raise ConfigError("'feedback' must be an object")
    shots = spec.get("shots")
    if exact_override:
        shots = None
    elif shots_override is not None:
        shots = shots_override
    budget = ShotBudget(None if shots is None else int(shots), seed=derive_seed(seed, "shots"))

    gains = spec.get("gains")
    if gains is None:
        gains = (1.0,) * channels
    elif isinstance(gains, (int, float)):
        gains = (float(gains),) * channels
    else:
        gains = tuple(float(g) for g in gains)
    initial = spec.get("initial_controls")
    if initial is not None:
        initial = tuple(float(u) for u in initial)
    try:
        return FeedbackConfig(
            dt=float(_require(spec, "dt", "'feedback'")),
            gains=gains,
            depth=int(_require(spec, "depth", "'feedback'")),
            backend=str(spec.get("backend", "exact")),
            initial_controls=initial,
            budget=budget,
            epsilon=None if spec.get("epsilon") is None else float(spec["epsilon"]),
            psr_literal=bool(spec.get("psr_literal", False)),
            trotter_slices=int(spec.get("trotter_slices", 1)),
            stop_control_threshold=_opt_float(spec, "stop_control_threshold"),
            stop_value_threshold=_opt_float(spec, "stop_value_threshold"),
            abort_on_increase=_opt_float(spec, "abort_on_increase"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid feedback settings: {exc}") from exc


def _opt_float(spec: dict, key: str) -> Optional[float]:
    value = spec.get(key)
    return None if value is None else float(value)


def parse_controls(doc: dict, n: int) -> Tuple[List[PauliSum], str]:
    kind = str(doc.get("controls", "y_per_qubit"))
    if kind not in CONTROL_KINDS:
        raise ConfigError(f"unknown control kind '{kind}' (choose from {CONTROL_KINDS})")
    return standard_controls(kind, n), kind


def resolve_alphas(
    doc: dict,
    h0: PauliSum,
    target: int,
    run_with_alphas: Callable[[Sequence[float]], RunTrace],
    reference: Sequence[Tuple[float, StateVector]],
) -> List[float]:
    """Turn the config's alpha strategy into one value per projector shift.

    ``bound`` uses twice the drift one-norm for every shift, ``fixed``
    takes explicit values, and ``iterative`` doubles a shared starting
    value until the run stops collapsing onto a lower eigenstate.
    """
    if target == 0:
        return []
    spec = doc.get("alpha", {"strategy": "bound"})
    if not isinstance(spec, dict):
        raise ConfigError("'alpha' must be an object with a 'strategy' field")
    strategy = str(spec.get("strategy", "bound"))
    if strategy == "bound":
        return [alpha_from_bound(h0)] * target
    if strategy == "fixed":
        values = _require(spec, "values", "alpha strategy 'fixed'")
        values = [float(v) for v in values]
        if len(values) != target:
            raise ConfigError(
                f"alpha strategy 'fixed' needs {target} values for target index {target}"
            )
        return values
    if strategy == "iterative":
        start = float(spec.get("start", 1.0))

        def _run(alpha: float) -> RunTrace:
            return run_with_alphas([alpha] * target)

        def _fell_short(trace: RunTrace) -> bool:
            lower = [fidelity(reference[k][1], trace.final_state) for k in range(target)]
            return bool(lower and max(lower) > 0.5)

        final = alpha_iterative(_run, start, _fell_short)
        return [final] * target
    raise ConfigError(f"unknown alpha strategy '{strategy}'")


# ---------------------------------------------------------------------------
# trace output


def _format(value: float) -> str:
    return "%.12g" % value


def write_trace_csv(path: Path, trace: RunTrace, tracked: int) -> None:
    """Per-layer rows: layer, u_1..u_r, V, energy, fid_0..fid_{s-1}.

    The column set depends only on the channel count and the number of
    tracked eigenstates.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    r = trace.controls.shape[1] if trace.controls.size else len(trace.final_controls)
    header = (
        ["layer"]
        + [f"u_{q + 1}" for q in range(r)]
        + ["V", "energy"]
        + [f"fid_{j}" for j in range(tracked)]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, layer in enumerate(trace.layers):
            row = [str(int(layer))]
            row += [_format(trace.controls[i, q]) for q in range(r)]
            row += [_format(trace.lyapunov[i]), _format(trace.energy[i])]
            row += [_format(trace.fidelities[i, j]) for j in range(tracked)]
            writer.writerow(row)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiment assembly shared by run/spectrum/validate


class Experiment:
    """Everything a subcommand needs, resolved from one config document."""

    def __init__(self, doc: dict, base_dir: Path, args) -> None:
        self.doc = doc
        self.seed = int(args.seed if args.seed is not None else doc.get("seed", 0))
        self.h0, self.model_meta = parse_model(_require(doc, "model", "config"), base_dir)
        self.n = self.h0.n
        self.controls, self.control_kind = parse_controls(doc, self.n)
        self.config = parse_feedback(
            _require(doc, "feedback", "config"),
            len(self.controls),
            self.seed,
            args.shots,
            args.exact,
        )
        self.target = int(doc.get("target", 0))
        if self.target < 0:
            raise ConfigError("'target' must be a non-negative eigenstate index")
        self.psi0 = parse_initial_state(doc.get("initial_state"), self.n)
        out = args.out if args.out is not None else doc.get("output", DEFAULT_OUTPUT)
        self.output = Path(out)

    def reference(self, count: int) -> List[Tuple[float, StateVector]]:
        try:
            return reference_spectrum(self.h0, count=count)
        except ValueError as exc:
            raise ConfigError(f"reference spectrum unavailable: {exc}") from exc

    def shifted_operator(self, alphas: Sequence[float], reference) -> ShiftedOperator:
        shifts = [
            Shift(alphas[k], reference[k][1], reference[k][0]) for k in range(len(alphas))
        ]
        return ShiftedOperator(self.h0, shifts)


def _run_target(exp: Experiment, alphas: Sequence[float], reference) -> RunTrace:
    track = [pair[1] for pair in reference]
    if not alphas:
        return run_falqon(exp.h0, exp.controls, exp.psi0, exp.config, track_states=track)
    p_op = exp.shifted_operator(alphas, reference)
    return run_fqae(exp.h0, exp.controls, p_op, exp.psi0, exp.config, track_states=track)


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    doc = _load_json(Path(args.config))
    exp = Experiment(doc, Path(args.config).resolve().parent, args)
    reference = exp.reference(exp.target + 1)
    tracked = len(reference)
    trace_path = exp.output.parent / (exp.output.name + "_trace.csv")
    summary_path = exp.output.parent / (exp.output.name + "_summary.json")

    started = time.perf_counter()
    try:
        alphas = resolve_alphas(
            doc, exp.h0, exp.target, lambda a: _run_target(exp, a, reference), reference
        )
        trace = _run_target(exp, alphas, reference)
    except FeedbackRunError as exc:
        write_trace_csv(trace_path, exc.partial, tracked)
        _write_json(
            summary_path,
            {
                "error": str(exc),
                "layers_completed": int(exc.partial.layers.size),
                "trace": str(trace_path),
            },
        )
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    wall = time.perf_counter() - started

    write_trace_csv(trace_path, trace, tracked)
    summary = {
        "model": exp.model_meta,
        "controls": exp.control_kind,
        "backend": exp.config.backend,
        "shots": exp.config.budget.shots,
        "seed": exp.seed,
        "target": exp.target,
        "alphas": list(map(float, alphas)),
        "layers_completed": int(trace.layers.size),
        "aborted_layer": trace.aborted_layer,
        "final_energy": float(trace.energy[-1]) if trace.energy.size else trace.initial_energy,
        "final_lyapunov": (
            float(trace.lyapunov[-1]) if trace.lyapunov.size else trace.initial_lyapunov
        ),
        "final_fidelities": [float(f) for f in trace.fidelities[-1]]
        if trace.fidelities.size
        else [],
        "final_controls": [float(u) for u in trace.final_controls],
        "wall_time_s": wall,
        "trace": str(trace_path),
    }
    _write_json(summary_path, summary)
    print(f"wrote {trace_path} and {summary_path}")
    return EXIT_OK


def _stage_overrides(doc: dict, exp: Experiment, count: int):
    """Per-stage initial states and feedback configs for deflation."""
    stages = doc.get("stages")
    if stages is None:
        return exp.psi0, exp.config
    if not isinstance(stages, list) or len(stages) != count:
        raise ConfigError(f"'stages' must be a list of {count} objects")

    states = []
    configs = []
    for entry in stages:
        if not isinstance(entry, dict):
            raise ConfigError("each 'stages' entry must be an object")
        states.append(parse_initial_state(entry.get("initial_state"), exp.n))
        cfg = exp.config
        merged = dict(
            dt=float(entry.get("dt", cfg.dt)),
            depth=int(entry.get("depth", cfg.depth)),
            trotter_slices=int(entry.get("trotter_slices", cfg.trotter_slices)),
        )
        gains = entry.get("gains")
        if gains is not None:
            merged["gains"] = (
                (float(gains),) * len(cfg.gains)
                if isinstance(gains, (int, float))
                else tuple(float(g) for g in gains)
            )
        try:
            configs.append(
                FeedbackConfig(
                    dt=merged["dt"],
                    gains=merged.get("gains", cfg.gains),
                    depth=merged["depth"],
                    backend=cfg.backend,
                    initial_controls=cfg.initial_controls,
                    budget=cfg.budget,
                    epsilon=cfg.epsilon,
                    psr_literal=cfg.psr_literal,
                    trotter_slices=merged["trotter_slices"],
                    stop_control_threshold=cfg.stop_control_threshold,
                    stop_value_threshold=cfg.stop_value_threshold,
                    abort_on_increase=cfg.abort_on_increase,
                )
            )
        except ValueError as exc:
            raise ConfigError(f"invalid stage override: {exc}") from exc
    return (lambda s: states[s]), (lambda s: configs[s])


def cmd_spectrum(args) -> int:
    doc = _load_json(Path(args.config))
    exp = Experiment(doc, Path(args.config).resolve().parent, args)
    count = int(args.count if args.count is not None else doc.get("count", 1))
    if count < 1:
        raise ConfigError("'count' must be at least 1")

    spec = doc.get("alpha", {"strategy": "bound"})
    strategy = str(spec.get("strategy", "bound")) if isinstance(spec, dict) else "?"
    if strategy == "bound":
        alphas = None
    elif strategy == "fixed":
        alphas = [float(v) for v in _require(spec, "values", "alpha strategy 'fixed'")]
        if len(alphas) != max(count - 1, 0):
            raise ConfigError(
                f"alpha strategy 'fixed' needs {count - 1} values for count {count}"
            )
    else:
        raise ConfigError("spectrum supports alpha strategies 'bound' and 'fixed' only")

    reference = exp.reference(count)
    psi0, config = _stage_overrides(doc, exp, count)
    track = [pair[1] for pair in reference]

    started = time.perf_counter()
    try:
        stages = deflate_spectrum(
            exp.h0,
            exp.controls,
            psi0,
            config,
            count,
            alphas=alphas,
            reference=reference,
            track_states=track,
        )
    except FeedbackRunError as exc:
        partial_path = exp.output.parent / (exp.output.name + "_stage_partial_trace.csv")
        write_trace_csv(partial_path, exc.partial, len(track))
        print(f"spectrum failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    wall = time.perf_counter() - started

    for idx, stage in enumerate(stages):
        write_trace_csv(
            exp.output.parent / (exp.output.name + f"_stage{idx}_trace.csv"),
            stage.trace,
            len(track),
        )
    summary_path = exp.output.parent / (exp.output.name + "_spectrum.json")
    _write_json(
        summary_path,
        {
            "model": exp.model_meta,
            "controls": exp.control_kind,
            "count": count,
            "energies": [float(s.energy) for s in stages],
            "reference_energies": [float(e) for e, _ in reference],
            "alphas": (
                [float(a) for a in alphas]
                if alphas is not None
                else [alpha_from_bound(exp.h0)] * (count - 1)
            ),
            "warnings": [s.warning for s in stages],
            "wall_time_s": wall,
        },
    )
    print(f"wrote {count} stage traces and {summary_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_point(payload: dict) -> dict:
    """Run one sweep point in a worker process; never raises."""
    doc = payload["doc"]
    axis = payload["axis"]
    value = payload["value"]
    try:
        args = argparse.Namespace(seed=None, shots=None, exact=False, out=None)
        point_doc = copy.deepcopy(doc)
        seed = int(point_doc.get("seed", 0))
        sweep = point_doc.get("sweep", {})
        depth_default = point_doc.get("feedback", {}).get("depth", 500)

        if axis == "R":
            point_doc["model"] = dict(point_doc["model"], R=value)
            exp = Experiment(point_doc, Path(payload["base_dir"]), args)
            reference = exp.reference(exp.target + 1)
            alphas = resolve_alphas(
                point_doc,
                exp.h0,
                exp.target,
                lambda a: _run_target(exp, a, reference),
                reference,
            )
            trace = _run_target(exp, alphas, reference)
            fid = float(trace.fidelities[-1, exp.target])
            return {
                "axis": axis,
                "value": value,
                "instances": 1,
                "dt": exp.config.dt,
                "mean_fidelity": fid,
                "fidelity_se": 0.0,
                "mean_energy": float(trace.energy[-1]),
            }

        if axis == "seed":
            point_doc["model"] = dict(point_doc["model"], instance_seed=int(value))
            exp = Experiment(point_doc, Path(payload["base_dir"]), args)
            reference = exp.reference(exp.target + 1)
            alphas = resolve_alphas(
                point_doc,
                exp.h0,
                exp.target,
                lambda a: _run_target(exp, a, reference),
                reference,
            )
            trace = _run_target(exp, alphas, reference)
            return {
                "axis": axis,
                "value": value,
                "instances": 1,
                "dt": exp.config.dt,
                "mean_fidelity": float(trace.fidelities[-1, exp.target]),
                "fidelity_se": 0.0,
                "mean_energy": float(trace.energy[-1]),
            }

        if axis == "n":
            n = int(value)
            instances = int(sweep.get("instances", 15))
            tolerance = float(sweep.get("monotone_tolerance", 1e-6))
            candidates = [float(c) for c in sweep.get("dt_candidates", DEFAULT_DT_LADDER)]
            target = int(point_doc.get("target", 1))
            alpha = float(sweep.get("alpha", 4.0))
            depth = int(sweep.get("depth", depth_default))
            kind = str(point_doc.get("controls", "x_mixer"))
            gain = float(sweep.get("gain", 1.0))

            problems = []
            for i in range(instances):
                inst_seed = derive_seed(seed, "sweep", n, i)
                h0 = build_ising(random_ising(n, inst_seed))
                ref = reference_spectrum(h0, count=target + 1)
                shifts = [Shift(alpha, ref[k][1], ref[k][0]) for k in range(target)]
                problems.append((h0, ShiftedOperator(h0, shifts), ref[target][1]))
            ctrl_cache = {n: standard_controls(kind, n)}

            def run_at(dt: float) -> List[RunTrace]:
                traces = []
                for h0, p_op, target_state in problems:
                    cfg = FeedbackConfig(
                        dt=dt,
                        gains=(gain,) * len(ctrl_cache[n]),
                        depth=depth,
                        abort_on_increase=tolerance,
                    )
                    traces.append(
                        run_fqae(
                            h0,
                            ctrl_cache[n],
                            p_op,
                            StateVector.plus(n),
                            cfg,
                            track_states=[target_state],
                        )
                    )
                return traces

            dt, traces = tune_time_step(run_at, candidates, tolerance=tolerance)
            fids = np.array([t.fidelities[-1, 0] for t in traces])
            energies = np.array([t.energy[-1] for t in traces])
            se = float(fids.std(ddof=1) / math.sqrt(len(fids))) if len(fids) > 1 else 0.0
            return {
                "axis": axis,
                "value": n,
                "instances": instances,
                "dt": dt,
                "mean_fidelity": float(fids.mean()),
                "fidelity_se": se,
                "mean_energy": float(energies.mean()),
            }

        raise ConfigError(f"unknown sweep axis '{axis}'")
    except Exception as exc:  # a failed point must not sink the sweep
        return {
            "axis": axis,
            "value": value,
            "instances": 0,
            "dt": float("nan"),
            "mean_fidelity": float("nan"),
            "fidelity_se": float("nan"),
            "mean_energy": float("nan"),
            "error": str(exc),
        }


SWEEP_COLUMNS = ["axis", "value", "instances", "dt", "mean_fidelity", "fidelity_se", "mean_energy"]


def cmd_sweep(args) -> int:
    path = Path(args.config)
    doc = _load_json(path)
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("sweep configs need a 'sweep' object")
    axis = str(args.axis if args.axis is not None else _require(sweep, "axis", "'sweep'"))
    if axis not in ("R", "n", "seed"):
        raise ConfigError(f"unknown sweep axis '{axis}' (choose from R, n, seed)")
    values = _require(sweep, "values", "'sweep'")
    if not isinstance(values, list) or not values:
        raise ConfigError("'sweep.values' must be a non-empty list")
    if args.seed is not None:
        doc["seed"] = int(args.seed)
    # Validate the shared parts once up front so a broken config exits 2
    # instead of producing a CSV of NaN rows.
    if axis != "n":
        probe_args = argparse.Namespace(seed=None, shots=args.shots, exact=args.exact, out=None)
        probe_doc = copy.deepcopy(doc)
        if axis == "R":
            probe_doc["model"] = dict(probe_doc["model"], R=float(values[0]))
            try:
                Experiment(probe_doc, path.resolve().parent, probe_args)
            except ConfigError as exc:
                # The first R row may simply be missing from the table;
                # only reject configs whose failure is R-independent.
                if "not tabulated" not in str(exc) and "coefficient" not in str(exc):
                    raise
        else:
            probe_doc["model"] = dict(probe_doc["model"], instance_seed=int(values[0]))
            Experiment(probe_doc, path.resolve().parent, probe_args)

    out = Path(args.out if args.out is not None else doc.get("output", DEFAULT_OUTPUT))
    payloads = [
        {"doc": doc, "axis": axis, "value": v, "base_dir": str(path.resolve().parent)}
        for v in values
    ]
    started = time.perf_counter()
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]
    wall = time.perf_counter() - started

    csv_path = out.parent / (out.name + "_sweep.csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [row["axis"]]
                + [
                    _format(row[c]) if isinstance(row[c], float) else str(row[c])
                    for c in SWEEP_COLUMNS[1:]
                ]
            )
    failures = [row for row in rows if "error" in row]
    for row in failures:
        print(f"point {row['value']} failed: {row['error']}", file=sys.stderr)
    _write_json(
        out.parent / (out.name + "_sweep.json"),
        {
            "axis": axis,
            "rows": rows,
            "wall_time_s": wall,
            "failed_points": len(failures),
        },
    )
    print(f"wrote {csv_path} ({len(rows)} points, {len(failures)} failed)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def _distinct_gaps(eigenvalues: np.ndarray) -> Tuple[bool, int]:
    """Whether all pairwise eigenvalue differences are distinct."""
    diffs = []
    for i in range(len(eigenvalues)):
        for j in range(i + 1, len(eigenvalues)):
            diffs.append(eigenvalues[j] - eigenvalues[i])
    diffs = np.sort(np.asarray(diffs))
    clashes = int(np.sum(np.diff(diffs) < DEGENERACY_TOL)) if len(diffs) > 1 else 0
    return clashes == 0, clashes


def cmd_validate(args) -> int:
    doc = _load_json(Path(args.config))
    exp = Experiment(doc, Path(args.config).resolve().parent, args)
    if exp.n > 12:
        raise ConfigError(f"validate needs a dense spectrum; {exp.n} qubits exceeds the limit")

    h_dense = dense_matrix(exp.h0)
    eigenvalues, vectors = np.linalg.eigh(h_dense)

    assumption1, gap_clashes = _distinct_gaps(eigenvalues)

    channel_reports = []
    for idx, h_ctrl in enumerate(exp.controls):
        m = vectors.conj().T @ dense_matrix(h_ctrl) @ vectors
        off = np.abs(m - np.diag(np.diag(m)))
        zero_pairs = int(np.sum(off <= ELEMENT_TOL) - len(eigenvalues))
        channel_reports.append(
            {
                "channel": idx + 1,
                "fully_connected": zero_pairs == 0,
                "zero_offdiagonal_pairs": zero_pairs // 2,
            }
        )
    assumption2 = all(c["fully_connected"] for c in channel_reports)

    target = exp.target
    reference = [(float(eigenvalues[k]), None) for k in range(min(target + 1, len(eigenvalues)))]
    alphas = resolve_alphas(
        doc,
        exp.h0,
        target,
        lambda a: (_ for _ in ()).throw(
            ConfigError("alpha strategy 'iterative' is not supported by validate")
        ),
        reference,
    )
    p_dense = h_dense.astype(complex)
    for k, alpha in enumerate(alphas):
        q = vectors[:, k]
        p_dense = p_dense + alpha * np.outer(q, q.conj())
    p_eigenvalues = np.linalg.eigvalsh(p_dense)
    min_gap = float(np.min(np.diff(p_eigenvalues))) if len(p_eigenvalues) > 1 else math.inf
    assumption3 = min_gap > DEGENERACY_TOL

    sufficiency = []
    for k, alpha in enumerate(alphas):
        needed = float(eigenvalues[target] - eigenvalues[k])
        sufficiency.append(
            {
                "shift": k,
                "alpha": float(alpha),
                "required_gap": needed,
                "sufficient": bool(alpha > needed),
            }
        )

    report = {
        "model": exp.model_meta,
        "controls": exp.control_kind,
        "target": target,
        "assumption1_distinct_gaps": {"holds": assumption1, "coincident_gap_pairs": gap_clashes},
        "assumption2_fully_connected": {"holds": assumption2, "channels": channel_reports},
        "assumption3_nondegenerate_shifted": {"holds": assumption3, "min_gap": min_gap},
        "alpha_sufficiency": sufficiency,
        "note": "informational only; violations do not block runs",
    }
    out = exp.output.parent / (exp.output.name + "_validate.json")
    _write_json(out, report)

    print(f"assumption 1 (distinct drift gaps): {'holds' if assumption1 else 'violated'}")
    print(f"assumption 2 (fully connected controls): {'holds' if assumption2 else 'violated'}")
    for entry in channel_reports:
        print(
            f"  channel {entry['channel']}: "
            f"{entry['zero_offdiagonal_pairs']} zero off-diagonal pairs"
        )
    print(
        f"assumption 3 (non-degenerate shifted spectrum): "
        f"{'holds' if assumption3 else 'violated'} (min gap {min_gap:.3e})"
    )
    for entry in sufficiency:
        verdict = "sufficient" if entry["sufficient"] else "insufficient"
        print(
            f"alpha[{entry['shift']}] = {entry['alpha']:g} vs required gap "
            f"{entry['required_gap']:.6g}: {verdict}"
        )
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedbackq",
        description="Feedback-grown quantum circuits for eigenstate preparation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output path prefix (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        shots = p.add_mutually_exclusive_group()
        shots.add_argument("--shots", type=int, help="per-estimate shot count")
        shots.add_argument(
            "--exact", action="store_true", help="force exact expectation values"
        )

    p_run = sub.add_parser("run", help="single feedback run")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_spec = sub.add_parser("spectrum", help="deflation through the lowest eigenstates")
    common(p_spec)
    p_spec.add_argument("--count", type=int, help="number of eigenstates (overrides config)")
    p_spec.set_defaults(func=cmd_spectrum)

    p_sweep = sub.add_parser("sweep", help="axis sweep with per-point aggregates")
    common(p_sweep)
    p_sweep.add_argument("--axis", choices=("R", "n", "seed"), help="sweep axis")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="report convergence assumptions")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FeedbackRunError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
