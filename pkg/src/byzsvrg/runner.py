"""Execute runs, persist traces and summaries, and drive parameter sweeps."""
import csv
import hashlib
import io
import itertools
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .config import SCHEMA, _read, build_config, parse_config
from .engine import Simulation
from .errors import ConfigError, HonestMajorityViolated, NonFiniteIterate
from .tuning import confidence_constant, rate_bound, validate

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "t",
    "grad_norm_sq",
    "f_value",
    "N_t",
    "rule",
    "accepted_count",
    "accept_bitmap",
    "server_samples_cum",
    "worker_samples_cum",
    "wall_ms",
)

SWEEP_COLUMNS = (
    "config_hash",
    "params",
    "status",
    "exit_code",
    "min_grad_norm_sq",
    "final_grad_norm_sq",
    "samples_to_eps",
    "rule2_count",
    "error",
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_HONEST_MAJORITY = 3


def config_hash(config):
    blob = json.dumps(config.to_dict(), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_csv(trace, config):
    """Render a trace as CSV text, preceded by '#' provenance lines."""
    buf = io.StringIO()
    buf.write(f"# byzsvrg {__version__}\n")
    buf.write(f"# config {json.dumps(config.to_dict(), sort_keys=True, default=list)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in trace:
        writer.writerow(_fmt(getattr(r, col)) for col in TRACE_COLUMNS)
    return buf.getvalue()


def samples_to_epsilon(trace, epsilon):
    """Per-node sample count (batch + inner draws) when ||grad f||^2 first drops to epsilon."""
    if epsilon is None:
        return None
    for r in trace:
        if r.grad_norm_sq <= epsilon:
            return r.server_samples_cum + r.worker_samples_cum
    return None


def simulate(config):
    """Run one config in memory; returns (summary dict, RunResult or None, exit code, trace)."""
    summary = {
        "version": __version__,
        "config_hash": config_hash(config),
        "config": config.to_dict(),
    }
    feas = validate(config.K, config.B, config.delta)
    summary["feasibility"] = feas.verdicts()
    summary["feasible"] = feas.valid
    if not feas.valid and not config.allow_infeasible:
        summary["status"] = "infeasible"
        summary["violations"] = feas.violations
        return summary, None, EXIT_INFEASIBLE, []

    sim = Simulation(config)
    try:
        result = sim.run()
    except HonestMajorityViolated as exc:
        summary.update(status="honest_majority_violated", error=str(exc), failed_epoch=exc.epoch)
        return summary, None, EXIT_HONEST_MAJORITY, exc.partial_trace
    except NonFiniteIterate as exc:
        summary.update(status="non_finite", error=str(exc), failed_epoch=exc.epoch)
        return summary, None, EXIT_FAILED, exc.partial_trace

    problem = sim.problem
    x0 = sim.initial_point()
    C = confidence_constant(config.K, config.delta)
    summary.update(
        status=result.status,
        diverged=result.status == "diverged",
        selected_epoch=result.selected_epoch,
        output=[float(v) for v in result.output],
        output_grad_norm_sq=float(problem.full_gradient(result.output) @ problem.full_gradient(result.output)),
        min_grad_norm_sq=result.min_grad_norm_sq,
        final_grad_norm_sq=result.final_grad_norm_sq,
        total_server_samples=result.total_samples_server,
        total_worker_samples=result.total_samples_per_worker,
        server_gradient_evals=result.server_gradient_evals,
        rule2_count=result.rule2_count,
        capped_epochs=sum(r.capped for r in result.trace),
        byzantine_ids=sorted(result.byzantine_ids),
        f_gap=problem.gradient_gap(x0),
        rate_bound=rate_bound(
            problem.smoothness, problem.gradient_gap(x0), config.T, config.B,
            problem.deviation_bound, config.alpha, config.K, C,
        ),
        samples_to_eps=samples_to_epsilon(result.trace, config.epsilon),
    )
    return summary, result, EXIT_OK, result.trace


def execute(config, output_dir=None, name="run"):
    """Run, then write ``<name>_trace.csv`` and ``<name>_summary.json``.

    Returns (summary, result, exit_code).
    """
    out = Path(output_dir or config.resolved_output_dir())
    summary, result, code, trace = simulate(config)
    summary["exit_code"] = code
    trace_path = out / f"{name}_trace.csv"
    summary_path = out / f"{name}_summary.json"
    try:
        out.mkdir(parents=True, exist_ok=True)
        trace_path.write_text(trace_csv(trace, config), encoding="utf-8")
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write run artifacts under {out}: {exc}") from exc
    summary["artifacts"] = {"trace": str(trace_path), "summary": str(summary_path)}
    return summary, result, code


def _expand(raw):
    """'1..20' -> 1..20 inclusive; otherwise a comma list."""
    raw = raw.strip()
    m = re.fullmatch(r"(-?\d+)\s*\.\.\s*(-?\d+)", raw)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return [str(v) for v in range(lo, hi + 1)]
    return [v.strip() for v in raw.split(",") if v.strip()]


def _key_owner(key):
    for section, keys in SCHEMA.items():
        if key in keys:
            return section, keys[key][0]
    return None, None


def parse_grid(text):
    """Split a grid document into (base config text, {key: [values]}).

    The grid is an ordinary config plus a ``[sweep]`` section whose keys
    name config keys (optionally ``section.key``) and whose values are
    comma lists or integer ranges ``a..b``.
    """
    parser = _read(text)
    axes = {}
    errors = []
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            bare = key.split(".", 1)[-1]
            section, conv = _key_owner(bare)
            if section is None:
                errors.append(f"unknown sweep key {key}")
                continue
            try:
                axes[bare] = [conv(v) for v in _expand(raw)]
            except ValueError as exc:
                errors.append(f"sweep.{key}: {exc}")
        parser.remove_section("sweep")
    if errors:
        raise ConfigError(errors)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue(), axes


def grid_configs(text):
    base_text, axes = parse_grid(text)
    base = parse_config(base_text)
    names = list(axes)
    out = []
    for combo in itertools.product(*(axes[n] for n in names)):
        point = dict(zip(names, combo))
        try:
            cfg = with_overrides(base, **point)
        except ConfigError as exc:
            out.append((point, None, str(exc)))
            continue
        out.append((point, cfg, None))
    return out


def _sweep_row(point, cfg, error):
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row["params"] = json.dumps(point, sort_keys=True)
    if cfg is None:
        row.update(config_hash=hashlib.sha256(row["params"].encode()).hexdigest()[:16],
                   status="config_error", exit_code=EXIT_FAILED, error=error)
        return row
    row["config_hash"] = config_hash(cfg)
    try:
        summary, result, code, _ = simulate(cfg)
    except Exception as exc:  # one bad run must not sink the sweep
        logger.exception("sweep run %s failed", row["config_hash"])
        row.update(status="error", exit_code=EXIT_FAILED, error=repr(exc))
        return row
    row["status"] = summary["status"]
    row["exit_code"] = code
    row["error"] = summary.get("error", "")
    if result is not None:
        row["min_grad_norm_sq"] = repr(result.min_grad_norm_sq)
        row["final_grad_norm_sq"] = repr(result.final_grad_norm_sq)
        reached = summary["samples_to_eps"]
        row["samples_to_eps"] = "not reached" if reached is None else reached
        row["rule2_count"] = result.rule2_count
    return row


def sweep(text, jobs=1):
    """Run every grid point; rows come back sorted by config hash."""
    points = grid_configs(text)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda p: _sweep_row(*p), points))
    else:
        rows = [_sweep_row(*p) for p in points]
    rows.sort(key=lambda r: (r["config_hash"], r["params"]))
    return rows


def sweep_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def with_overrides(config, **changes):
    """Copy of ``config`` with fields replaced and eta re-derived unless it was set explicitly."""
    values = {k: v for k, v in config.to_dict().items() if k != "eta_overridden"}
    values["n_max"] = config.n_max
    if not config.eta_overridden:
        values["eta"] = None
    values.update(changes)
    return build_config(**values)


__all__ = [
    "TRACE_COLUMNS",
    "execute",
    "simulate",
    "sweep",
    "sweep_csv",
    "trace_csv",
    "with_overrides",
]
