"""Sensitive-sample search strategies.

`naive_search` hands the whole query (all ReLU nodes free) to the solver
once.  `greedy_search` profiles ReLU decisions over a dataset, starts from
the fully fixed underapproximation, and unfixes nodes in order of
increasing decision bias, escalating the per-iteration timeout across
schedule passes.  Every satisfying model is re-validated concretely in
exact rational arithmetic before it is reported as found.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from .data import Dataset
from .encode import (
    DeltaMode,
    QueryContext,
    QuerySpec,
    SmtScript,
    encode_query,
    pessimistic_corner_deltas,
    rational_literal,
    validate_query,
)
from .errors import UnsupportedValue
from .mlp import Mlp, forward_exact, sensitivity
from .profiling import FixPlan, compute_dbias, fix_order, initial_fixplan
from .solver import SolveResult, SolveStatus, SolverConfig, solve

log = logging.getLogger(__name__)

VALIDATION_TOL = Fraction(1, 10**6)


class Outcome(Enum):
    FOUND = "found"
    UNSAT = "unsat"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class IterationRecord:
    pass_index: int
    iteration: int
    n_free: int
    plan_digest: str
    status: str
    wall_time: float
    script_file: str | None = None
    cached: bool = False


@dataclass(frozen=True)
class SearchOutcome:
    status: Outcome
    sample: np.ndarray | None = None
    sample_exact: tuple[Fraction, ...] | None = None
    witness_delta: dict[int, Fraction] | None = None
    iteration: int | None = None
    records: tuple[IterationRecord, ...] = ()
    pass_runtimes: tuple[float, ...] = ()
    total_runtime: float = 0.0
    reason: str | None = None

    def to_json_dict(self) -> dict:
        """Logical results and timing kept in separate sub-objects."""
        return {
            "results": {
                "status": self.status.value,
                "iteration": self.iteration,
                "sample": None
                if self.sample is None
                else [float(v) for v in self.sample],
                "witness_delta": None
                if self.witness_delta is None
                else {str(k): float(v) for k, v in sorted(self.witness_delta.items())},
                "reason": self.reason,
                "iteration_statuses": [
                    {
                        "pass": r.pass_index,
                        "iteration": r.iteration,
                        "n_free": r.n_free,
                        "plan": r.plan_digest,
                        "status": r.status,
                        "cached": r.cached,
                    }
                    for r in self.records
                ],
            },
            "timing": {
                "total_runtime_s": self.total_runtime,
                "pass_runtimes_s": list(self.pass_runtimes),
                "iteration_wall_s": [r.wall_time for r in self.records],
            },
        }


@dataclass(frozen=True)
class Verdict:
    flagged: bool
    beta: float


def verify_sample(m_orig: Mlp, m_suspect: Mlp, s, theta: float) -> Verdict:
    """Flag the suspect model iff the sample's sensitivity reaches theta."""
    beta = sensitivity(m_orig, m_suspect, s)
    return Verdict(beta >= theta, beta)


# -- witness extraction and concrete re-validation ---------------------------


def _witness_from(
    m: Mlp, q: QuerySpec, ctx: QueryContext, assignments: dict[str, Fraction]
) -> tuple[tuple[Fraction, ...], dict[int, Fraction]]:
    gamma = tuple(
        assignments[f"g_{i}"] for i in range(m.input_width)
    )
    if q.delta_mode is DeltaMode.EXISTENTIAL:
        delta = {j: assignments[f"d_e_{j}"] for j in ctx.inflate_indices}
        delta.update({j: assignments[f"d_d_{j}"] for j in ctx.deflate_indices})
    else:
        delta = pessimistic_corner_deltas(m, q, ctx)
    return gamma, delta


def validate_found(
    m: Mlp,
    q: QuerySpec,
    ctx: QueryContext,
    gamma: tuple[Fraction, ...],
    delta: dict[int, Fraction],
) -> tuple[tuple[Fraction, ...], str | None]:
    """Re-check every query condition on the solver's model, exactly.

    Returns (sample, None) on success or (sample, reason) when some
    condition fails beyond the 1e-6 tolerance; weights being binary floats
    makes the whole evaluation exact rational arithmetic.
    """
    radius = Fraction(float(q.gamma_radius))
    sample = tuple(Fraction(v) + g for v, g in zip(q.x0, gamma))
    for i, g in enumerate(gamma):
        if abs(g) > radius + VALIDATION_TOL:
            return sample, f"gamma_{i}={float(g):.6g} exceeds radius {q.gamma_radius}"
    for i, s in enumerate(sample):
        if not -VALIDATION_TOL <= s <= 1 + VALIDATION_TOL:
            return sample, f"sample feature {i}={float(s):.6g} outside [0, 1]"
    _, acts, logit = forward_exact(m, list(sample))
    if ctx.required_label == 1:
        if logit < -VALIDATION_TOL:
            return sample, f"logit {float(logit):.6g} violates required label 1"
    else:
        if logit > VALIDATION_TOL:
            return sample, f"logit {float(logit):.6g} violates required label 0"
    last = acts[-1] if acts else list(sample)
    gap = sum(delta[j] * last[j] for j in range(len(last)))
    if gap < Fraction(float(q.epsilon_z)) - VALIDATION_TOL:
        return sample, (
            f"delta gap {float(gap):.6g} below epsilon_z {q.epsilon_z}"
        )
    return sample, None


def assignment_pinned_script(
    m: Mlp, q: QuerySpec, plan: FixPlan, assignments: dict[str, Fraction]
) -> SmtScript:
    """The query script for `plan` with a previous model's unknowns asserted.

    Used to confirm that a solution found under a fixed plan still
    satisfies a weaker (more-free) script.
    """
    base = encode_query(m, q, plan)
    pins = [
        f"(assert (= {sym} {rational_literal(val)}))"
        for sym, val in assignments.items()
        if sym in base.symbols
    ]
    lines = base.text.splitlines()
    idx = lines.index("(check-sat)")
    text = "\n".join(lines[:idx] + pins + lines[idx:]) + "\n"
    return SmtScript(base.logic, text, base.symbols, base.value_symbols)


# -- strategies ---------------------------------------------------------------


def _iter_dir(run_dir: str | Path | None) -> Path | None:
    if run_dir is None:
        return None
    p = Path(run_dir) / "scripts"
    p.mkdir(parents=True, exist_ok=True)
    return p


def _log_status(run_dir, rec: IterationRecord):
    log.info(
        "pass=%d iter=%d free=%d status=%s wall=%.3fs",
        rec.pass_index,
        rec.iteration,
        rec.n_free,
        rec.status,
        rec.wall_time,
    )
    if run_dir is not None:
        with open(Path(run_dir) / "status.log", "a") as fh:
            fh.write(
                f"pass={rec.pass_index} iter={rec.iteration} free={rec.n_free} "
                f"plan={rec.plan_digest} status={rec.status} "
                f"wall={rec.wall_time:.3f} script={rec.script_file or '-'}"
                f"{' cached' if rec.cached else ''}\n"
            )


def _found_outcome(
    m, q, ctx, assignments, iteration, records, pass_runtimes, start
) -> SearchOutcome | None:
    """Build a FOUND outcome, or None when concrete validation rejects it."""
    try:
        gamma, delta = _witness_from(m, q, ctx, assignments)
    except KeyError as exc:
        log.warning("solver model missing symbol %s; treating as unknown", exc)
        return None
    sample, problem = validate_found(m, q, ctx, gamma, delta)
    if problem is not None:
        log.warning("solver model failed concrete validation: %s", problem)
        return None
    return SearchOutcome(
        Outcome.FOUND,
        sample=np.array([float(v) for v in sample]),
        sample_exact=sample,
        witness_delta=delta,
        iteration=iteration,
        records=tuple(records),
        pass_runtimes=tuple(pass_runtimes),
        total_runtime=time.monotonic() - start,
    )


def naive_search(
    m: Mlp,
    q: QuerySpec,
    timeout: float | None = None,
    solver: SolverConfig | None = None,
    run_dir: str | Path | None = None,
) -> SearchOutcome:
    """Single solver call on the all-free query."""
    ctx = validate_query(m, q)
    plan = FixPlan.all_free(m)
    scripts = _iter_dir(run_dir)
    script_path = None if scripts is None else scripts / "iter_1.smt2"
    start = time.monotonic()
    try:
        result = solve(encode_query(m, q, plan), timeout, solver, script_path)
        status_name = result.status.value
        assignments = result.assignments
    except UnsupportedValue as exc:
        log.warning("unsupported solver value: %s", exc)
        result = None
        status_name = "unknown"
        assignments = None
    wall = time.monotonic() - start
    rec = IterationRecord(
        1, 1, plan.n_free, plan.digest(), status_name, wall,
        None if script_path is None else str(script_path),
    )
    _log_status(run_dir, rec)
    if result is not None and result.status is SolveStatus.SAT:
        found = _found_outcome(m, q, ctx, assignments, 1, [rec], [wall], start)
        if found is not None:
            return found
        status_name = "unknown"
    if result is not None and result.status is SolveStatus.UNSAT:
        return SearchOutcome(
            Outcome.UNSAT, records=(rec,), pass_runtimes=(wall,), total_runtime=wall
        )
    return SearchOutcome(
        Outcome.INCONCLUSIVE,
        records=(rec,),
        pass_runtimes=(wall,),
        total_runtime=wall,
        reason=status_name,
    )


def greedy_search(
    m: Mlp,
    d: Dataset,
    q: QuerySpec,
    schedule: tuple[float | None, ...] = (20.0, 60.0, 120.0),
    solver: SolverConfig | None = None,
    run_dir: str | Path | None = None,
    reuse_unsat: bool = True,
) -> SearchOutcome:
    """Greedy ReLU branch exploration driven by decision profiling.

    One pass per schedule entry: iteration i solves the plan with the
    (i-1) lowest-bias nodes unfixed, so iteration n_nodes+1 is the exact
    query.  Unknown/timeout iterations are skipped past but taint any
    final unsat into INCONCLUSIVE.  Plans proven unsat are cached across
    passes unless reuse_unsat is disabled.
    """
    if not schedule:
        raise ValueError("schedule must contain at least one timeout entry")
    ctx = validate_query(m, q)
    profile = compute_dbias(m, d)
    base_plan = initial_fixplan(profile)
    order = fix_order(profile)
    scripts = _iter_dir(run_dir)
    start = time.monotonic()
    records: list[IterationRecord] = []
    pass_runtimes: list[float] = []
    unsat_plans: set[str] = set()

    for pass_index, timeout in enumerate(schedule, start=1):
        pass_start = time.monotonic()
        plan = base_plan
        tainted = False
        final_status = None
        for iteration in range(1, len(order) + 2):
            digest = plan.digest()
            script_file = None if scripts is None else scripts / f"iter_{iteration}.smt2"
            if reuse_unsat and digest in unsat_plans:
                rec = IterationRecord(
                    pass_index, iteration, plan.n_free, digest, "unsat", 0.0,
                    None if script_file is None else str(script_file), cached=True,
                )
                records.append(rec)
                _log_status(run_dir, rec)
                final_status = SolveStatus.UNSAT
            else:
                try:
                    result = solve(encode_query(m, q, plan), timeout, solver, script_file)
                    status = result.status
                    assignments = result.assignments
                except UnsupportedValue as exc:
                    log.warning("unsupported solver value: %s", exc)
                    status, assignments = SolveStatus.UNKNOWN, None
                    result = SolveResult(SolveStatus.UNKNOWN, None, 0.0)
                rec = IterationRecord(
                    pass_index, iteration, plan.n_free, digest, status.value,
                    result.wall_time,
                    None if script_file is None else str(script_file),
                )
                records.append(rec)
                _log_status(run_dir, rec)
                if status is SolveStatus.SAT:
                    pass_runtimes.append(time.monotonic() - pass_start)
                    found = _found_outcome(
                        m, q, ctx, assignments, iteration, records, pass_runtimes, start
                    )
                    if found is not None:
                        return found
                    pass_runtimes.pop()
                    status = SolveStatus.UNKNOWN
                if status is SolveStatus.UNSAT:
                    unsat_plans.add(digest)
                if status in (SolveStatus.UNKNOWN, SolveStatus.TIMEOUT):
                    tainted = True
                final_status = status
            if iteration <= len(order):
                plan = plan.unfix(order[iteration - 1])
        pass_runtimes.append(time.monotonic() - pass_start)
        if final_status is SolveStatus.UNSAT and not tainted:
            return SearchOutcome(
                Outcome.UNSAT,
                records=tuple(records),
                pass_runtimes=tuple(pass_runtimes),
                total_runtime=time.monotonic() - start,
            )
    return SearchOutcome(
        Outcome.INCONCLUSIVE,
        records=tuple(records),
        pass_runtimes=tuple(pass_runtimes),
        total_runtime=time.monotonic() - start,
        reason="unknown or timed-out iterations prevent an unsat verdict",
    )
