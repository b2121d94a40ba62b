"""SMT-LIB 2 emission: network semantics, fix plans, sensitive-sample queries.

Every numeric literal is the exact decimal expansion of the underlying
binary float, so the symbolic network is the concrete network, not an
approximation of it.  ReLU nodes are encoded relationally and can be fixed
to the identity or zero branch per a FixPlan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .attack import top_inflation_indices
from .errors import DomainError, EncodingError, QuerySpecError
from .mlp import Mlp, exact_decimal_str, forward, sigmoid
from .profiling import FixPlan, NodeStatus

RELU_DEF = "(define-fun relu ((z Real) (a Real)) Bool (= a (ite (<= z 0.0) 0.0 z)))"
ID_DEF = "(define-fun id ((z Real) (a Real)) Bool (and (>= z 0.0) (= a z)))"
ZERO_DEF = "(define-fun zero ((z Real) (a Real)) Bool (and (< z 0.0) (= a 0.0)))"

_STATUS_FUN = {
    NodeStatus.FREE: "relu",
    NodeStatus.FIXED_IDENTITY: "id",
    NodeStatus.FIXED_ZERO: "zero",
}


def emit_exact_literal(w) -> str:
    """Exact decimal SMT literal for a finite binary float.

    Negative values use the SMT-LIB unary-minus form, e.g. (- 1.0).
    """
    v = float(w)
    if not math.isfinite(v):
        raise DomainError(f"cannot emit non-finite literal {v!r}")
    body = exact_decimal_str(abs(v))
    if "." not in body:
        body += ".0"
    return f"(- {body})" if v < 0 else body


def rational_literal(r: Fraction) -> str:
    """SMT literal for an exact rational, using (/ p q) when needed."""
    if r.denominator == 1:
        body = f"{abs(r.numerator)}.0"
    else:
        body = f"(/ {abs(r.numerator)} {r.denominator})"
    return f"(- {body})" if r < 0 else body


def modeled_sensitivity(z0: float, eps: float) -> float:
    """Probability gain when the logit moves from z0 to z0 + eps."""
    return sigmoid(z0 + eps) - sigmoid(z0)


class DeltaMode(Enum):
    """How the weight deltas enter the query.

    EXISTENTIAL leaves them as solver unknowns inside their boxes (the
    delta/activation products make the script non-linear).  PESSIMISTIC
    pins them to the box corner that minimizes the tweaked-minus-original
    logit gap, which keeps the script linear and makes any solution robust
    over the whole delta box.
    """

    EXISTENTIAL = "existential"
    PESSIMISTIC = "pessimistic"


@dataclass(frozen=True)
class QuerySpec:
    """Everything bounding the sensitive-sample search around one base sample."""

    x0: tuple[float, ...]
    gamma_radius: float = 0.2
    epsilon_z: float = 1.0
    theta: float = 0.01
    required_label: int | None = None  # None: keep x0's predicted label
    target_label: int = 1
    inflate_fraction: float = 0.3
    delta_e_range: tuple[float, float] = (0.05, 0.25)
    delta_d_range: tuple[float, float] = (-0.05, 0.0)
    delta_mode: DeltaMode = DeltaMode.EXISTENTIAL

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if not self.x0:
            raise QuerySpecError("x0 must be non-empty")
        if any(not 0.0 <= v <= 1.0 for v in self.x0):
            raise QuerySpecError("x0 must lie in the [0, 1] sample box")
        # radius 0 is allowed as the degenerate bound forcing s = x0
        if self.gamma_radius < 0.0:
            raise QuerySpecError(f"gamma_radius must be >= 0, got {self.gamma_radius}")
        if self.epsilon_z <= 0.0:
            raise QuerySpecError(f"epsilon_z must be > 0, got {self.epsilon_z}")
        if self.theta <= 0.0:
            raise QuerySpecError(f"theta must be > 0, got {self.theta}")
        if self.required_label not in (None, 0, 1):
            raise QuerySpecError(f"required_label must be 0/1/None")
        if self.target_label != 1:
            raise QuerySpecError(
                "only target_label 1 is supported: the inflate/deflate delta "
                "signature models an attack that raises the logit"
            )
        if not 0.0 < self.inflate_fraction <= 1.0:
            raise QuerySpecError(f"inflate_fraction in (0, 1], got {self.inflate_fraction}")
        lo_e, hi_e = self.delta_e_range
        if not 0.0 < lo_e <= hi_e:
            raise QuerySpecError(f"delta_e range needs 0 < lo <= hi, got {self.delta_e_range}")
        lo_d, hi_d = self.delta_d_range
        if not lo_d <= hi_d <= 0.0:
            raise QuerySpecError(f"delta_d range must be non-positive, got {self.delta_d_range}")

    @property
    def x0_array(self) -> np.ndarray:
        return np.asarray(self.x0, dtype=np.float64)


@dataclass(frozen=True)
class QueryContext:
    """Model-resolved view of a QuerySpec."""

    z0: float
    required_label: int
    inflate_indices: tuple[int, ...]
    deflate_indices: tuple[int, ...]
    modeled_beta: float


def validate_query(m: Mlp, q: QuerySpec) -> QueryContext:
    """Resolve and sanity-check a query against a concrete model.

    Refuses specs whose modeled sensitivity at the base sample falls below
    the detection threshold: a satisfying sample would then prove nothing.
    """
    if len(q.x0) != m.input_width:
        raise QuerySpecError(
            f"x0 has {len(q.x0)} features, model expects {m.input_width}"
        )
    trace = forward(m, q.x0_array)
    required = trace.label if q.required_label is None else q.required_label
    beta = modeled_sensitivity(trace.logit, q.epsilon_z)
    if beta < q.theta:
        raise QuerySpecError(
            f"modeled sensitivity {beta:.6g} at base logit {trace.logit:.4f} "
            f"with epsilon_z={q.epsilon_z} is below theta={q.theta}; raise "
            f"epsilon_z or pick a base sample nearer the decision boundary"
        )
    out_w = m.layers[-1].weights[0]
    inflated = top_inflation_indices(out_w, q.inflate_fraction)
    deflated = [j for j in range(out_w.size) if j not in set(inflated)]
    return QueryContext(trace.logit, required, tuple(inflated), tuple(deflated), beta)


@dataclass(frozen=True)
class NetworkFragment:
    """Declarations and assertions encoding one network copy."""

    lines: tuple[str, ...]
    symbols: tuple[str, ...]
    defs_used: frozenset[str]
    n_activation_asserts: int
    n_linear_asserts: int


@dataclass(frozen=True)
class SmtScript:
    logic: str
    text: str
    symbols: tuple[str, ...]
    value_symbols: tuple[str, ...]


def _input_syms(m: Mlp) -> list[str]:
    return [f"s_{i}" for i in range(m.input_width)]


def _affine_expr(weights, bias, prev_syms) -> str:
    terms = [
        f"(* {emit_exact_literal(w)} {sym})" for w, sym in zip(weights, prev_syms)
    ]
    return f"(+ {' '.join(terms)} {emit_exact_literal(bias)})"


def encode_network(
    m: Mlp, plan: FixPlan, tag: str = "", declare_inputs: bool = True
) -> NetworkFragment:
    """Emit one network copy: z/a declarations, affine and activation asserts.

    `tag` suffixes every z/a symbol and the logit symbol so an original and
    a tweaked copy can coexist in one script; inputs are always the shared
    unsuffixed s_i.
    """
    plan.check_covers(m)
    statuses = plan.as_dict()
    suffix = f"_{tag}" if tag else ""
    lines: list[str] = []
    symbols: list[str] = []
    defs_used: set[str] = set()
    n_act = n_lin = 0

    prev = _input_syms(m)
    if declare_inputs:
        for sym in prev:
            lines.append(f"(declare-const {sym} Real)")
            symbols.append(sym)
    for l, layer in enumerate(m.layers[:-1], start=1):
        current = []
        for i in range(layer.out_width):
            z_sym = f"z_{l}_{i}{suffix}"
            a_sym = f"a_{l}_{i}{suffix}"
            lines.append(f"(declare-const {z_sym} Real)")
            lines.append(f"(declare-const {a_sym} Real)")
            symbols.extend((z_sym, a_sym))
            lines.append(
                f"(assert (= {z_sym} {_affine_expr(layer.weights[i], layer.bias[i], prev)}))"
            )
            n_lin += 1
            fun = _STATUS_FUN[statuses[(l, i)]]
            defs_used.add(fun)
            lines.append(f"(assert ({fun} {z_sym} {a_sym}))")
            n_act += 1
            # redundant bound (any activation branch implies it); gives
            # non-linear solver backends a cheap linear handle
            lines.append(f"(assert (>= {a_sym} 0.0))")
            current.append(a_sym)
        prev = current
    out = m.layers[-1]
    logit_sym = f"Z{tag}"
    lines.append(f"(declare-const {logit_sym} Real)")
    symbols.append(logit_sym)
    lines.append(
        f"(assert (= {logit_sym} {_affine_expr(out.weights[0], out.bias[0], prev)}))"
    )
    n_lin += 1
    return NetworkFragment(
        tuple(lines), tuple(symbols), frozenset(defs_used), n_act, n_lin
    )


def _def_lines(defs_used) -> list[str]:
    lines = []
    for name, text in (("relu", RELU_DEF), ("id", ID_DEF), ("zero", ZERO_DEF)):
        if name in defs_used:
            lines.append(text)
    return lines


def _last_hidden_syms(m: Mlp) -> list[str]:
    if len(m.layers) == 1:
        return _input_syms(m)
    l = len(m.layers) - 1
    return [f"a_{l}_{i}" for i in range(m.layers[-2].out_width)]


def fold_corner_weight(w: float, delta: float) -> float:
    """Output weight with the pessimistic corner delta folded in (one float64 add)."""
    return float(np.float64(w) + np.float64(delta))


def pessimistic_corner_deltas(m: Mlp, q: QuerySpec, ctx: QueryContext) -> dict[int, Fraction]:
    """Exact deltas the PESSIMISTIC script applies to each output weight."""
    out_w = m.layers[-1].weights[0]
    deltas = {}
    for j in ctx.inflate_indices:
        deltas[j] = Fraction(fold_corner_weight(out_w[j], q.delta_e_range[0])) - Fraction(
            float(out_w[j])
        )
    for j in ctx.deflate_indices:
        deltas[j] = Fraction(fold_corner_weight(out_w[j], q.delta_d_range[0])) - Fraction(
            float(out_w[j])
        )
    return deltas


def encode_query(m: Mlp, q: QuerySpec, plan: FixPlan) -> SmtScript:
    """Full sensitive-sample query for one ReLU fix plan.

    Asserts, in order: the transform box around the base sample, the sample
    box, one (shared-hidden-prefix) network copy with its label constraint,
    the delta-bounded tweaked logit, the redundant gap identity
    Ztw - Z = delta . a, and the satisfying-logit-threshold condition.
    """
    ctx = validate_query(m, q)
    existential = q.delta_mode is DeltaMode.EXISTENTIAL
    logic = "QF_NRA" if existential else "QF_LRA"

    net = encode_network(m, plan, declare_inputs=False)
    body: list[str] = []
    symbols: list[str] = []

    gammas = [f"g_{i}" for i in range(m.input_width)]
    radius = emit_exact_literal(q.gamma_radius)
    neg_radius = emit_exact_literal(-q.gamma_radius)
    for g in gammas:
        body.append(f"(declare-const {g} Real)")
        symbols.append(g)
        body.append(f"(assert (and (<= {g} {radius}) (>= {g} {neg_radius})))")
    for sym, g, v in zip(_input_syms(m), gammas, q.x0):
        body.append(f"(declare-const {sym} Real)")
        symbols.append(sym)
        body.append(f"(assert (= {sym} (+ {emit_exact_literal(v)} {g})))")
        body.append(f"(assert (and (<= 0.0 {sym}) (<= {sym} 1.0)))")

    body.extend(net.lines)
    symbols.extend(net.symbols)

    comparator = ">" if ctx.required_label == 1 else "<"
    body.append(f"(assert ({comparator} Z 0.0))")

    out = m.layers[-1]
    acts = _last_hidden_syms(m)
    delta_syms: dict[int, str] = {}
    value_symbols = list(gammas)
    if existential:
        lo_e, hi_e = (emit_exact_literal(v) for v in q.delta_e_range)
        lo_d = emit_exact_literal(q.delta_d_range[0])
        hi_d = emit_exact_literal(q.delta_d_range[1])
        for j in ctx.inflate_indices:
            d = f"d_e_{j}"
            delta_syms[j] = d
            body.append(f"(declare-const {d} Real)")
            body.append(f"(assert (and (<= {lo_e} {d}) (<= {d} {hi_e})))")
        for j in ctx.deflate_indices:
            d = f"d_d_{j}"
            delta_syms[j] = d
            body.append(f"(declare-const {d} Real)")
            body.append(f"(assert (and (<= {lo_d} {d}) (<= {d} {hi_d})))")
        symbols.extend(delta_syms[j] for j in sorted(delta_syms))
        value_symbols.extend(delta_syms[j] for j in sorted(delta_syms))
        tweaked = [
            f"(* (+ {emit_exact_literal(out.weights[0][j])} {delta_syms[j]}) {acts[j]})"
            for j in range(out.weights[0].size)
        ]
        gap_terms = [
            f"(* {delta_syms[j]} {acts[j]})" for j in range(out.weights[0].size)
        ]
    else:
        corner = {
            j: q.delta_e_range[0] if j in set(ctx.inflate_indices) else q.delta_d_range[0]
            for j in range(out.weights[0].size)
        }
        tweaked = [
            f"(* {emit_exact_literal(fold_corner_weight(out.weights[0][j], corner[j]))} {acts[j]})"
            for j in range(out.weights[0].size)
        ]
        gap_terms = [
            f"(* (- {emit_exact_literal(fold_corner_weight(out.weights[0][j], corner[j]))} "
            f"{emit_exact_literal(out.weights[0][j])}) {acts[j]})"
            for j in range(out.weights[0].size)
        ]

    body.append("(declare-const Ztw Real)")
    symbols.append("Ztw")
    body.append(
        f"(assert (= Ztw (+ {' '.join(tweaked)} {emit_exact_literal(out.bias[0])})))"
    )
    # redundant by construction; cross-checks the shared-prefix encoding
    body.append(f"(assert (= (- Ztw Z) (+ {' '.join(gap_terms)})))")
    body.append(f"(assert (>= (- Ztw Z) {emit_exact_literal(q.epsilon_z)}))")
    if existential:
        # best-corner cut: delta_e <= hi_e, delta_d <= 0 and a >= 0 make
        # hi_e . a_e >= eps a consequence of the gap condition; stating it
        # linearly prunes the search dramatically for NRA backends
        hi_e = emit_exact_literal(q.delta_e_range[1])
        corner_terms = [f"(* {hi_e} {acts[j]})" for j in ctx.inflate_indices]
        body.append(
            f"(assert (>= (+ {' '.join(corner_terms)} 0.0) "
            f"{emit_exact_literal(q.epsilon_z)}))"
        )

    lines = [
        f"(set-logic {logic})",
        f"; sensitive-sample query: net={m.dims_label} plan={plan.digest()} mode={q.delta_mode.value}",
        *_def_lines(net.defs_used),
        *body,
        "(check-sat)",
        f"(get-value ({' '.join(value_symbols)}))",
    ]
    return SmtScript(logic, "\n".join(lines) + "\n", tuple(symbols), tuple(value_symbols))


def encode_logit_probe(m: Mlp, x, plan: FixPlan | None = None) -> SmtScript:
    """Script asserting a concrete input and asking for the logit value."""
    plan = plan or FixPlan.all_free(m)
    net = encode_network(m, plan)
    x_arr = np.asarray(x, dtype=np.float64)
    if x_arr.shape != (m.input_width,):
        raise EncodingError(
            f"probe input has shape {x_arr.shape}, model expects ({m.input_width},)"
        )
    asserts = [
        f"(assert (= {sym} {emit_exact_literal(v)}))"
        for sym, v in zip(_input_syms(m), x_arr)
    ]
    lines = [
        "(set-logic QF_LRA)",
        f"; logit probe: net={m.dims_label} plan={plan.digest()}",
        *_def_lines(net.defs_used),
        *net.lines,
        *asserts,
        "(check-sat)",
        "(get-value (Z))",
    ]
    return SmtScript("QF_LRA", "\n".join(lines) + "\n", net.symbols, ("Z",))
