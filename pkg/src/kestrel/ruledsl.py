"""A restricted expression DSL for candidate filter-step programs.

A rule program is the canonical Kalman recursion with a fixed set of
template slots around it: innovation transforms, noise scalings, a scalar
gate on the correction, gain blending, posterior blending, and covariance
shrink/clip.  Scalar slots hold expressions over reductions of the step's
vectors and matrices.  The closed primitive set is exactly what the
discovered-algorithm templates need, which keeps execution total: division,
square root and exponential are guarded, candidate programs cannot loop,
and any non-finite intermediate raises instead of propagating.

Surface syntax is an S-expression per program::

    (rule
      (order update-first)
      (s-jitter 1e-10)
      (gate (* 0.5 (+ 1 (tanh (+ (mean (pow y 4)) (pow (std (pow y 2)) 2))))))
      (q-scale (tanh (+ (mean (pow y 2)) (std (pow y 2))))))

``(kf-canonical)`` parses to the canonical program.  Serialization is
canonical: clauses sorted by name, floats printed with 17 significant
digits, so ``parse(serialize(p))`` reproduces ``p`` exactly.

Step contract: an ``update-first`` program receives the current prior and
returns (posterior, next-step prior); a ``predict-first`` program receives
the previous posterior, forms this step's prior internally, and returns
(posterior, this step's prior).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    NumericalFault,
    RuleSyntaxError,
    UnknownPrimitive,
)
from .filters import FilterContext, StepOutput, innovation_solve
from .statespace import BeliefState, nearest_spd

MAX_TEXT_BYTES = 64 * 1024
MAX_NODES = 256
MAX_DEPTH = 16
CONST_RANGE = 1e3
DIV_GUARD = 1e-10
EXP_CLAMP = 50.0

#: Leaf names available to scalar expressions.  All are arrays except where
#: the update has already reduced them; ``k`` is bound only after the gain
#: exists (post-gain slots).
VAR_NAMES = ("y", "x", "z", "q", "r", "p", "h", "f", "i", "k")

_BINARY_OPS = ("+", "-", "*", "/")
_SCALAR_UNARY = ("tanh", "exp", "sqrt")
_ELEMENTWISE = ("abs", "sign")
_REDUCTIONS = ("mean", "std", "norm", "max")
_POW_EXPONENTS = (2, 3, 4)

ORDERS = ("update-first", "predict-first")

_EXPR_SLOTS = ("r_scale", "gate", "cov_scale", "q_scale")


@dataclass(frozen=True)
class RuleProgram:
    """One candidate filter step.  ``None`` slots mean the canonical behavior."""

    order: str = "update-first"
    residual: tuple | None = None      # ("clip" | "sumclip", lo, hi)
    r_scale: object | None = None      # scalar expression
    s_jitter: float = 0.0              # S += jitter * I
    s_floor: float | None = None       # S = max(S, floor) elementwise
    k_blend: tuple | None = None       # (w1, w2): K <- w1*K + w2*sign(K)*max|K|*I
    gate: object | None = None         # scalar expression scaling the correction
    joseph: bool = False               # symmetrized covariance update form
    post_blend: float | None = None    # beta: x <- beta*x + (1-beta)*H^T z
    cov_scale: object | None = None    # scalar expression on posterior covariance
    cov_clip: tuple | None = None      # (lo, hi) elementwise on posterior covariance
    q_scale: object | None = None      # scalar expression on Q in the predict step


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple


def canonical_kf_program() -> RuleProgram:
    """The plain update-then-predict recursion as a rule program."""
    return RuleProgram()


def pin_neutral(program: RuleProgram) -> RuleProgram:
    """Copy with every gate/scale/transform slot pinned to its neutral value.

    The result executes the canonical recursion in the program's own order.
    """
    return RuleProgram(order=program.order)


# --------------------------------------------------------------------------
# expression evaluation

def eval_expr(expr, env):
    """Evaluate an expression against ``env`` (guards applied, never raises
    on domain issues; unknown leaves raise DimensionError)."""
    if isinstance(expr, (int, float)):
        return float(expr)
    if isinstance(expr, str):
        try:
            return env[expr]
        except KeyError:
            raise DimensionError(expr, "leaf not available in this slot")
    op, args = expr[0], expr[1:]
    if op == "+":
        return eval_expr(args[0], env) + eval_expr(args[1], env)
    if op == "-":
        return eval_expr(args[0], env) - eval_expr(args[1], env)
    if op == "*":
        return eval_expr(args[0], env) * eval_expr(args[1], env)
    if op == "/":
        num = eval_expr(args[0], env)
        den = eval_expr(args[1], env)
        if abs(den) < DIV_GUARD:
            den = DIV_GUARD if den >= 0 else -DIV_GUARD
        return num / den
    if op == "tanh":
        return math.tanh(eval_expr(args[0], env))
    if op == "exp":
        return math.exp(min(EXP_CLAMP, max(-EXP_CLAMP, eval_expr(args[0], env))))
    if op == "sqrt":
        return math.sqrt(max(0.0, eval_expr(args[0], env)))
    if op == "clip":
        return min(float(args[2]), max(float(args[1]), eval_expr(args[0], env)))
    if op == "abs":
        return np.abs(eval_expr(args[0], env))
    if op == "sign":
        return np.sign(eval_expr(args[0], env))
    if op == "pow":
        return eval_expr(args[0], env) ** int(args[1])
    if op == "mean":
        return float(np.mean(eval_expr(args[0], env)))
    if op == "std":
        return float(np.std(eval_expr(args[0], env)))
    if op == "norm":
        return float(np.linalg.norm(eval_expr(args[0], env)))
    if op == "max":
        return float(np.max(eval_expr(args[0], env)))
    raise UnknownPrimitive(op)


def expr_kind(expr):
    """Static type of an expression: "scalar" or "array".

    Raises DimensionError where kinds are misused (e.g. tanh of a vector).
    """
    if isinstance(expr, (int, float)):
        return "scalar"
    if isinstance(expr, str):
        if expr not in VAR_NAMES:
            raise UnknownPrimitive(expr)
        return "array"
    op, args = expr[0], expr[1:]
    if op in _BINARY_OPS:
        if expr_kind(args[0]) != "scalar" or expr_kind(args[1]) != "scalar":
            raise DimensionError(expr, f"operands of {op!r} must be scalar")
        return "scalar"
    if op in _SCALAR_UNARY:
        if expr_kind(args[0]) != "scalar":
            raise DimensionError(expr, f"argument of {op!r} must be scalar")
        return "scalar"
    if op == "clip":
        if expr_kind(args[0]) != "scalar":
            raise DimensionError(expr, "argument of 'clip' must be scalar")
        return "scalar"
    if op in _ELEMENTWISE:
        return expr_kind(args[0])
    if op == "pow":
        return expr_kind(args[0])
    if op in _REDUCTIONS:
        expr_kind(args[0])
        return "scalar"
    raise UnknownPrimitive(op)


def expr_vars(expr, out=None):
    """Set of leaf names an expression references."""
    if out is None:
        out = set()
    if isinstance(expr, str):
        out.add(expr)
    elif isinstance(expr, tuple):
        for a in expr[1:]:
            expr_vars(a, out)
    return out


def expr_nodes(expr) -> int:
    if isinstance(expr, tuple):
        return 1 + sum(expr_nodes(a) for a in expr[1:])
    return 1


def expr_depth(expr) -> int:
    if isinstance(expr, tuple):
        return 1 + max(expr_depth(a) for a in expr[1:])
    return 1


def expr_constants(expr, out=None):
    if out is None:
        out = []
    if isinstance(expr, (int, float)):
        out.append(float(expr))
    elif isinstance(expr, tuple):
        for a in expr[1:]:
            expr_constants(a, out)
    return out


# --------------------------------------------------------------------------
# validation

def _clauses_of(program: RuleProgram):
    """(clause-name, parts) pairs for every non-default slot, plus order."""
    p = program
    clauses = [("order", (p.order,))]
    if p.residual is not None:
        kind, lo, hi = p.residual
        name = "clip-residual" if kind == "clip" else "sumclip-residual"
        clauses.append((name, (lo, hi)))
    if p.r_scale is not None:
        clauses.append(("r-scale", (p.r_scale,)))
    if p.s_jitter:
        clauses.append(("s-jitter", (p.s_jitter,)))
    if p.s_floor is not None:
        clauses.append(("s-floor", (p.s_floor,)))
    if p.k_blend is not None:
        clauses.append(("k-blend", tuple(p.k_blend)))
    if p.gate is not None:
        clauses.append(("gate", (p.gate,)))
    if p.joseph:
        clauses.append(("joseph", ()))
    if p.post_blend is not None:
        clauses.append(("post-blend", (p.post_blend,)))
    if p.cov_scale is not None:
        clauses.append(("scale-cov", (p.cov_scale,)))
    if p.cov_clip is not None:
        clauses.append(("clip-cov", tuple(p.cov_clip)))
    if p.q_scale is not None:
        clauses.append(("q-scale", (p.q_scale,)))
    return clauses


def program_nodes(program: RuleProgram) -> int:
    total = 1  # the (rule ...) node
    for _, parts in _clauses_of(program):
        total += 1
        for part in parts:
            total += expr_nodes(part) if not isinstance(part, str) else 1
    return total


def program_depth(program: RuleProgram) -> int:
    deepest = 1
    for _, parts in _clauses_of(program):
        for part in parts:
            if isinstance(part, tuple):
                deepest = max(deepest, expr_depth(part))
    return 2 + deepest  # rule -> clause -> expression tree


def validate(program: RuleProgram) -> ValidationReport:
    """Check structural limits, constant ranges, types and slot staging."""
    v = []
    p = program
    if p.order not in ORDERS:
        v.append(("order", f"unknown order {p.order!r}"))
    n_nodes = program_nodes(p)
    if n_nodes > MAX_NODES:
        v.append(("program", f"node count {n_nodes} exceeds {MAX_NODES}"))
    depth = program_depth(p)
    if depth > MAX_DEPTH:
        v.append(("program", f"depth {depth} exceeds {MAX_DEPTH}"))

    def check_const(name, value, lo=None, nonneg=False):
        x = float(value)
        if not math.isfinite(x):
            v.append((name, "constant is not finite"))
        elif abs(x) > CONST_RANGE:
            v.append((name, f"constant {x:g} outside [-{CONST_RANGE:g}, {CONST_RANGE:g}]"))
        if nonneg and x < 0:
            v.append((name, "constant must be >= 0"))

    def check_expr(slot, expr):
        try:
            if expr_kind(expr) != "scalar":
                v.append((slot, "expression must be scalar-valued"))
        except (DimensionError, UnknownPrimitive) as exc:
            v.append((slot, str(exc)))
            return
        for c in expr_constants(expr):
            check_const(slot, c)
        for sub in _walk(expr):
            if isinstance(sub, tuple) and sub[0] == "pow" and float(sub[2]) not in (2.0, 3.0, 4.0):
                v.append((slot, f"pow exponent {sub[2]} not in {_POW_EXPONENTS}"))
            if isinstance(sub, tuple) and sub[0] == "clip" and float(sub[2]) > float(sub[3]):
                v.append((slot, "clip bounds must satisfy lo <= hi"))

    if p.residual is not None:
        kind, lo, hi = p.residual
        if kind not in ("clip", "sumclip"):
            v.append(("residual", f"unknown residual transform {kind!r}"))
        check_const("residual", lo)
        check_const("residual", hi)
        if float(lo) > float(hi):
            v.append(("residual", "bounds must satisfy lo <= hi"))
    check_const("s-jitter", p.s_jitter, nonneg=True)
    if p.s_floor is not None:
        check_const("s-floor", p.s_floor, nonneg=True)
    if p.k_blend is not None:
        for w in p.k_blend:
            check_const("k-blend", w)
    if p.post_blend is not None:
        check_const("post-blend", p.post_blend)
        if not 0.0 <= float(p.post_blend) <= 1.0:
            v.append(("post-blend", "blend weight must lie in [0, 1]"))
    if p.cov_clip is not None:
        lo, hi = p.cov_clip
        check_const("clip-cov", lo)
        check_const("clip-cov", hi)
        if float(lo) > float(hi):
            v.append(("clip-cov", "bounds must satisfy lo <= hi"))

    for slot in _EXPR_SLOTS:
        expr = getattr(p, slot)
        if expr is not None:
            check_expr(slot, expr)
    # The gain does not exist yet when R is scaled, nor (in predict-first
    # order) when Q is scaled during the leading prediction.
    if p.r_scale is not None and "k" in expr_vars(p.r_scale):
        v.append(("r_scale", "gain 'k' is not available in this slot"))
    if p.order == "predict-first" and p.q_scale is not None and "k" in expr_vars(p.q_scale):
        v.append(("q_scale", "gain 'k' is not available before the update in predict-first order"))

    return ValidationReport(ok=not v, violations=tuple(v))


def _walk(expr):
    yield expr
    if isinstance(expr, tuple):
        for a in expr[1:]:
            yield from _walk(a)


# --------------------------------------------------------------------------
# execution

def _finite(arr, stage):
    if not np.all(np.isfinite(arr)):
        raise NumericalFault(stage)
    return arr


def _apply_residual(residual, y):
    if residual is None:
        return y
    kind, lo, hi = residual
    if kind == "clip":
        return np.clip(y, lo, hi)
    return np.maximum(y, lo) + np.minimum(y, hi)


def execute(program: RuleProgram, ctx: FilterContext) -> StepOutput:
    """Run one rule step.  Deterministic; requires ``validate(program).ok``.

    Raises NumericalFault on any non-finite intermediate and propagates
    SingularInnovation from the gain solve.
    """
    with np.errstate(all="ignore"):  # stage checks raise; warnings are noise
        return _execute(program, ctx)


def _execute(program: RuleProgram, ctx: FilterContext) -> StepOutput:
    model, belief = ctx.model, ctx.belief
    z, H = ctx.observation, ctx.H
    F, Q, R = model.F, model.Q, model.R
    n = model.state_dim
    m = model.obs_dim
    eye_n = np.eye(n)
    t0 = belief.time_index

    env = {"z": z, "q": Q, "r": R, "h": H, "f": F, "i": eye_n}

    if program.order == "predict-first":
        x_prior = F @ belief.mean
        y = _apply_residual(program.residual, z - H @ x_prior)
        _finite(y, "innovation")
        env.update(y=y, x=x_prior, p=belief.cov)
        q_s = eval_expr(program.q_scale, env) if program.q_scale is not None else None
        P_prior = F @ belief.cov @ F.T + (q_s * Q if q_s is not None else Q)
        _finite(P_prior, "prediction")
        env["p"] = P_prior
        prediction = BeliefState(mean=x_prior, cov=nearest_spd(P_prior), time_index=t0 + 1)
        post_time = t0 + 1
    else:
        x_prior, P_prior = belief.mean, belief.cov
        y = _apply_residual(program.residual, z - H @ x_prior)
        _finite(y, "innovation")
        env.update(y=y, x=x_prior, p=P_prior)
        prediction = None
        post_time = t0

    R_eff = R
    if program.r_scale is not None:
        R_eff = eval_expr(program.r_scale, env) * R
    S = H @ P_prior @ H.T + R_eff
    if program.s_jitter:
        S = S + program.s_jitter * np.eye(m)
    if program.s_floor is not None:
        S = np.maximum(S, program.s_floor)
    _finite(S, "innovation-covariance")

    K = innovation_solve(S, H @ P_prior).T
    if program.k_blend is not None:
        w1, w2 = program.k_blend
        K = w1 * K + w2 * np.sign(K) * np.max(np.abs(K)) * np.eye(n, m)
    _finite(K, "gain")
    env["k"] = K

    gK = eval_expr(program.gate, env) * K if program.gate is not None else K
    x_post = x_prior + gK @ y
    if program.joseph:
        A = eye_n - gK @ H
        P_post = A @ P_prior @ A.T + gK @ R_eff @ gK.T
    else:
        P_post = (eye_n - gK @ H) @ P_prior
    if program.post_blend is not None:
        beta = program.post_blend
        x_post = beta * x_post + (1.0 - beta) * (H.T @ z)
    if program.cov_scale is not None:
        P_post = eval_expr(program.cov_scale, env) * P_post
    if program.cov_clip is not None:
        P_post = np.clip(P_post, program.cov_clip[0], program.cov_clip[1])
    _finite(x_post, "posterior-mean")
    _finite(P_post, "posterior-cov")
    posterior = BeliefState(mean=x_post, cov=nearest_spd(P_post), time_index=post_time)

    if program.order == "predict-first":
        return StepOutput(posterior=posterior, prediction=prediction)

    q_s = eval_expr(program.q_scale, env) if program.q_scale is not None else None
    x_next = F @ x_post
    P_next = F @ posterior.cov @ F.T + (q_s * Q if q_s is not None else Q)
    _finite(x_next, "prediction")
    _finite(P_next, "prediction")
    prediction = BeliefState(mean=x_next, cov=nearest_spd(P_next), time_index=t0 + 1)
    return StepOutput(posterior=posterior, prediction=prediction)


# --------------------------------------------------------------------------
# parsing

def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append((c, i))
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def _read_sexp(tokens, k):
    if k >= len(tokens):
        raise RuleSyntaxError("unexpected end of input")
    tok, pos = tokens[k]
    if tok == "(":
        items = []
        k += 1
        while True:
            if k >= len(tokens):
                raise RuleSyntaxError("unclosed '('", pos)
            if tokens[k][0] == ")":
                return items, k + 1, pos
            node, k, _ = _read_sexp(tokens, k)
            items.append(node)
    if tok == ")":
        raise RuleSyntaxError("unexpected ')'", pos)
    return _atom(tok, pos), k + 1, pos


def _atom(tok, pos):
    try:
        return float(tok)
    except ValueError:
        return tok


def _require_number(x, where):
    if not isinstance(x, float):
        raise RuleSyntaxError(f"{where}: expected a number, got {x!r}")
    return x


def _expr_from_sexp(node):
    if isinstance(node, float):
        return node
    if isinstance(node, str):
        if node not in VAR_NAMES:
            raise UnknownPrimitive(node)
        return node
    if not node:
        raise RuleSyntaxError("empty expression")
    op = node[0]
    args = node[1:]
    if not isinstance(op, str):
        raise RuleSyntaxError(f"operator expected, got {op!r}")
    if op in _BINARY_OPS:
        if len(args) != 2:
            raise RuleSyntaxError(f"{op!r} takes 2 arguments")
        return (op, _expr_from_sexp(args[0]), _expr_from_sexp(args[1]))
    if op in _SCALAR_UNARY + _ELEMENTWISE + _REDUCTIONS:
        if len(args) != 1:
            raise RuleSyntaxError(f"{op!r} takes 1 argument")
        return (op, _expr_from_sexp(args[0]))
    if op == "clip":
        if len(args) != 3:
            raise RuleSyntaxError("'clip' takes 3 arguments")
        return ("clip", _expr_from_sexp(args[0]),
                _require_number(args[1], "clip"), _require_number(args[2], "clip"))
    if op == "pow":
        if len(args) != 2:
            raise RuleSyntaxError("'pow' takes 2 arguments")
        exp = _require_number(args[1], "pow")
        return ("pow", _expr_from_sexp(args[0]),
                int(exp) if exp == int(exp) else exp)
    raise UnknownPrimitive(op)


def parse(text: str) -> RuleProgram:
    """Parse one rule program from S-expression text (<= 64 KiB)."""
    if len(text.encode("utf-8")) > MAX_TEXT_BYTES:
        raise RuleSyntaxError(f"program text exceeds {MAX_TEXT_BYTES} bytes")
    tokens = _tokenize(text)
    if not tokens:
        raise RuleSyntaxError("empty program text")
    node, k, pos = _read_sexp(tokens, 0)
    if k != len(tokens):
        raise RuleSyntaxError("trailing content after program", tokens[k][1])
    if not isinstance(node, list) or not node:
        raise RuleSyntaxError("program must be a list", pos)
    head = node[0]
    if head == "kf-canonical":
        if len(node) != 1:
            raise RuleSyntaxError("(kf-canonical) takes no arguments", pos)
        return canonical_kf_program()
    if head != "rule":
        raise UnknownPrimitive(head if isinstance(head, str) else repr(head))

    fields = {}

    def put(name, value):
        if name in fields:
            raise RuleSyntaxError(f"duplicate clause {name!r}", pos)
        fields[name] = value

    for clause in node[1:]:
        if not isinstance(clause, list) or not clause or not isinstance(clause[0], str):
            raise RuleSyntaxError(f"bad clause {clause!r}", pos)
        name, args = clause[0], clause[1:]
        if name == "order":
            if len(args) != 1 or args[0] not in ORDERS:
                raise RuleSyntaxError(f"(order ...) expects one of {ORDERS}", pos)
            put("order", args[0])
        elif name in ("clip-residual", "sumclip-residual"):
            if len(args) != 2:
                raise RuleSyntaxError(f"({name} lo hi) expects 2 numbers", pos)
            kind = "clip" if name == "clip-residual" else "sumclip"
            put("residual", (kind, _require_number(args[0], name),
                             _require_number(args[1], name)))
        elif name == "r-scale":
            if len(args) != 1:
                raise RuleSyntaxError("(r-scale expr) expects 1 expression", pos)
            put("r_scale", _expr_from_sexp(args[0]))
        elif name == "s-jitter":
            if len(args) != 1:
                raise RuleSyntaxError("(s-jitter c) expects 1 number", pos)
            put("s_jitter", _require_number(args[0], name))
        elif name == "s-floor":
            if len(args) != 1:
                raise RuleSyntaxError("(s-floor c) expects 1 number", pos)
            put("s_floor", _require_number(args[0], name))
        elif name == "k-blend":
            if len(args) != 2:
                raise RuleSyntaxError("(k-blend w1 w2) expects 2 numbers", pos)
            put("k_blend", (_require_number(args[0], name), _require_number(args[1], name)))
        elif name == "gate":
            if len(args) != 1:
                raise RuleSyntaxError("(gate expr) expects 1 expression", pos)
            put("gate", _expr_from_sexp(args[0]))
        elif name == "joseph":
            if args:
                raise RuleSyntaxError("(joseph) takes no arguments", pos)
            put("joseph", True)
        elif name == "post-blend":
            if len(args) != 1:
                raise RuleSyntaxError("(post-blend beta) expects 1 number", pos)
            put("post_blend", _require_number(args[0], name))
        elif name == "scale-cov":
            if len(args) != 1:
                raise RuleSyntaxError("(scale-cov expr) expects 1 expression", pos)
            put("cov_scale", _expr_from_sexp(args[0]))
        elif name == "clip-cov":
            if len(args) != 2:
                raise RuleSyntaxError("(clip-cov lo hi) expects 2 numbers", pos)
            put("cov_clip", (_require_number(args[0], name), _require_number(args[1], name)))
        elif name == "q-scale":
            if len(args) != 1:
                raise RuleSyntaxError("(q-scale expr) expects 1 expression", pos)
            put("q_scale", _expr_from_sexp(args[0]))
        else:
            raise UnknownPrimitive(name)
    return RuleProgram(**fields)


# --------------------------------------------------------------------------
# serialization

def _fmt_number(x) -> str:
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.17g}"


def _fmt_expr(expr) -> str:
    if isinstance(expr, (int, float)):
        return _fmt_number(expr)
    if isinstance(expr, str):
        return expr
    return "(" + " ".join([expr[0]] + [_fmt_expr(a) for a in expr[1:]]) + ")"


def serialize(program: RuleProgram) -> str:
    """Canonical text form: clauses sorted by name, floats at 17 digits."""
    parts = []
    for name, args in sorted(_clauses_of(program)):
        rendered = " ".join(a if isinstance(a, str) else _fmt_expr(a) for a in args)
        parts.append(f"({name} {rendered})" if rendered else f"({name})")
    return "(rule " + " ".join(parts) + ")"


def program_id(program: RuleProgram) -> str:
    """Stable short identifier: hash of the canonical serialization."""
    return hashlib.sha256(serialize(program).encode("utf-8")).hexdigest()[:12]


# --------------------------------------------------------------------------
# built-in library: discovered-rule transcriptions

def gated_mot_program() -> RuleProgram:
    """Gated update with innovation-statistics gate and damped process noise.

    gate = 0.5 * (1 + tanh(mean(y^4) + std(y^2)^2)); the predicted
    covariance uses tanh(mean(y^2) + std(y^2)) * Q.
    """
    gate = ("*", 0.5, ("+", 1.0, ("tanh", ("+", ("mean", ("pow", "y", 4)),
                                           ("pow", ("std", ("pow", "y", 2)), 2)))))
    q_scale = ("tanh", ("+", ("mean", ("pow", "y", 2)), ("std", ("pow", "y", 2))))
    return RuleProgram(order="update-first", s_jitter=1e-10, gate=gate, q_scale=q_scale)


def free_nsp_program() -> RuleProgram:
    """Summed residual clip, symmetrized update, posterior blend, covariance shrink."""
    return RuleProgram(order="update-first",
                       residual=("sumclip", -10.0, 10.0),
                       s_jitter=1e-8,
                       joseph=True,
                       post_blend=0.9,
                       cov_scale=0.8)


def free_se_program() -> RuleProgram:
    """Predict-first step with noise scalings, gain blend and covariance clip."""
    return RuleProgram(order="predict-first",
                       q_scale=0.95,
                       r_scale=0.8,
                       s_jitter=1e-12,
                       s_floor=1e-14,
                       k_blend=(0.65, 0.35),
                       cov_scale=0.85,
                       cov_clip=(1e-20, 250.0))


def builtin_library() -> list:
    """Named library of transcribed discovered rules."""
    return [
        ("gated-mot", gated_mot_program()),
        ("free-nsp", free_nsp_program()),
        ("free-se", free_se_program()),
    ]
