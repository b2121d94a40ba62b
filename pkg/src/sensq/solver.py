"""External SMT solver driver.

One solve() call owns one child process: the script goes to a file, the
solver runs with a wall-clock timeout, stdout is parsed into a status plus
exact-rational assignments.  Values stay rational until a reporting
boundary converts them to float.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .encode import SmtScript
from .errors import SolverError, UnsupportedValue

ENV_SOLVER_CMD = "SENSQ_SOLVER_CMD"


class SolveStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    assignments: dict[str, Fraction] | None
    wall_time: float
    raw_stdout: str = ""


@dataclass(frozen=True)
class SolverConfig:
    """How to invoke the solver; `{file}` in args is replaced by the script path.

    `seed` is forwarded as z3-style `param=value` arguments where supported.
    """

    cmd: str = "z3"
    args: tuple[str, ...] = ("-smt2", "{file}")
    seed: int | None = None

    @classmethod
    def from_env(cls, default_cmd: str = "z3", seed: int | None = None) -> "SolverConfig":
        """Honor SENSQ_SOLVER_CMD (a shell-style command prefix) if set."""
        override = os.environ.get(ENV_SOLVER_CMD)
        if override:
            parts = shlex.split(override)
            return cls(cmd=parts[0], args=tuple(parts[1:]) + ("-smt2", "{file}"), seed=seed)
        return cls(cmd=default_cmd, seed=seed)

    def command_for(self, path: Path) -> list[str]:
        argv = [self.cmd]
        if self.seed is not None:
            argv += [f"smt.random_seed={self.seed}", f"sat.random_seed={self.seed}"]
        argv += [a.replace("{file}", str(path)) for a in self.args]
        return argv

    def available(self) -> bool:
        return shutil.which(self.cmd) is not None


# -- s-expression values -----------------------------------------------------


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse_sexpr(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise SolverError("unexpected end of solver output")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _parse_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise SolverError("unbalanced parenthesis in solver output")
        return items, pos + 1
    if tok == ")":
        raise SolverError("unbalanced ')' in solver output")
    return tok, pos + 1


def _value_from_sexpr(node) -> Fraction:
    if isinstance(node, str):
        try:
            return Fraction(node)
        except ValueError as exc:
            raise UnsupportedValue(f"unsupported value atom {node!r}") from exc
    if not node:
        raise UnsupportedValue("empty value expression")
    head = node[0]
    if head == "-" and len(node) == 2:
        return -_value_from_sexpr(node[1])
    if head == "/" and len(node) == 3:
        return _value_from_sexpr(node[1]) / _value_from_sexpr(node[2])
    raise UnsupportedValue(f"unsupported value form {node!r}")


def parse_value(text: str) -> Fraction:
    """Exact rational from a decimal, integer, unary-minus, or (/ p q) form."""
    tokens = _tokenize(text)
    node, pos = _parse_sexpr(tokens, 0)
    if pos != len(tokens):
        raise UnsupportedValue(f"trailing tokens in value {text!r}")
    return _value_from_sexpr(node)


def _parse_assignments(body: str) -> dict[str, Fraction]:
    tokens = _tokenize(body)
    assignments: dict[str, Fraction] = {}
    pos = 0
    while pos < len(tokens):
        node, pos = _parse_sexpr(tokens, pos)
        if not isinstance(node, list):
            raise SolverError(f"unexpected token {node!r} in get-value output")
        for pair in node:
            if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
                raise SolverError(f"malformed get-value pair {pair!r}")
            assignments[pair[0]] = _value_from_sexpr(pair[1])
    return assignments


# -- process driving ---------------------------------------------------------


def solve(
    script: SmtScript,
    timeout: float | None = None,
    config: SolverConfig | None = None,
    script_path: str | Path | None = None,
) -> SolveResult:
    """Run the solver on one script with a wall-clock timeout.

    Timeout kills the child and reports status TIMEOUT; a solver that
    reports "unknown" itself is classified UNKNOWN.  A missing or crashing
    solver raises SolverError rather than degrading to UNKNOWN.
    """
    config = config or SolverConfig()
    if script_path is None:
        fd, name = tempfile.mkstemp(suffix=".smt2", prefix="sensq_")
        os.close(fd)
        path = Path(name)
        cleanup = True
    else:
        path = Path(script_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cleanup = False
    path.write_text(script.text)

    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            config.command_for(path),
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except FileNotFoundError as exc:
        raise SolverError(
            f"solver binary {config.cmd!r} not found; install one or set "
            f"{ENV_SOLVER_CMD}"
        ) from exc
    try:
        stdout, stderr = proc.communicate(timeout=timeout)
        wall = time.monotonic() - start
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
        return SolveResult(SolveStatus.TIMEOUT, None, time.monotonic() - start)
    finally:
        if cleanup:
            path.unlink(missing_ok=True)

    lines = [ln for ln in stdout.splitlines() if ln.strip()]
    if not lines:
        raise SolverError(
            f"solver produced no output (exit {proc.returncode}); stderr: {stderr.strip()!r}"
        )
    head, rest = lines[0].strip(), "\n".join(lines[1:])
    if head == "unsat":
        return SolveResult(SolveStatus.UNSAT, None, wall, stdout)
    if head == "unknown":
        return SolveResult(SolveStatus.UNKNOWN, None, wall, stdout)
    if head != "sat":
        raise SolverError(
            f"unparsable solver output (exit {proc.returncode}): {stdout.strip()[:500]!r}"
        )
    if "(error" in rest:
        raise SolverError(f"solver error after sat: {rest[:500]!r}")
    assignments = _parse_assignments(rest)
    missing = [s for s in script.value_symbols if s not in assignments]
    if missing:
        raise SolverError(f"solver model missing values for {missing}")
    return SolveResult(SolveStatus.SAT, assignments, wall, stdout)
