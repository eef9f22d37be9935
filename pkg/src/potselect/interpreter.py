"""Restricted straight-line arithmetic dialect: parse, render, execute.

Answer programs are sequences of assignments over ``+ - * /``, unary minus,
parentheses, numeric literals and previously assigned identifiers.  Comment
lines start with ``#``; the value of a program is the last binding of ``ans``.
The grammar is a strict subset of Python, so parsing delegates tokenisation
and precedence to :mod:`ast` and this module only validates and converts.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass


class InterpreterError(Exception):
    """Base class for parse and execution failures of answer programs."""


class ProgramSyntaxError(InterpreterError):
    def __init__(self, line_no: int, line: str, reason: str = "unparseable line"):
        super().__init__(f"line {line_no}: {reason}: {line.strip()!r}")
        self.line_no = line_no


class ForwardReferenceError(InterpreterError):
    def __init__(self, name: str, line_no: int):
        super().__init__(f"line {line_no}: identifier {name!r} used before assignment")
        self.name = name
        self.line_no = line_no


class UnsupportedConstructError(InterpreterError):
    def __init__(self, line_no: int, what: str):
        super().__init__(f"line {line_no}: unsupported construct: {what}")
        self.line_no = line_no


class NoAnswerError(InterpreterError):
    def __init__(self) -> None:
        super().__init__("program never assigns 'ans'")


class DivisionByZeroError(InterpreterError):
    def __init__(self, target: str):
        super().__init__(f"division by zero while computing {target!r}")
        self.target = target


class NonFiniteResultError(InterpreterError):
    def __init__(self, target: str, value: float):
        super().__init__(f"non-finite value {value!r} assigned to {target!r}")
        self.target = target


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of "+-*/"
    left: "Expr"
    right: "Expr"


Expr = Num | Var | Neg | BinOp


@dataclass(frozen=True)
class Assignment:
    target: str
    expression: Expr


@dataclass(frozen=True)
class Program:
    statements: tuple[Assignment, ...]
    source_text: str


@dataclass(frozen=True)
class ModificationChain:
    """Sequence of (operator, operand) steps folded over a program's answer."""

    steps: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        for op, operand in self.steps:
            if op not in "+-*/":
                raise ValueError(f"unknown chain operator {op!r}")
            if not math.isfinite(operand):
                raise ValueError(f"chain operand must be finite, got {operand!r}")
            if op == "/" and operand == 0:
                raise ValueError("chain must not divide by zero")

    def fold(self, value: float) -> float:
        for op, operand in self.steps:
            value = _apply(op, value, float(operand))
        return value


_ALLOWED_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}


def _convert(node: ast.expr, line_no: int) -> Expr:
    if isinstance(node, ast.Constant):
        # bool is an int subclass; reject it along with strings etc.
        if type(node.value) in (int, float):
            return Num(float(node.value))
        raise UnsupportedConstructError(line_no, f"literal {node.value!r}")
    if isinstance(node, ast.Name):
        return Var(node.id)
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return Neg(_convert(node.operand, line_no))
        raise UnsupportedConstructError(line_no, "unary operator other than '-'")
    if isinstance(node, ast.BinOp):
        op = _ALLOWED_BINOPS.get(type(node.op))
        if op is None:
            raise UnsupportedConstructError(
                line_no, f"operator {type(node.op).__name__}"
            )
        return BinOp(op, _convert(node.left, line_no), _convert(node.right, line_no))
    raise UnsupportedConstructError(line_no, type(node).__name__)


def references(expr: Expr) -> frozenset[str]:
    """Identifiers read by an expression."""
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, Neg):
        return references(expr.operand)
    if isinstance(expr, BinOp):
        return references(expr.left) | references(expr.right)
    return frozenset()


def parse_line(line: str, line_no: int = 1) -> Assignment | None:
    """Parse one line; None for blank/comment lines.

    No forward-reference checking here — callers own the running scope.
    """
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    try:
        tree = ast.parse(line, mode="exec")
    except SyntaxError:
        raise ProgramSyntaxError(line_no, line) from None
    if len(tree.body) != 1:
        raise UnsupportedConstructError(line_no, "multiple statements on one line")
    stmt = tree.body[0]
    if not isinstance(stmt, ast.Assign):
        raise UnsupportedConstructError(line_no, type(stmt).__name__)
    if len(stmt.targets) != 1 or not isinstance(stmt.targets[0], ast.Name):
        raise UnsupportedConstructError(line_no, "assignment target")
    return Assignment(stmt.targets[0].id, _convert(stmt.value, line_no))


def parse(source: str) -> Program:
    """Parse program text into :class:`Program`.

    Lines are blank, ``#`` comments, or single assignments.  Raises
    :class:`ProgramSyntaxError`, :class:`UnsupportedConstructError` or
    :class:`ForwardReferenceError`; ``source`` is preserved verbatim.
    """
    statements: list[Assignment] = []
    defined: set[str] = set()
    for line_no, line in enumerate(source.replace("\r", "").split("\n"), start=1):
        assignment = parse_line(line, line_no)
        if assignment is None:
            continue
        for name in sorted(references(assignment.expression)):
            if name not in defined:
                raise ForwardReferenceError(name, line_no)
        statements.append(assignment)
        defined.add(assignment.target)
    return Program(tuple(statements), source)


# precedence: atoms 4, unary minus 3, * / 2, + - 1
_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _expr_precedence(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, Neg):
        return 3
    return 4


def _render_expr(expr: Expr, min_precedence: int = 0) -> str:
    if isinstance(expr, Num):
        v = expr.value
        text = str(int(v)) if v == int(v) and math.isfinite(v) else repr(v)
    elif isinstance(expr, Var):
        text = expr.name
    elif isinstance(expr, Neg):
        text = "-" + _render_expr(expr.operand, 3)
    else:
        prec = _PRECEDENCE[expr.op]
        # left-associative: the right child needs strictly higher precedence
        left = _render_expr(expr.left, prec)
        right = _render_expr(expr.right, prec + 1)
        text = f"{left} {expr.op} {right}"
    if _expr_precedence(expr) < min_precedence:
        return f"({text})"
    return text


def render(program: Program) -> str:
    """Render statements back to canonical source (one assignment per line)."""
    return "\n".join(f"{s.target} = {_render_expr(s.expression)}" for s in program.statements)


def _apply(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def _evaluate(expr: Expr, env: dict[str, float], target: str) -> float:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Neg):
        return -_evaluate(expr.operand, env, target)
    left = _evaluate(expr.left, env, target)
    right = _evaluate(expr.right, env, target)
    try:
        return _apply(expr.op, left, right)
    except ZeroDivisionError:
        raise DivisionByZeroError(target) from None


def execute(program: Program) -> float:
    """Run the program and return the final value bound to ``ans``.

    Double-precision semantics, sequential evaluation, reassignment allowed.
    Raises :class:`NoAnswerError`, :class:`DivisionByZeroError` or
    :class:`NonFiniteResultError`.
    """
    env: dict[str, float] = {}
    for statement in program.statements:
        value = _evaluate(statement.expression, env, statement.target)
        if not math.isfinite(value):
            raise NonFiniteResultError(statement.target, value)
        env[statement.target] = value
    if "ans" not in env:
        raise NoAnswerError()
    return env["ans"]


def complexity(answer_text: str) -> int:
    """Count line-break characters in raw answer text (comments included)."""
    return answer_text.count("\n")


_TEMP_NAME = re.compile(r"^temp(\d+)$")


def _literal(value: float) -> Expr:
    # parse() never yields negative Num nodes (a leading '-' is unary
    # minus), so constructed programs mirror that for render/parse stability
    if value < 0:
        return Neg(Num(-value))
    return Num(value)


def modify_answer(program: Program, chain: ModificationChain) -> Program:
    """Append a modification chain to a program via ``tempN`` rebinding.

    The last ``ans`` assignment is renamed ``temp<k>``, intermediate chain
    steps become ``temp<k+i> = temp<k+i-1> <op> <operand>`` and the final
    step is written directly into ``ans``.  An empty chain returns an equal
    program.  The input program is never mutated.
    """
    statements = list(program.statements)
    if not chain.steps:
        return Program(tuple(statements), render(program))

    ans_index = None
    max_temp = -1
    for i, statement in enumerate(statements):
        if statement.target == "ans":
            ans_index = i
        m = _TEMP_NAME.match(statement.target)
        if m:
            max_temp = max(max_temp, int(m.group(1)))
    if ans_index is None:
        raise NoAnswerError()
    for statement in statements[ans_index + 1 :]:
        if "ans" in references(statement.expression):
            raise UnsupportedConstructError(0, "'ans' referenced after its final assignment")

    k = max_temp + 1
    statements[ans_index] = Assignment(f"temp{k}", statements[ans_index].expression)
    current = f"temp{k}"
    for op, operand in chain.steps[:-1]:
        k += 1
        statements.append(Assignment(f"temp{k}", BinOp(op, Var(current), _literal(float(operand)))))
        current = f"temp{k}"
    last_op, last_operand = chain.steps[-1]
    statements.append(Assignment("ans", BinOp(last_op, Var(current), _literal(float(last_operand)))))

    modified = Program(tuple(statements), "")
    modified = Program(tuple(statements), render(modified))
    execute(modified)  # surface non-finite chained values to the caller now
    return modified
