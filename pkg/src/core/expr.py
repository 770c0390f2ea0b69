# src/core/expr.py
"""
Lenguaje de expresiones para coeficientes g^i(t,x), lados derechos f(t,x)
y predicados de pertenencia de regiones.

Gramática (ver README):

    predicate  := or_expr
    or_expr    := and_expr ( ("or" | "||") and_expr )*
    and_expr   := not_expr ( ("and" | "&&") not_expr )*
    not_expr   := ("not" | "!") not_expr | comparison
    comparison := sum ( ("<" | "<=" | ">" | ">=" | "==" | "!=") sum )?
    sum        := term ( ("+" | "-") term )*
    term       := unary ( ("*" | "/") unary )*
    unary      := "-" unary | power
    power      := atom ( "^" exponent )?
    exponent   := "-"? INTEGER | "(" "-"? INTEGER ")"
    atom       := NUMBER | "pi" | NAME | FUNC "(" or_expr ")" | "(" or_expr ")"

FUNC ∈ {sin, cos, exp, log, atan, sqrt, abs, sgn}; NAME ∈ {t, x}.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import ParamodeError


class ExprError(ParamodeError):
    """Error base del lenguaje de expresiones."""

    def __init__(self, message: str, offset: int = -1):
        self.offset = offset
        self.column = offset + 1 if offset >= 0 else -1
        super().__init__(message)


class ExprSyntaxError(ExprError):
    """Error de sintaxis con offset (0-based, bytes) y conjunto de tokens esperados."""

    def __init__(self, source: str, offset: int, expected: Iterable[str], found: str):
        self.source = source
        self.expected: FrozenSet[str] = frozenset(expected)
        self.found = found
        listed = ", ".join(sorted(self.expected)) or "fin de expresión"
        super().__init__(
            f"Error de sintaxis en la columna {offset + 1} (offset {offset}): "
            f"se esperaba {listed}, se encontró {found}",
            offset,
        )


class ExprNameError(ExprError):
    """Identificador desconocido."""
    pass


class ExprTypeError(ExprError):
    """Mezcla de expresión numérica y predicado."""
    pass


FUNCTIONS = ("sin", "cos", "exp", "log", "atan", "sqrt", "abs", "sgn")
COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
DEFAULT_VARIABLES = ("t", "x")


# ---------------------------------------------------------------------
# Nodos del AST (inmutables; el offset no participa en la igualdad)
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str  # + - * /
    left: "Node"
    right: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BoolOp:
    op: str  # and / or
    left: "Node"
    right: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    operand: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


Node = Union[Num, Var, Neg, Binary, Pow, Call, Compare, BoolOp, Not]


# ---------------------------------------------------------------------
# Tokenizador
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class Token:
    kind: str   # number | name | op | eof
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|&&|\|\||[-+*/^()<>!])"
    r")"
)
_ALIASES = {"&&": "and", "||": "or", "!": "not"}
_KEYWORDS = {"and", "or", "not"}


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


def tokenize(src: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            tokens.append(Token("eof", "", _byte_offset(src, len(src))))
            return tokens
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(src, _byte_offset(src, pos), ["número", "nombre", "operador"], repr(src[pos]))
        kind = m.lastgroup
        text = m.group(kind)
        start = m.start(kind)
        if kind == "op" and text in _ALIASES:
            text = _ALIASES[text]
        if kind == "name" and text in _KEYWORDS:
            kind = "op"
        tokens.append(Token(kind, text, _byte_offset(src, start)))
        pos = m.end()


# ---------------------------------------------------------------------
# Parser descendente recursivo
# ---------------------------------------------------------------------
class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = tokenize(src)
        self.i = 0
        self._furthest = -1
        self._expected: set = set()

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def _note(self, expected: str) -> None:
        off = self.tok.offset
        if off > self._furthest:
            self._furthest = off
            self._expected = set()
        if off == self._furthest:
            self._expected.add(expected)

    def _accept(self, *texts: str) -> Optional[Token]:
        tok = self.tok
        if tok.kind == "op" and tok.text in texts:
            self.i += 1
            return tok
        for text in texts:
            self._note(f"'{text}'")
        return None

    def _fail(self) -> ExprSyntaxError:
        tok = self.tok
        found = "fin de expresión" if tok.kind == "eof" else repr(tok.text)
        expected = self._expected if tok.offset == self._furthest else set()
        return ExprSyntaxError(self.src, tok.offset, expected, found)

    def parse(self) -> Node:
        node = self.or_expr()
        if self.tok.kind != "eof":
            self._note("fin de expresión")
            raise self._fail()
        return node

    def or_expr(self) -> Node:
        left = self.and_expr()
        while (tok := self._accept("or")) is not None:
            left = BoolOp("or", left, self.and_expr(), tok.offset)
        return left

    def and_expr(self) -> Node:
        left = self.not_expr()
        while (tok := self._accept("and")) is not None:
            left = BoolOp("and", left, self.not_expr(), tok.offset)
        return left

    def not_expr(self) -> Node:
        tok = self._accept("not")
        if tok is not None:
            return Not(self.not_expr(), tok.offset)
        return self.comparison()

    def comparison(self) -> Node:
        left = self.sum()
        tok = self._accept(*COMPARISONS)
        if tok is not None:
            return Compare(tok.text, left, self.sum(), tok.offset)
        return left

    def sum(self) -> Node:
        left = self.term()
        while (tok := self._accept("+", "-")) is not None:
            left = Binary(tok.text, left, self.term(), tok.offset)
        return left

    def term(self) -> Node:
        left = self.unary()
        while (tok := self._accept("*", "/")) is not None:
            left = Binary(tok.text, left, self.unary(), tok.offset)
        return left

    def unary(self) -> Node:
        tok = self._accept("-")
        if tok is not None:
            return Neg(self.unary(), tok.offset)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self._accept("^")
        if tok is not None:
            return Pow(base, self.exponent(), tok.offset)
        return base

    def exponent(self) -> int:
        wrapped = self._accept("(") is not None
        sign = -1 if self._accept("-") is not None else 1
        tok = self.tok
        if tok.kind != "number" or not tok.text.isdigit():
            self._note("exponente entero")
            raise self._fail()
        self.i += 1
        if wrapped and self._accept(")") is None:
            raise self._fail()
        return sign * int(tok.text)

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Num(float(tok.text), tok.offset)
        if tok.kind == "name":
            self.i += 1
            if tok.text in FUNCTIONS:
                if self._accept("(") is None:
                    raise self._fail()
                arg = self.or_expr()
                if self._accept(")") is None:
                    raise self._fail()
                return Call(tok.text, arg, tok.offset)
            if tok.text == "pi":
                return Num(math.pi, tok.offset)
            return Var(tok.text, tok.offset)
        if self._accept("(") is not None:
            node = self.or_expr()
            if self._accept(")") is None:
                raise self._fail()
            return node
        for what in ("número", "nombre", "'-'"):
            self._note(what)
        raise self._fail()


# ---------------------------------------------------------------------
# Verificación de tipos y nombres
# ---------------------------------------------------------------------
def _kind(node: Node) -> str:
    if isinstance(node, (Num, Var)):
        return "num"
    if isinstance(node, (Neg, Call)):
        _require(node.operand if isinstance(node, Neg) else node.arg, "num")
        return "num"
    if isinstance(node, Pow):
        _require(node.base, "num")
        return "num"
    if isinstance(node, Binary):
        _require(node.left, "num")
        _require(node.right, "num")
        return "num"
    if isinstance(node, Compare):
        _require(node.left, "num")
        _require(node.right, "num")
        return "bool"
    if isinstance(node, BoolOp):
        _require(node.left, "bool")
        _require(node.right, "bool")
        return "bool"
    if isinstance(node, Not):
        _require(node.operand, "bool")
        return "bool"
    raise TypeError(f"Nodo desconocido: {node!r}")


def _require(node: Node, kind: str) -> None:
    if _kind(node) != kind:
        wanted = "numérica" if kind == "num" else "booleana"
        raise ExprTypeError(f"Se esperaba una expresión {wanted} en el offset {node.offset}", node.offset)


def _walk(node: Node):
    yield node
    for child in _children(node):
        yield from _walk(child)


def _children(node: Node) -> Tuple[Node, ...]:
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    if isinstance(node, Call):
        return (node.arg,)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, (Binary, Compare, BoolOp)):
        return (node.left, node.right)
    return ()


# ---------------------------------------------------------------------
# Impresión canónica (paréntesis mínimos según precedencia)
# ---------------------------------------------------------------------
_PREC_OR, _PREC_AND, _PREC_NOT, _PREC_CMP, _PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = range(1, 10)


def _prec(node: Node) -> int:
    if isinstance(node, BoolOp):
        return _PREC_OR if node.op == "or" else _PREC_AND
    if isinstance(node, Not):
        return _PREC_NOT
    if isinstance(node, Compare):
        return _PREC_CMP
    if isinstance(node, Binary):
        return _PREC_ADD if node.op in "+-" else _PREC_MUL
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(node: Node, minimum: int) -> str:
    text = to_source(node)
    return f"({text})" if _prec(node) < minimum else text


def to_source(node: Node) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({to_source(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _PREC_NEG)
    if isinstance(node, Not):
        return "not " + _wrap(node.operand, _PREC_NOT)
    if isinstance(node, Pow):
        return f"{_wrap(node.base, _PREC_ATOM)}^{node.exponent}"
    if isinstance(node, Compare):
        return f"{_wrap(node.left, _PREC_ADD)} {node.op} {_wrap(node.right, _PREC_ADD)}"
    if isinstance(node, (Binary, BoolOp)):
        p = _prec(node)
        sep = f" {node.op} " if isinstance(node, BoolOp) or node.op in "+-" else node.op
        return f"{_wrap(node.left, p)}{sep}{_wrap(node.right, p + 1)}"
    raise TypeError(f"Nodo desconocido: {node!r}")


# ---------------------------------------------------------------------
# Evaluación escalar (math, sin trampas) y vectorizada (numpy)
# ---------------------------------------------------------------------
_INF = math.inf
_NAN = math.nan


def _s_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or a != a:
            return _NAN
        return math.copysign(_INF, a) * math.copysign(1.0, b)
    return a / b


def _s_pow(a: float, n: int) -> float:
    try:
        return a ** n
    except ZeroDivisionError:
        return _INF
    except OverflowError:
        return -_INF if (a < 0 and n % 2) else _INF


def _s_log(a: float) -> float:
    if a > 0.0:
        return math.log(a)
    return -_INF if a == 0.0 else _NAN


def _s_sqrt(a: float) -> float:
    return math.sqrt(a) if a >= 0.0 else _NAN


def _s_exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return _INF


def _s_sgn(a: float) -> float:
    if a != a:
        return _NAN
    return float((a > 0.0) - (a < 0.0))


def _guarded(fn: Callable[[float], float]) -> Callable[[float], float]:
    def call(a: float) -> float:
        try:
            return fn(a)
        except (ValueError, OverflowError):
            return _NAN
    return call


_SCALAR_FUNCS: Dict[str, Callable[[float], float]] = {
    "sin": _guarded(math.sin),
    "cos": _guarded(math.cos),
    "exp": _s_exp,
    "log": _s_log,
    "atan": math.atan,
    "sqrt": _s_sqrt,
    "abs": abs,
    "sgn": _s_sgn,
}

_ARRAY_FUNCS: Dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "atan": np.arctan,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sgn": np.sign,
}

_COMPARE_FUNCS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _compile(node: Node, array: bool) -> Callable:
    """Convierte el AST en un closure f(t, x)."""
    if isinstance(node, Num):
        value = float(node.value)
        return lambda t, x: value
    if isinstance(node, Var):
        if node.name == "t":
            return lambda t, x: t
        return lambda t, x: x
    if isinstance(node, Neg):
        inner = _compile(node.operand, array)
        return lambda t, x: -inner(t, x)
    if isinstance(node, Pow):
        base, n = _compile(node.base, array), node.exponent
        if array:
            return lambda t, x: np.power(np.asarray(base(t, x), dtype=float), n)
        return lambda t, x: _s_pow(float(base(t, x)), n)
    if isinstance(node, Call):
        arg = _compile(node.arg, array)
        fn = (_ARRAY_FUNCS if array else _SCALAR_FUNCS)[node.name]
        return lambda t, x: fn(arg(t, x))
    if isinstance(node, Binary):
        left, right = _compile(node.left, array), _compile(node.right, array)
        if node.op == "+":
            return lambda t, x: left(t, x) + right(t, x)
        if node.op == "-":
            return lambda t, x: left(t, x) - right(t, x)
        if node.op == "*":
            return lambda t, x: left(t, x) * right(t, x)
        if array:
            return lambda t, x: np.divide(left(t, x), right(t, x))
        return lambda t, x: _s_div(left(t, x), right(t, x))
    if isinstance(node, Compare):
        left, right = _compile(node.left, array), _compile(node.right, array)
        cmp = _COMPARE_FUNCS[node.op]
        return lambda t, x: cmp(left(t, x), right(t, x))
    if isinstance(node, BoolOp):
        left, right = _compile(node.left, array), _compile(node.right, array)
        if array:
            op = np.logical_and if node.op == "and" else np.logical_or
            return lambda t, x: op(left(t, x), right(t, x))
        if node.op == "and":
            return lambda t, x: bool(left(t, x)) and bool(right(t, x))
        return lambda t, x: bool(left(t, x)) or bool(right(t, x))
    if isinstance(node, Not):
        inner = _compile(node.operand, array)
        if array:
            return lambda t, x: np.logical_not(inner(t, x))
        return lambda t, x: not inner(t, x)
    raise TypeError(f"Nodo desconocido: {node!r}")


# ---------------------------------------------------------------------
# Expresión pública
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class Expr:
    """Expresión analizada; la igualdad compara únicamente el AST."""
    root: Node

    @cached_property
    def is_predicate(self) -> bool:
        return _kind(self.root) == "bool"

    @cached_property
    def is_partial(self) -> bool:
        for node in _walk(self.root):
            if isinstance(node, Binary) and node.op == "/":
                return True
            if isinstance(node, Call) and node.name in ("log", "sqrt"):
                return True
            if isinstance(node, Pow) and node.exponent < 0:
                return True
        return False

    @cached_property
    def variables(self) -> FrozenSet[str]:
        return frozenset(n.name for n in _walk(self.root) if isinstance(n, Var))

    @cached_property
    def constant_value(self) -> Optional[float]:
        """Valor de la expresión si no depende de t ni de x."""
        if self.variables or self.is_predicate:
            return None
        return float(self.scalar(0.0, 0.0))

    @cached_property
    def _scalar_fn(self) -> Callable:
        return _compile(self.root, array=False)

    @cached_property
    def _array_fn(self) -> Callable:
        return _compile(self.root, array=True)

    def to_source(self) -> str:
        return to_source(self.root)

    def __str__(self) -> str:
        return self.to_source()

    def scalar(self, t: float, x: float):
        """Evaluación escalar rápida; devuelve nan/inf en vez de lanzar."""
        return self._scalar_fn(float(t), float(x))

    def __call__(self, t, x):
        """Evaluación vectorizada con broadcasting de numpy."""
        t_arr = np.asarray(t, dtype=float)
        x_arr = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            raw = self._array_fn(t_arr, x_arr)
        shape = np.broadcast(t_arr, x_arr).shape
        dtype = bool if self.is_predicate else float
        out = np.broadcast_to(np.asarray(raw, dtype=dtype), shape).copy()
        if out.ndim == 0:
            return bool(out) if self.is_predicate else float(out)
        return out


def parse(src: str, variables: Sequence[str] = DEFAULT_VARIABLES, predicate: Optional[bool] = None) -> Expr:
    """
    Analiza el texto y devuelve una Expr.

    :param variables: identificadores permitidos.
    :param predicate: True/False exige predicado/expresión numérica; None acepta ambos.
    :raises ExprSyntaxError: con offset y tokens esperados.
    :raises ExprNameError: identificador no permitido.
    :raises ExprTypeError: mezcla de tipos.
    """
    root = _Parser(src).parse()
    allowed = set(variables)
    for node in _walk(root):
        if isinstance(node, Var) and node.name not in allowed:
            raise ExprNameError(
                f"Identificador desconocido '{node.name}' en el offset {node.offset}", node.offset
            )
    expr = Expr(root)
    is_pred = expr.is_predicate
    if predicate is True and not is_pred:
        raise ExprTypeError("Se esperaba un predicado (comparación u operación booleana)", 0)
    if predicate is False and is_pred:
        raise ExprTypeError("Se esperaba una expresión numérica, no un predicado", 0)
    return expr


def evaluate(expr: Expr, t, x):
    """Evalúa una expresión numérica; los valores no finitos se devuelven tal cual."""
    if expr.is_predicate:
        raise ExprTypeError("evaluate() recibe expresiones numéricas", 0)
    return expr(t, x)


def eval_flagged(expr: Expr, t: float, x: float) -> Tuple[float, bool]:
    """Evaluación escalar con bandera de no-finitud: (valor, es_finito)."""
    value = float(expr.scalar(t, x))
    return value, math.isfinite(value)


# ---------------------------------------------------------------------
# Construcción programática (usada por generadores y el operador compañero)
# ---------------------------------------------------------------------
def const(value: float) -> Expr:
    value = float(value)
    root: Node = Num(abs(value))
    return Expr(Neg(root) if math.copysign(1.0, value) < 0 else root)


def neg(e: Expr) -> Expr:
    if e.constant_value is not None:
        return const(-e.constant_value)
    return Expr(Neg(e.root))


def add(a: Expr, b: Expr) -> Expr:
    if a.constant_value == 0.0:
        return b
    if b.constant_value == 0.0:
        return a
    return Expr(Binary("+", a.root, b.root))


def mul(a: Expr, b: Expr) -> Expr:
    if a.constant_value == 1.0:
        return b
    if b.constant_value == 1.0:
        return a
    if a.constant_value == 0.0 or b.constant_value == 0.0:
        return const(0.0)
    return Expr(Binary("*", a.root, b.root))


def div(a: Expr, b: Expr) -> Expr:
    if b.constant_value == 1.0 or a.constant_value == 0.0:
        return a
    return Expr(Binary("/", a.root, b.root))
