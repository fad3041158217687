"""Small expression language for integrands given on the command line.

Grammar: numbers, the variables x, y, z (as many as the dimension
allows), pi, binary + - * / ^ with ^ binding tightest and associating
right, unary minus, sin, cos, sqrt, and parentheses.  Evaluation is
vectorized over numpy arrays.  Partial derivatives are symbolic; powers
can be differentiated only when the exponent is a constant.
"""

import math
import re

import numpy as np

from .errors import ValidationError

VARS = ("x", "y", "z")
FUNCS = ("sin", "cos", "sqrt")

_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_]+)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(src):
    out = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ValidationError(
                "unexpected character %r at position %d" % (src[pos], pos))
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        out.append((m.lastgroup, m.group()))
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, src, dim):
        self.tokens = _tokenize(src)
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text = self.take()
        if text != value:
            raise ValidationError("expected %r, found %r" % (value, text))

    def parse(self):
        node = self.sum()
        kind, text = self.take()
        if kind != "end":
            raise ValidationError("trailing input %r" % text)
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = ("bin", op, node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            # right associative; exponent may carry its own unary minus
            return ("bin", "^", node, self.unary())
        return node

    def atom(self):
        kind, text = self.take()
        if kind == "num":
            return ("num", float(text))
        if kind == "name":
            if text == "pi":
                return ("num", math.pi)
            if text in FUNCS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return ("call", text, arg)
            if text in VARS:
                idx = VARS.index(text)
                if idx >= self.dim:
                    raise ValidationError(
                        "variable %r needs dimension > %d" % (text, idx))
                return ("var", idx)
            raise ValidationError("unknown name %r" % text)
        if text == "(":
            node = self.sum()
            self.expect(")")
            return node
        raise ValidationError("unexpected token %r" % text)


def parse_expr(src, dim):
    """Parse source into an AST usable by eval_ast and differentiate."""
    if not isinstance(src, str) or not src.strip():
        raise ValidationError("empty expression")
    if not 1 <= dim <= len(VARS):
        raise ValidationError("dimension must be between 1 and %d" % len(VARS))
    return _Parser(src, dim).parse()


def eval_ast(node, args):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return np.asarray(args[node[1]], dtype=float)
    if kind == "neg":
        return -eval_ast(node[1], args)
    if kind == "call":
        fn = {"sin": np.sin, "cos": np.cos, "sqrt": np.sqrt}[node[1]]
        with np.errstate(invalid="ignore"):
            return fn(eval_ast(node[2], args))
    op, a, b = node[1], node[2], node[3]
    va, vb = eval_ast(a, args), eval_ast(b, args)
    if op == "+":
        return va + vb
    if op == "-":
        return va - vb
    if op == "*":
        return va * vb
    if op == "/":
        with np.errstate(divide="ignore", invalid="ignore"):
            return va / vb
    with np.errstate(invalid="ignore"):
        return va ** vb


def compile_expr(src, dim):
    """Callable of dim array arguments evaluating the expression."""
    ast = parse_expr(src, dim)

    def fn(*args):
        if len(args) != dim:
            raise ValidationError("expected %d arguments" % dim)
        return eval_ast(ast, args)

    return fn


def _is_zero(node):
    return node == ("num", 0.0)


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return ("bin", "+", a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return ("num", 0.0)
    if a == ("num", 1.0):
        return b
    if b == ("num", 1.0):
        return a
    return ("bin", "*", a, b)


def differentiate(node, var):
    """Symbolic partial derivative with respect to variable index var."""
    kind = node[0]
    if kind == "num":
        return ("num", 0.0)
    if kind == "var":
        return ("num", 1.0 if node[1] == var else 0.0)
    if kind == "neg":
        return ("neg", differentiate(node[1], var))
    if kind == "call":
        name, arg = node[1], node[2]
        da = differentiate(arg, var)
        if name == "sin":
            return _mul(("call", "cos", arg), da)
        if name == "cos":
            return ("neg", _mul(("call", "sin", arg), da))
        # d sqrt(u) = u' / (2 sqrt(u))
        return ("bin", "/", da, ("bin", "*", ("num", 2.0),
                                 ("call", "sqrt", arg)))
    op, a, b = node[1], node[2], node[3]
    da, db = None, None
    if op in ("+", "-"):
        return ("bin", op, differentiate(a, var), differentiate(b, var))
    if op == "*":
        return _add(_mul(differentiate(a, var), b),
                    _mul(a, differentiate(b, var)))
    if op == "/":
        da, db = differentiate(a, var), differentiate(b, var)
        num = ("bin", "-", _mul(da, b), _mul(a, db))
        return ("bin", "/", num, ("bin", "^", b, ("num", 2.0)))
    if b[0] != "num":
        raise ValidationError(
            "power differentiation needs a constant exponent")
    p = b[1]
    inner = _mul(("num", p), ("bin", "^", a, ("num", p - 1.0)))
    return _mul(inner, differentiate(a, var))
