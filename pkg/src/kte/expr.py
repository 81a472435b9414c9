"""Scalar Young-function expressions for radial costs ``L(x) = V(|x|)``.

The grammar is deliberately small: powers ``s^a`` with ``a >= 1``, positive
scalar multiples, sums and ``max``. Every expression built from it is convex,
nondecreasing on ``[0, inf)`` and vanishes at 0, so no runtime convexity
check is needed.
"""

import ast

import numpy as np

from .errors import InvalidSpec


class Node:
    def value(self, s):
        raise NotImplementedError

    def deriv(self, s):
        """Right derivative."""
        raise NotImplementedError

    def deriv2(self, s):
        """Second derivative (right-sided at kinks)."""
        raise NotImplementedError

    def exponents(self):
        """Sorted leaf exponents."""
        raise NotImplementedError

    @property
    def has_max(self):
        return False

    @property
    def exponent_at_zero(self):
        return min(self.exponents())

    @property
    def exponent_at_infinity(self):
        return max(self.exponents())


class Power(Node):
    def __init__(self, a):
        if not a >= 1:
            raise InvalidSpec(f"power exponent must be >= 1, got {a}")
        self.a = float(a)

    def value(self, s):
        return np.power(s, self.a)

    def deriv(self, s):
        if self.a == 1.0:
            return np.ones_like(np.asarray(s, dtype=float))
        return self.a * np.power(s, self.a - 1.0)

    def deriv2(self, s):
        s = np.asarray(s, dtype=float)
        if self.a == 1.0:
            return np.zeros_like(s)
        if self.a == 2.0:
            return np.full_like(s, 2.0)
        with np.errstate(divide="ignore"):
            return self.a * (self.a - 1.0) * np.power(s, self.a - 2.0)

    def exponents(self):
        return [self.a]

    def __str__(self):
        return "s" if self.a == 1.0 else f"s^{self.a:g}"


class Scaled(Node):
    def __init__(self, c, child):
        if not c > 0:
            raise InvalidSpec(f"scalar multiple must be positive, got {c}")
        self.c = float(c)
        self.child = child

    def value(self, s):
        return self.c * self.child.value(s)

    def deriv(self, s):
        return self.c * self.child.deriv(s)

    def deriv2(self, s):
        return self.c * self.child.deriv2(s)

    def exponents(self):
        return self.child.exponents()

    @property
    def has_max(self):
        return self.child.has_max

    def __str__(self):
        return f"{self.c:g}*{_wrap(self.child)}"


class Sum(Node):
    def __init__(self, children):
        self.children = list(children)

    def value(self, s):
        return sum(c.value(s) for c in self.children)

    def deriv(self, s):
        return sum(c.deriv(s) for c in self.children)

    def deriv2(self, s):
        return sum(c.deriv2(s) for c in self.children)

    def exponents(self):
        return sorted(a for c in self.children for a in c.exponents())

    @property
    def has_max(self):
        return any(c.has_max for c in self.children)

    def __str__(self):
        return "+".join(str(c) for c in self.children)


class Max(Node):
    def __init__(self, children):
        if len(children) < 2:
            raise InvalidSpec("max() needs at least two arguments")
        self.children = list(children)

    def value(self, s):
        return np.maximum.reduce([c.value(s) for c in self.children])

    def deriv(self, s):
        vals = np.array([np.broadcast_to(c.value(s), np.shape(s)) for c in self.children])
        ders = np.array([np.broadcast_to(c.deriv(s), np.shape(s)) for c in self.children])
        top = vals.max(axis=0)
        # among the active branches the right derivative is the largest slope
        active = vals >= top - 1e-14 * np.abs(top)
        return np.where(active, ders, -np.inf).max(axis=0)

    def deriv2(self, s):
        vals = np.array([np.broadcast_to(c.value(s), np.shape(s)) for c in self.children])
        ders = np.array([np.broadcast_to(c.deriv(s), np.shape(s)) for c in self.children])
        curv = np.array([np.broadcast_to(c.deriv2(s), np.shape(s)) for c in self.children])
        top = vals.max(axis=0)
        active = vals >= top - 1e-14 * np.abs(top)
        slope = np.where(active, ders, -np.inf)
        pick = np.argmax(slope, axis=0)
        return np.take_along_axis(curv, pick[None, ...], axis=0)[0]

    def exponents(self):
        return sorted(a for c in self.children for a in c.exponents())

    @property
    def has_max(self):
        return True

    def __str__(self):
        return "max(" + ",".join(str(c) for c in self.children) + ")"


def _wrap(node):
    return f"({node})" if isinstance(node, Sum) else str(node)


def _const(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    raise InvalidSpec(f"expected a numeric constant, got {ast.dump(node)}")


def _build(node):
    if isinstance(node, ast.Name):
        if node.id != "s":
            raise InvalidSpec(f"unknown variable {node.id!r}; only 's' is allowed")
        return Power(1.0)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Add):
            left, right = _build(node.left), _build(node.right)
            parts = []
            for part in (left, right):
                parts.extend(part.children if isinstance(part, Sum) else [part])
            return Sum(parts)
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.left, ast.Name) and node.left.id == "s"):
                raise InvalidSpec("powers are only allowed on the variable s")
            return Power(_const(node.right))
        if isinstance(node.op, ast.Mult):
            if isinstance(node.left, ast.Constant):
                return Scaled(_const(node.left), _build(node.right))
            if isinstance(node.right, ast.Constant):
                return Scaled(_const(node.right), _build(node.left))
            raise InvalidSpec("products are only allowed with a numeric constant")
        if isinstance(node.op, ast.Div):
            return Scaled(1.0 / _const(node.right), _build(node.left))
    if isinstance(node, ast.Call):
        if isinstance(node.func, ast.Name) and node.func.id == "max" and not node.keywords:
            return Max([_build(a) for a in node.args])
    raise InvalidSpec(f"unsupported expression element: {ast.dump(node)}")


def parse(text):
    """Parse ``"s^2+s^4"``-style text into an expression tree."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InvalidSpec(f"cannot parse {text!r}: {exc}") from None
    return _build(tree.body)
