"""Closed-form radial profiles ``r(theta)`` for polar domain descriptions.

JSON forms accepted by :func:`parse_profile`:

* a number: constant radius
* ``{"a": 3, "b": 1, "k": 4, "phase": 0}``: ``a + b*cos(k*theta + phase)``
* ``{"expr": "4 + sin(4*pi**2/theta)"}``: numpy expression in ``theta``
* ``{"piecewise": [{"upto": t1, "profile": P1}, ..., {"profile": Pn}]}``
"""

from __future__ import annotations

import numpy as np

_EXPR_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "minimum", "maximum", "where", "pi")
}


class Profile:
    def __init__(self, func, doc):
        self._func = func
        self.doc = doc

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.broadcast_to(np.asarray(self._func(theta), dtype=float), theta.shape).copy()

    def to_json(self):
        return self.doc


def constant(value):
    value = float(value)
    return Profile(lambda t: np.full(np.shape(t), value), value)


def cosine(a, b, k, phase=0.0):
    doc = {"a": a, "b": b, "k": k, "phase": phase}
    return Profile(lambda t: a + b * np.cos(k * t + phase), doc)


def expression(expr):
    code = compile(expr, "<profile>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "theta":
            raise ValueError(f"name {name!r} not allowed in profile expression")

    def f(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "theta": t})

    return Profile(f, {"expr": expr})


def piecewise(pieces):
    parsed = [(np.inf if p.get("upto") is None else float(p["upto"]), parse_profile(p["profile"])) for p in pieces]

    def f(t):
        out = np.empty(np.shape(t))
        lo = -np.inf
        for upto, prof in parsed:
            m = (t > lo) & (t <= upto)
            if np.any(m):
                out[m] = prof(t[m])
            lo = upto
        return out

    return Profile(f, {"piecewise": [{"upto": None if np.isinf(u) else u, "profile": p.doc} for u, p in parsed]})


def parse_profile(doc):
    if isinstance(doc, Profile):
        return doc
    if isinstance(doc, (int, float)):
        return constant(doc)
    if "expr" in doc:
        return expression(doc["expr"])
    if "piecewise" in doc:
        return piecewise(doc["piecewise"])
    if {"a", "b", "k"} <= set(doc):
        return cosine(doc["a"], doc["b"], doc["k"], doc.get("phase", 0.0))
    raise ValueError(f"cannot parse profile {doc!r}")
