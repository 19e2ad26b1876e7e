#!/usr/bin/env python3
"""Readiness Formula — compact model-formula language and design matrices.

Grammar (whitespace-insensitive):

    formula  := response "~" rhs
    response := IDENT | "log" "(" IDENT ")"
    rhs      := item (("+" item) | ("-" "1"))*   with a leading "-1" also allowed
    item     := IDENT | IDENT ":" IDENT | "1"

The intercept is implicit; ``-1`` removes it and a bare ``1`` keeps it
(``y ~ 1`` is the intercept-only model).
"""

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from readiness_core import CATEGORICAL, Dataset
from readiness_shared import DataError

logger = logging.getLogger("readiness.formula")

IDENTITY = "identity"
LOG = "log"
INTERCEPT = "(Intercept)"

_TOKEN_RE = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<num>\d+)|(?P<op>[~+\-:()]))")


@dataclass(frozen=True)
class Formula:
    response: str
    transform: str = IDENTITY
    terms: tuple = ()
    interactions: tuple = ()
    intercept: bool = True

    def __post_init__(self):
        if self.transform not in (IDENTITY, LOG):
            raise DataError(f"unsupported response transform {self.transform!r}")
        if len(set(self.terms)) != len(self.terms):
            raise DataError(f"duplicate term in {list(self.terms)}")
        seen = set()
        for pair in self.interactions:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise DataError(f"interaction must join two distinct features, got {pair}")
            key = frozenset(pair)
            if key in seen:
                raise DataError(f"duplicate interaction {pair[0]}:{pair[1]}")
            seen.add(key)
        if self.response in self.variables:
            raise DataError(f"response {self.response} is also used as a predictor")
        if not self.intercept and not self.terms and not self.interactions:
            raise DataError("formula has no columns: no intercept and no terms")

    @property
    def variables(self) -> list:
        """Predictor names in first-use order."""
        out = []
        for name in list(self.terms) + [v for pair in self.interactions for v in pair]:
            if name not in out:
                out.append(name)
        return out

    def to_dict(self) -> dict:
        return {"text": format_formula(self)}

    def __str__(self):
        return format_formula(self)


def _offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m:
            bad = len(text) - len(text[pos:].lstrip())
            raise DataError(f"formula syntax error at byte {_offset(text, bad)}: unexpected {text[bad]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), _offset(text, m.start(kind))))
        pos = m.end()
    tokens.append(("end", "", _offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str, value: str | None = None):
        tok = self.tokens[self.i]
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = repr(value) if value is not None else kind
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise DataError(f"formula syntax error at byte {tok[2]}: expected {want}, got {got}")
        self.i += 1
        return tok

    def parse(self) -> Formula:
        transform = IDENTITY
        head = self.take("ident")
        if head[1] == LOG and self.peek()[1] == "(":
            self.take("op", "(")
            response = self.take("ident")[1]
            self.take("op", ")")
            transform = LOG
        else:
            response = head[1]
        self.take("op", "~")

        terms, interactions = [], []
        intercept = True
        if self.peek()[1] == "-":
            intercept = self._minus_one()
        else:
            self._item(terms, interactions)
        while self.peek()[0] != "end":
            tok = self.peek()
            if tok[1] == "+":
                self.take("op", "+")
                self._item(terms, interactions)
            elif tok[1] == "-":
                intercept = self._minus_one()
            else:
                raise DataError(f"formula syntax error at byte {tok[2]}: expected '+' or '-', got {tok[1]!r}")
        return Formula(response, transform, tuple(terms), tuple(interactions), intercept)

    def _minus_one(self) -> bool:
        self.take("op", "-")
        self.take("num", "1")
        return False

    def _item(self, terms: list, interactions: list):
        tok = self.peek()
        if tok[0] == "num":
            self.take("num", "1")
            return
        a = self.take("ident")[1]
        if self.peek()[1] == ":":
            self.take("op", ":")
            b = self.take("ident")[1]
            interactions.append((a, b))
        else:
            terms.append(a)


def parse_formula(text: str) -> Formula:
    """Parse formula text; syntax errors report a byte offset."""
    if not isinstance(text, str) or not text.strip():
        raise DataError("formula syntax error at byte 0: empty formula")
    return _Parser(text).parse()


def format_formula(f: Formula) -> str:
    """Canonical text: parse_formula(format_formula(f)) == f."""
    lhs = f"log({f.response})" if f.transform == LOG else f.response
    items = list(f.terms) + [f"{a}:{b}" for a, b in f.interactions]
    if not items:
        return f"{lhs} ~ 1"
    rhs = " + ".join(items)
    if not f.intercept:
        rhs += " - 1"
    return f"{lhs} ~ {rhs}"


def additive_formula(response: str, features, transform: str = IDENTITY) -> Formula:
    """Main effects only, e.g. every untransformed feature of a dataset."""
    return Formula(response, transform, tuple(features), (), True)


# ---------------------------------------------------------------------------
# Categorical expansion
# ---------------------------------------------------------------------------
def _expand(ds: Dataset, name: str, levels: dict) -> tuple:
    """(column names, n x q block) for one raw feature."""
    values = ds.column(name)
    if ds.kind(name) != CATEGORICAL:
        return [name], values.reshape(-1, 1).astype(np.float64)
    known = levels.get(name)
    if known is None:
        known = ds.levels(name)
        levels[name] = known
    unseen = sorted(set(values.tolist()) - set(known))
    if unseen:
        raise DataError(f"unseen level(s) {unseen} for categorical {name}; fitted levels: {known}")
    block = np.column_stack([(values == lvl).astype(np.float64) for lvl in known[1:]]) \
        if len(known) > 1 else np.zeros((len(values), 0))
    return [f"{name}[{lvl}]" for lvl in known[1:]], block


class FeatureEncoder:
    """One-hot encoder for feature-list models (trees, forests, SVR).

    Categorical features expand to indicators for every level but the first
    (lexicographic); ``source[j]`` is the raw feature behind encoded column j.
    """

    def __init__(self, features, levels: dict | None = None):
        self.features = tuple(features)
        if not self.features:
            raise DataError("feature list is empty")
        self.levels = {k: list(v) for k, v in (levels or {}).items()}

    def fit(self, ds: Dataset) -> "FeatureEncoder":
        ds.require(self.features)
        for name in self.features:
            if name == ds.response_name:
                raise DataError(f"response {name} cannot be a feature")
            if ds.kind(name) == CATEGORICAL and name not in self.levels:
                self.levels[name] = ds.levels(name)
        return self

    @property
    def columns(self) -> tuple:
        names = []
        for name in self.features:
            if name in self.levels:
                names.extend(f"{name}[{lvl}]" for lvl in self.levels[name][1:])
            else:
                names.append(name)
        return tuple(names)

    @property
    def source(self) -> tuple:
        out = []
        for name in self.features:
            width = len(self.levels[name]) - 1 if name in self.levels else 1
            out.extend([name] * width)
        return tuple(out)

    def encode(self, ds: Dataset) -> np.ndarray:
        ds.require(self.features)
        blocks = []
        for name in self.features:
            if (name in self.levels) != (ds.kind(name) == CATEGORICAL):
                raise DataError(f"feature {name} changed kind since fit")
            blocks.append(_expand(ds, name, self.levels)[1])
        return np.hstack(blocks)

    def to_dict(self) -> dict:
        return {"features": list(self.features), "levels": {k: list(v) for k, v in self.levels.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureEncoder":
        return cls(d["features"], d.get("levels") or {})


# ---------------------------------------------------------------------------
# Design matrix
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DesignMatrix:
    formula: Formula
    column_names: tuple
    values: np.ndarray
    response: np.ndarray | None
    levels: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return self.values.shape


def transform_response(f: Formula, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if f.transform == LOG:
        if np.any(y <= 0):
            bad = int(np.flatnonzero(y <= 0)[0])
            raise DataError(f"log transform needs a strictly positive response; {f.response}[{bad}] = {y[bad]}")
        return np.log(y)
    return y.copy()


def design_matrix(f: Formula, ds: Dataset, levels: dict | None = None,
                  with_response: bool = True) -> DesignMatrix:
    """Materialize X (and the transformed response) for ``f`` over ``ds``.

    ``levels`` pins categorical levels from fit time; unseen levels raise.
    """
    ds.require(f.variables + ([f.response] if with_response else []))
    levels = dict(levels or {})
    n = ds.n
    names, blocks = [], []
    if f.intercept:
        names.append(INTERCEPT)
        blocks.append(np.ones((n, 1)))
    expanded = {}

    def block_of(name):
        if name not in expanded:
            expanded[name] = _expand(ds, name, levels)
        return expanded[name]

    for term in f.terms:
        cols, block = block_of(term)
        names.extend(cols)
        blocks.append(block)
    for a, b in f.interactions:
        cols_a, block_a = block_of(a)
        cols_b, block_b = block_of(b)
        for i, ca in enumerate(cols_a):
            for j, cb in enumerate(cols_b):
                names.append(f"{ca}:{cb}")
                blocks.append((block_a[:, i] * block_b[:, j]).reshape(-1, 1))
    if len(set(names)) != len(names):
        raise DataError(f"design matrix has duplicate column names: {names}")
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    X.setflags(write=False)
    y = transform_response(f, ds.column(f.response)) if with_response else None
    return DesignMatrix(f, tuple(names), X, y, levels)
