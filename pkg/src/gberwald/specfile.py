"""Text format for metric families.

A metric file is a sequence of `key = value` entries, one per logical line;
`#` starts a comment.  Values are scalars, vectors `[a, b]`, or matrices
`[[a, b], [c, d]]` whose entries are arithmetic expressions over the chart
variables x1..xn (operators + - * / ^, functions sin, cos, exp).
Bracketed values may continue over several physical lines.  Example:

    family = randers
    dim = 2
    a = [[1, 0], [0, 1]]
    b = [0.3 + 0.2*sin(x1), 0]

Supported families: `riemannian` (matrix a), `randers` (matrix a, vector
b), `frame_minkowski` (matrix frame, constant vector mink_b).  An optional
`domain = [[lo, hi], ...]` restricts the chart box.  Parse errors carry the
1-based line and column of the offending text.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, UnknownFamily
from .expressions import ExpressionError, evaluate, parse_expression, variables
from .metrics import (
    FrameMinkowskiFamily,
    MetricFamily,
    RandersFamily,
    RiemannianFamily,
)

_FAMILY_KEYS = {
    "riemannian": ("a",),
    "randers": ("a", "b"),
    "frame_minkowski": ("frame", "mink_b"),
}
_OPTIONAL_KEYS = ("domain",)


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.n = len(text)
        starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                starts.append(i + 1)
        self.line_starts = starts

    def pos(self, off: int) -> tuple[int, int]:
        """1-based (line, col) of an absolute text offset."""
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= off:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, off - self.line_starts[lo] + 1

    def error(self, message: str, off: int) -> ExpressionError:
        return ExpressionError(message, *self.pos(off))


def _scan_entries(scanner: _Scanner):
    """Yield (key, key_off, value, value_off) tuples from the file text."""
    text, n = scanner.text, scanner.n
    i = 0
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if not (ch.isalpha() or ch == "_"):
            raise scanner.error(f"expected a key, found {ch!r}", i)
        key_off = i
        while i < n and (text[i].isalnum() or text[i] == "_"):
            i += 1
        key = text[key_off:i]
        while i < n and text[i] in " \t":
            i += 1
        if i >= n or text[i] != "=":
            raise scanner.error(f"expected '=' after key {key!r}", i if i < n else n - 1)
        i += 1
        while i < n and text[i] in " \t":
            i += 1
        value_off = i
        depth = 0
        while i < n:
            c = text[i]
            if c == "[":
                depth += 1
            elif c == "]":
                depth -= 1
                if depth < 0:
                    raise scanner.error("unbalanced ']'", i)
            elif depth == 0 and (c == "\n" or c == "#"):
                break
            i += 1
        if depth > 0:
            raise scanner.error("unclosed '['", value_off)
        value = text[value_off:i]
        if not value.strip():
            raise scanner.error(f"key {key!r} has an empty value", value_off)
        yield key, key_off, value, value_off


def _strip_span(value: str, off: int):
    lead = len(value) - len(value.lstrip())
    return value.strip(), off + lead


def _structure(scanner: _Scanner, value: str, off: int):
    """Parse a value into nested lists of (source, offset) leaves."""
    value, off = _strip_span(value, off)
    if not value.startswith("["):
        return value, off
    if not value.endswith("]"):
        raise scanner.error("trailing text after ']'", off + len(value) - 1)
    inner = value[1:-1]
    inner_off = off + 1
    items = []
    depth = 0
    start = 0
    for i, c in enumerate(inner):
        if c == "[":
            depth += 1
        elif c == "]":
            depth -= 1
        elif c == "," and depth == 0:
            items.append((inner[start:i], inner_off + start))
            start = i + 1
    items.append((inner[start:], inner_off + start))
    out = []
    for item, item_off in items:
        if not item.strip():
            raise scanner.error("empty list entry", item_off)
        out.append(_structure(scanner, item, item_off))
    return out


def _leaf_expression(scanner: _Scanner, leaf):
    if isinstance(leaf, list):
        src_off = _find_offset(leaf)
        raise scanner.error("expected an expression, found a nested list", src_off)
    src, off = leaf
    line, col = scanner.pos(off)
    return parse_expression(src, line_offset=line - 1, col_offset=col - 1)


def _find_offset(node) -> int:
    while isinstance(node, list):
        node = node[0]
    return node[1]


def _leaf_constant(scanner: _Scanner, leaf) -> float:
    node = _leaf_expression(scanner, leaf)
    if variables(node):
        raise scanner.error("expected a constant, found chart variables", leaf[1])
    return float(evaluate(node, {}))


def _as_matrix(scanner: _Scanner, key: str, tree, rows: int, cols: int):
    if not isinstance(tree, list) or len(tree) != rows or any(
        not isinstance(r, list) or len(r) != cols for r in tree
    ):
        raise DimensionMismatch(f"key {key!r} must be a {rows}x{cols} matrix")
    return [[_leaf_expression(scanner, leaf) for leaf in row] for row in tree]


def _as_vector(scanner: _Scanner, key: str, tree, length: int):
    if not isinstance(tree, list) or len(tree) != length or any(
        isinstance(item, list) for item in tree
    ):
        raise DimensionMismatch(f"key {key!r} must be a vector of length {length}")
    return [_leaf_expression(scanner, leaf) for leaf in tree]


def parse_metric_spec(text: str) -> MetricFamily:
    """Build a metric family from its file text.

    Raises ExpressionError with 1-based line/column for syntax problems,
    UnknownFamily for an unrecognized family name, and DimensionMismatch
    when coefficient shapes disagree with the declared dimension.
    """
    scanner = _Scanner(text)
    entries: dict = {}
    for key, key_off, value, value_off in _scan_entries(scanner):
        if key in entries:
            raise scanner.error(f"duplicate key {key!r}", key_off)
        entries[key] = (value, value_off, key_off)

    if "family" not in entries:
        raise ExpressionError("metric file declares no family")
    fam_value, fam_off, _ = entries.pop("family")
    fam_name = fam_value.strip()
    if fam_name not in _FAMILY_KEYS:
        raise UnknownFamily(
            f"unknown family {fam_name!r}; supported: {', '.join(sorted(_FAMILY_KEYS))}"
        )

    if "dim" not in entries:
        raise ExpressionError("metric file declares no dim")
    dim_value, dim_off, _ = entries.pop("dim")
    try:
        dim = int(dim_value.strip())
    except ValueError:
        raise scanner.error(f"dim must be an integer, got {dim_value.strip()!r}", dim_off) from None
    if dim < 2:
        raise DimensionMismatch("metric families need dimension >= 2")

    domain = None
    if "domain" in entries:
        value, off, _ = entries.pop("domain")
        tree = _structure(scanner, value, off)
        if not isinstance(tree, list) or len(tree) != dim or any(
            not isinstance(r, list) or len(r) != 2 for r in tree
        ):
            raise DimensionMismatch(f"key 'domain' must be a {dim}x2 matrix of bounds")
        domain = [[_leaf_constant(scanner, leaf) for leaf in row] for row in tree]

    needed = _FAMILY_KEYS[fam_name]
    for key in needed:
        if key not in entries:
            raise ExpressionError(f"family {fam_name!r} needs key {key!r}")
    extra = set(entries) - set(needed)
    if extra:
        key = sorted(extra)[0]
        raise scanner.error(f"unknown key {key!r} for family {fam_name!r}", entries[key][2])

    def tree_of(key):
        value, off, _ = entries[key]
        return _structure(scanner, value, off)

    if fam_name == "riemannian":
        a = _as_matrix(scanner, "a", tree_of("a"), dim, dim)
        return RiemannianFamily(a, dim=dim, domain=domain)
    if fam_name == "randers":
        a = _as_matrix(scanner, "a", tree_of("a"), dim, dim)
        b = _as_vector(scanner, "b", tree_of("b"), dim)
        return RandersFamily(a, b, dim=dim, domain=domain)
    frame = _as_matrix(scanner, "frame", tree_of("frame"), dim, dim)
    tree = tree_of("mink_b")
    if not isinstance(tree, list) or len(tree) != dim or any(isinstance(t, list) for t in tree):
        raise DimensionMismatch(f"key 'mink_b' must be a vector of length {dim}")
    mink_b = [_leaf_constant(scanner, leaf) for leaf in tree]
    return FrameMinkowskiFamily(frame, mink_b, dim=dim, domain=domain)


# ---------------------------------------------------------------------------
# serialization

def _fmt_const(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def _matrix_text(rows) -> str:
    return "[" + ", ".join("[" + ", ".join(row) + "]" for row in rows) + "]"


def _vector_text(row) -> str:
    return "[" + ", ".join(row) + "]"


def serialize_family(family: MetricFamily) -> str:
    """Render a family back to file text; parsing the result reproduces a
    family with identical evaluations.  Families built from raw callables
    have no text form and raise ValueError."""
    lines = [f"family = {family.kind}", f"dim = {family.dim}"]
    if isinstance(family, RiemannianFamily) and not isinstance(family, RandersFamily):
        a = family.a.sources()
        if a is None:
            raise ValueError("coefficient fields are not serializable")
        lines.append(f"a = {_matrix_text(a)}")
    elif isinstance(family, RandersFamily):
        a = family.a.sources()
        b = family.b.sources()
        if a is None or b is None:
            raise ValueError("coefficient fields are not serializable")
        lines.append(f"a = {_matrix_text(a)}")
        lines.append(f"b = {_vector_text(b)}")
    elif isinstance(family, FrameMinkowskiFamily):
        frame = family.frame.sources()
        if frame is None:
            raise ValueError("frame fields are not serializable")
        lines.append(f"frame = {_matrix_text(frame)}")
        lines.append(f"mink_b = {_vector_text([_fmt_const(v) for v in family.mink_b])}")
    else:
        raise ValueError(f"family kind {family.kind!r} has no file form")
    if family.domain is not None:
        rows = [[_fmt_const(lo), _fmt_const(hi)] for lo, hi in np.asarray(family.domain)]
        lines.append(f"domain = {_matrix_text(rows)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# built-in families used throughout the test suite and CLI examples

BUILTINS = {
    "euclidean2": (
        "family = riemannian\n"
        "dim = 2\n"
        "a = [[1, 0], [0, 1]]\n"
    ),
    "riem_diag41": (
        "family = riemannian\n"
        "dim = 2\n"
        "a = [[4, 0], [0, 1]]\n"
    ),
    "conformal": (
        "family = riemannian\n"
        "dim = 2\n"
        "a = [[exp(2*sin(x1)), 0], [0, exp(2*sin(x1))]]\n"
    ),
    "randers_flat": (
        "family = randers\n"
        "dim = 2\n"
        "a = [[1, 0], [0, 1]]\n"
        "b = [0.3, 0]\n"
    ),
    "frame_randers": (
        "family = frame_minkowski\n"
        "dim = 2\n"
        "frame = [[1, 0], [0, exp(x1)]]\n"
        "mink_b = [0.3, 0]\n"
    ),
    "randers_sine": (
        "family = randers\n"
        "dim = 2\n"
        "a = [[1, 0], [0, 1]]\n"
        "b = [0.3 + 0.2*sin(x1), 0]\n"
    ),
}


def builtin_family(name: str) -> MetricFamily:
    if name not in BUILTINS:
        raise UnknownFamily(
            f"no built-in metric {name!r}; available: {', '.join(sorted(BUILTINS))}"
        )
    return parse_metric_spec(BUILTINS[name])
