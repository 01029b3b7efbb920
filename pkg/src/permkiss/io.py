"""Instance and result serialization.

Formats:
  * QAPLIB .dat: whitespace-separated integers "n, then n^2 for A, then n^2
    for B" (blank lines and arbitrary whitespace tolerated).
  * QAPLIB .sln: first line "n objective", then a 1-based permutation.
  * sparse LAP triplets: header line "n", then "i j value" lines, 0-based.
  * matrix dump: header "rows cols", then row-major reals.
  * reports: JSON with a schema version field; absent metrics are omitted.
"""

import json

import numpy as np

from .lowrank import Assignment
from .oracle import qap_objective
from .solvers import LapInstance, QapInstance, SolveReport

REPORT_SCHEMA = "permkiss.report/1"


class ParseError(ValueError):
    """Malformed instance or solution text, with position information."""


def _tokenize(text: str):
    """Tokens with (line, column) positions, treating all whitespace alike."""
    out = []
    for ln, line in enumerate(text.splitlines(), start=1):
        col = 0
        for tok in line.split():
            col = line.index(tok, col)
            out.append((tok, ln, col + 1))
            col += len(tok)
    return out


def _int_token(tokens, k, what):
    if k >= len(tokens):
        if tokens:
            _, ln, col = tokens[-1]
            raise ParseError(f"missing token #{k + 1} ({what}): input ends after line {ln}")
        raise ParseError(f"missing token #{k + 1} ({what}): empty input")
    tok, ln, col = tokens[k]
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"line {ln}, column {col}: expected integer for {what}, got {tok!r}") from None


def parse_qaplib(text: str, name: str = "") -> QapInstance:
    """Parse a QAPLIB-format instance: n, then A row-major, then B row-major."""
    tokens = _tokenize(text)
    n = _int_token(tokens, 0, "problem size n")
    if n <= 0:
        raise ParseError(f"problem size must be positive, got n={n}")
    need = 1 + 2 * n * n
    if len(tokens) > need:
        tok, ln, col = tokens[need]
        raise ParseError(f"line {ln}, column {col}: unexpected extra token {tok!r} "
                         f"(expected exactly {need} tokens for n={n})")
    flat = np.array(
        [_int_token(tokens, k, "matrix entry") for k in range(1, need)], dtype=np.float64
    )
    a = flat[: n * n].reshape(n, n)
    b = flat[n * n :].reshape(n, n)
    return QapInstance(name=name, A=a, B=b)


def serialize_qaplib(inst: QapInstance) -> str:
    lines = [str(inst.n), ""]
    for mat in (inst.A, inst.B):
        for row in mat:
            lines.append(" ".join(str(int(round(x))) for x in row))
        lines.append("")
    return "\n".join(lines)


def parse_solution(text: str) -> tuple[int, float, Assignment]:
    """Parse a QAPLIB .sln file: "n objective" then a 1-based permutation."""
    tokens = _tokenize(text)
    n = _int_token(tokens, 0, "problem size n")
    if n <= 0:
        raise ParseError(f"problem size must be positive, got n={n}")
    if len(tokens) < 2:
        raise ParseError("missing objective value")
    tok, ln, col = tokens[1]
    try:
        objective = float(tok)
    except ValueError:
        raise ParseError(f"line {ln}, column {col}: expected number for objective, got {tok!r}") from None
    if len(tokens) != 2 + n:
        raise ParseError(f"expected {n} permutation entries, found {len(tokens) - 2}")
    perm = np.array([_int_token(tokens, 2 + k, "permutation entry") for k in range(n)],
                    dtype=np.int64)
    if perm.min() < 1 or perm.max() > n:
        raise ParseError("permutation entries must be 1-based indices in [1, n]")
    try:
        assignment = Assignment(perm - 1)
    except ValueError as e:
        raise ParseError(str(e)) from None
    return n, objective, assignment


def serialize_solution(n: int, objective: float, assignment: Assignment) -> str:
    body = " ".join(str(int(j) + 1) for j in assignment.target)
    obj = int(objective) if float(objective).is_integer() else objective
    return f"{n} {obj}\n{body}\n"


def attach_solution(inst: QapInstance, text: str) -> QapInstance:
    """Attach a parsed .sln optimum to an instance, validating consistency."""
    n, objective, assignment = parse_solution(text)
    if n != inst.n:
        raise ParseError(f"solution is for n={n}, instance has n={inst.n}")
    val = qap_objective(inst.A, inst.B, assignment)
    if abs(val - objective) > 1e-6 * max(1.0, abs(objective)):
        raise ParseError(
            f"solution objective {objective} not reproduced by its permutation "
            f"(evaluates to {val})"
        )
    return QapInstance(
        name=inst.name, A=inst.A, B=inst.B, optimum=objective, opt_assignment=assignment
    )


def parse_triplets(text: str) -> LapInstance:
    """Parse a sparse LAP: header "n", then 0-based "i j value" lines."""
    rows, cols, vals = [], [], []
    n = None
    seen = set()
    for ln, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if n is None:
            if len(parts) != 1:
                raise ParseError(f"line {ln}: header must be a single integer n")
            try:
                n = int(parts[0])
            except ValueError:
                raise ParseError(f"line {ln}: header must be an integer, got {parts[0]!r}") from None
            if n <= 0:
                raise ParseError(f"line {ln}: n must be positive, got {n}")
            continue
        if len(parts) != 3:
            raise ParseError(f"line {ln}: expected 'row col value', got {line!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"line {ln}: malformed triplet {line!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"line {ln}: index ({i}, {j}) out of range for n={n}")
        if (i, j) in seen:
            raise ParseError(f"line {ln}: duplicate entry ({i}, {j})")
        seen.add((i, j))
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if n is None:
        raise ParseError("empty input: missing header line with n")
    return LapInstance(
        n=n,
        rows=np.array(rows, dtype=np.int64),
        cols=np.array(cols, dtype=np.int64),
        vals=np.array(vals, dtype=np.float64),
    )


def serialize_triplets(inst: LapInstance) -> str:
    if not inst.is_sparse:
        raise ValueError("dense instance; use matrix_to_text")
    lines = [str(inst.n)]
    for i, j, v in zip(inst.rows, inst.cols, inst.vals):
        lines.append(f"{i} {j} {float(v)!r}")
    return "\n".join(lines) + "\n"


def matrix_to_text(mat: np.ndarray) -> str:
    mat = np.asarray(mat, dtype=np.float64)
    lines = [f"{mat.shape[0]} {mat.shape[1]}"]
    for row in mat:
        lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    tokens = _tokenize(text)
    r = _int_token(tokens, 0, "row count")
    c = _int_token(tokens, 1, "column count")
    need = 2 + r * c
    if len(tokens) != need:
        raise ParseError(f"expected {r * c} matrix entries, found {len(tokens) - 2}")
    vals = []
    for k in range(2, need):
        tok, ln, col = tokens[k]
        try:
            vals.append(float(tok))
        except ValueError:
            raise ParseError(f"line {ln}, column {col}: expected number, got {tok!r}") from None
    return np.array(vals).reshape(r, c)


def emit_report(report: SolveReport) -> str:
    """Serialize a solve report to JSON with full float precision."""
    doc = {"schema": REPORT_SCHEMA}
    doc.update(report.to_dict())
    return json.dumps(doc)


def load_report(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema") != REPORT_SCHEMA:
        raise ParseError(f"unknown report schema: {doc.get('schema')!r}")
    return doc
