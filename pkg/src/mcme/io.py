"""Readers for the CLI input formats; every failure names the offending line."""

import csv

import numpy as np

from .core import MCMEError


class ParseError(MCMEError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path, self.line = path, line


def _float_rows(path, delimiter=","):
    """Numeric rows of a delimited file with an optional header line.

    Returns (line_numbers, rows). Blank lines and '#' comments are skipped.
    """
    out, lines = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter) if delimiter else (l.split() for l in fh)
        for lineno, row in enumerate(reader, start=1):
            cells = [c.strip() for c in row]
            if not cells or not any(cells) or cells[0].startswith("#"):
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                if not out and lineno == 1:
                    continue  # header
                raise ParseError(path, lineno, f"non-numeric field in {row!r}") from None
            if not all(np.isfinite(vals)):
                raise ParseError(path, lineno, "non-finite value")
            out.append(vals)
            lines.append(lineno)
    if not out:
        raise ParseError(path, 1, "no data rows")
    return lines, out


def _table(path, ncols=None, min_cols=2, delimiter=","):
    lines, rows = _float_rows(path, delimiter)
    width = len(rows[0]) if ncols is None else ncols
    if width < min_cols:
        raise ParseError(path, lines[0], f"expected at least {min_cols} columns, got {width}")
    for ln, row in zip(lines, rows):
        if len(row) != width:
            raise ParseError(path, ln, f"expected {width} columns, got {len(row)}")
    return np.array(rows, dtype=float)


def read_linear_csv(path):
    """Rows ``a1,...,ad,b``; returns (A, b)."""
    T = _table(path, min_cols=2)
    return T[:, :-1], T[:, -1]


def read_correspondences_csv(path):
    """Rows ``x,y,x2,y2`` with x ~ M x2; returns (x, x2) as (N, 2) arrays."""
    T = _table(path, ncols=4)
    return T[:, :2], T[:, 2:]


def read_pairs_csv(path):
    """Rows ``ax,ay,az,bx,by,bz``; returns (a, b)."""
    T = _table(path, ncols=6)
    return T[:, :3], T[:, 3:]


def read_xyz(path):
    """Whitespace-separated ``x y z`` per line; extra columns are ignored."""
    lines, rows = _float_rows(path, delimiter=None)
    for ln, row in zip(lines, rows):
        if len(row) < 3:
            raise ParseError(path, ln, "expected x y z")
    return np.array([r[:3] for r in rows], dtype=float)


def read_ply(path):
    """Vertex positions of an ASCII PLY file."""
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text or text[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    n_vert, props, in_vertex, end = None, [], False, None
    for lineno, line in enumerate(text[1:], start=2):
        tok = line.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise ParseError(path, lineno, "only ASCII PLY is supported")
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(path, lineno, "malformed element line")
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                try:
                    n_vert = int(tok[2])
                except ValueError:
                    raise ParseError(path, lineno, "vertex count is not an integer") from None
        elif tok[0] == "property":
            if in_vertex:
                if tok[1] == "list":
                    raise ParseError(path, lineno, "list properties on vertices are not supported")
                props.append(tok[-1])
        elif tok[0] == "end_header":
            end = lineno
            break
        else:
            raise ParseError(path, lineno, f"unexpected header keyword {tok[0]!r}")
    if end is None:
        raise ParseError(path, len(text), "missing end_header")
    if n_vert is None:
        raise ParseError(path, end, "no vertex element")
    try:
        ix = [props.index(c) for c in "xyz"]
    except ValueError:
        raise ParseError(path, end, "vertex element lacks x, y or z") from None
    # vertices come first only if declared first; we require that layout
    pts = []
    for k in range(n_vert):
        lineno = end + 1 + k
        if lineno > len(text):
            raise ParseError(path, lineno, f"expected {n_vert} vertices, file ended after {k}")
        tok = text[lineno - 1].split()
        if len(tok) < len(props):
            raise ParseError(path, lineno, f"expected {len(props)} values")
        try:
            pts.append([float(tok[i]) for i in ix])
        except ValueError:
            raise ParseError(path, lineno, "non-numeric vertex coordinate") from None
    return np.array(pts, dtype=float).reshape(-1, 3)


def read_cloud(path):
    """Point cloud from ``.ply`` or whitespace XYZ, chosen by suffix."""
    if str(path).lower().endswith(".ply"):
        return read_ply(path)
    return read_xyz(path)
