"""MPS export/import and plain-text solution files.

The writer emits fixed-format MPS (NAME / ROWS / COLUMNS with
INTORG-INTEND markers / RHS / RANGES / BOUNDS / ENDATA) with generated
short names ``C<k>`` and ``R<i>`` so long internal names never break
column alignment; original names are kept as ``*`` comments.  The reader
accepts the same layout whitespace-delimited, so files round-trip and
free-format files from other tools parse too.  Solution files are
``variable-name value`` lines; names may be the generated or the
original ones.
"""

from __future__ import annotations

import re

import numpy as np

from ucproxy.milp import BINARY, CONTINUOUS, INF, MilpModel, ModelError


def _col_name(j: int) -> str:
    return f"C{j:07d}"


def _row_name(i: int) -> str:
    return f"R{i:07d}"


def _num(v: float) -> str:
    # repr gives the shortest digits that round-trip the double exactly
    return repr(float(v))


def export_standard(model: MilpModel, destination) -> None:
    """Write ``model`` as a fixed-format MPS document.

    ``destination`` is a path or a writable text file object.
    """
    own = not hasattr(destination, "write")
    fh = open(destination, "w") if own else destination
    try:
        _write_mps(model, fh)
    finally:
        if own:
            fh.close()


def _write_mps(model: MilpModel, fh) -> None:
    w = fh.write
    w(f"NAME          {model.name[:60]}\n")
    for i, name in enumerate(model.row_names):
        w(f"* row {_row_name(i)} = {name}\n")
    for j, name in enumerate(model.var_names):
        w(f"* col {_col_name(j)} = {name}\n")

    w("ROWS\n")
    w(" N  COST\n")
    row_type = []
    for i in range(model.n_rows):
        lo, hi = model.row_lo[i], model.row_hi[i]
        if lo == hi:
            t = "E"
        elif np.isfinite(hi):
            t = "L"
        else:
            t = "G"
        row_type.append(t)
        w(f" {t}  {_row_name(i)}\n")

    # column-major entries
    entries: list[list[tuple[str, float]]] = [[] for _ in range(model.n_vars)]
    for i, (cols, coefs) in enumerate(zip(model.row_cols, model.row_coefs)):
        for c, v in zip(cols, coefs):
            entries[int(c)].append((_row_name(i), float(v)))

    w("COLUMNS\n")
    in_int = False
    marker = 0
    for j in range(model.n_vars):
        is_bin = model.var_kinds[j] == BINARY
        if is_bin and not in_int:
            w(f"    MARKER{marker:04d}  'MARKER'                 'INTORG'\n")
            in_int = True
            marker += 1
        if not is_bin and in_int:
            w(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'\n")
            in_int = False
            marker += 1
        cn = _col_name(j)
        w(f"    {cn}  COST      {_num(model.obj[j])}\n")
        for rn, v in entries[j]:
            w(f"    {cn}  {rn}  {_num(v)}\n")
    if in_int:
        w(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'\n")

    w("RHS\n")
    for i in range(model.n_rows):
        lo, hi = model.row_lo[i], model.row_hi[i]
        rhs = hi if row_type[i] == "L" else lo
        if rhs != 0.0:
            w(f"    RHS       {_row_name(i)}  {_num(rhs)}\n")

    ranged = [
        i for i in range(model.n_rows)
        if row_type[i] == "L" and np.isfinite(model.row_lo[i])
        and model.row_lo[i] != model.row_hi[i]
    ]
    if ranged:
        w("RANGES\n")
        for i in ranged:
            w(f"    RNG       {_row_name(i)}  "
              f"{_num(model.row_hi[i] - model.row_lo[i])}\n")

    w("BOUNDS\n")
    for j in range(model.n_vars):
        cn = _col_name(j)
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            w(f" FX BND       {cn}  {_num(lo)}\n")
            continue
        if np.isfinite(lo):
            if lo != 0.0:
                w(f" LO BND       {cn}  {_num(lo)}\n")
        else:
            w(f" MI BND       {cn}\n")
        if np.isfinite(hi):
            w(f" UP BND       {cn}  {_num(hi)}\n")
    w("ENDATA\n")


def import_standard(source) -> MilpModel:
    """Parse an MPS document back into a MilpModel.

    Variable and row ordering follows the file; generated names are kept
    (MPS has no channel for the original long names).
    """
    own = not hasattr(source, "read")
    fh = open(source) if own else source
    try:
        lines = fh.readlines()
    finally:
        if own:
            fh.close()

    model = MilpModel("imported")
    section = None
    obj_row = None
    row_sense: dict[str, str] = {}
    row_entries: dict[str, list[tuple[str, float]]] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_kind: dict[str, str] = {}
    col_obj: dict[str, float] = {}
    col_entries: dict[str, list[tuple[str, float]]] = {}
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    bounds: dict[str, dict[str, float | None]] = {}
    in_int = False

    section_re = re.compile(
        r"^(NAME|ROWS|COLUMNS|RHS|RANGES|BOUNDS|ENDATA)(\s|$)")

    for raw in lines:
        if not raw.strip() or raw.startswith("*"):
            continue
        head = section_re.match(raw)
        if head and not raw.startswith(" "):
            section = head.group(1)
            if section == "NAME":
                parts = raw.split()
                model.name = parts[1] if len(parts) > 1 else "imported"
            if section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            sense, name = tok[0].upper(), tok[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = name
                continue
            if sense not in ("E", "L", "G"):
                raise ModelError(f"unknown row sense {sense!r}")
            row_sense[name] = sense
            row_order.append(name)
            row_entries[name] = []
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1].strip("'\"").upper() == "MARKER":
                mk = tok[2].strip("'\"").upper()
                in_int = mk == "INTORG"
                continue
            # also accept "name 'MARKER' ... 'INTORG'" token orders
            if "'MARKER'" in raw:
                in_int = "'INTORG'" in raw
                continue
            col = tok[0]
            if col not in col_entries:
                col_order.append(col)
                col_entries[col] = []
                col_obj[col] = 0.0
                col_kind[col] = BINARY if in_int else CONTINUOUS
            pairs = tok[1:]
            if len(pairs) % 2:
                raise ModelError(f"odd COLUMNS record: {raw.rstrip()}")
            for rname, val in zip(pairs[::2], pairs[1::2]):
                if rname == obj_row or (obj_row is None and rname == "COST"):
                    col_obj[col] += float(val)
                else:
                    if rname not in row_sense:
                        raise ModelError(f"entry for undeclared row {rname!r}")
                    col_entries[col].append((rname, float(val)))
        elif section == "RHS":
            pairs = tok[1:]
            for rname, val in zip(pairs[::2], pairs[1::2]):
                rhs[rname] = float(val)
        elif section == "RANGES":
            pairs = tok[1:]
            for rname, val in zip(pairs[::2], pairs[1::2]):
                ranges[rname] = float(val)
        elif section == "BOUNDS":
            btype = tok[0].upper()
            col = tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            bounds.setdefault(col, {})[btype] = val
        elif section in (None, "NAME"):
            continue

    # build variables in file order
    for col in col_order:
        kind = col_kind[col]
        lo: float = 0.0
        hi: float = 1.0 if kind == BINARY else INF
        b = bounds.get(col, {})
        if "BV" in b:
            kind, lo, hi = BINARY, 0.0, 1.0
        if "MI" in b:
            lo = -INF
        if "PL" in b:
            hi = INF
        if "LO" in b and b["LO"] is not None:
            lo = b["LO"]
        if "UP" in b and b["UP"] is not None:
            hi = b["UP"]
        if "FX" in b and b["FX"] is not None:
            lo = hi = b["FX"]
        if "FR" in b:
            lo, hi = -INF, INF
        model.add_var(col, kind=kind, lb=lo, ub=hi, obj=col_obj[col])

    for col in col_order:
        for rname, val in col_entries[col]:
            row_entries[rname].append((col, val))

    for rname in row_order:
        sense = row_sense[rname]
        b = rhs.get(rname, 0.0)
        if sense == "E":
            lo, hi = b, b
        elif sense == "L":
            lo, hi = -INF, b
        else:
            lo, hi = b, INF
        if rname in ranges:
            r = ranges[rname]
            if sense == "L":
                lo = b - abs(r)
            elif sense == "G":
                hi = b + abs(r)
            else:
                lo, hi = (b, b + r) if r >= 0 else (b + r, b)
        cols = [model.var_index(c) for c, _ in row_entries[rname]]
        coefs = [v for _, v in row_entries[rname]]
        model.add_row(rname, cols, coefs, lo=lo, hi=hi)
    return model


def write_solution(destination, model: MilpModel, x: np.ndarray,
                   objective: float | None = None) -> None:
    """Write a ``variable-name value`` solution file for ``model``."""
    own = not hasattr(destination, "write")
    fh = open(destination, "w") if own else destination
    try:
        if objective is not None:
            fh.write(f"* objective {_num(objective)}\n")
        for j, name in enumerate(model.var_names):
            fh.write(f"{name} {_num(float(x[j]))}\n")
    finally:
        if own:
            fh.close()


def import_solution(source, model: MilpModel) -> np.ndarray:
    """Read a solution file and align values with ``model`` variables.

    Accepts original variable names or the generated ``C<k>`` export
    names.  Missing continuous variables default to 0; a missing binary
    is an error, as is any unknown name.
    """
    own = not hasattr(source, "read")
    fh = open(source) if own else source
    try:
        lines = fh.readlines()
    finally:
        if own:
            fh.close()

    x = np.zeros(model.n_vars)
    seen = np.zeros(model.n_vars, dtype=bool)
    gen_re = re.compile(r"^C(\d{7})$")
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith(("*", "#")):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ModelError(f"malformed solution line: {line!r}")
        name, val = parts[0], float(parts[1])
        if name in model._name_to_idx:
            j = model.var_index(name)
        else:
            m = gen_re.match(name)
            if not m or int(m.group(1)) >= model.n_vars:
                raise ModelError(f"unknown variable name {name!r}")
            j = int(m.group(1))
        x[j] = val
        seen[j] = True

    for j in np.nonzero(~seen)[0]:
        if model.var_kinds[j] == BINARY:
            raise ModelError(
                f"solution missing value for binary {model.var_names[j]!r}")
    return x
