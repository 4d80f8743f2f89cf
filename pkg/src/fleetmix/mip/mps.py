"""
MPS export and import.

Fixed format is written when every row and column name stays unique after
truncation to 8 characters and every coefficient fits a 12-character
field exactly; otherwise the writer falls back to free MPS and says so in a
comment line. The reader accepts both (names never contain blanks).
"""

import logging
import math
from collections import defaultdict

from .model import MipError, MipModel, ModelBuilder, Sense, VarKind

logger = logging.getLogger(__name__)

OBJECTIVE_ROW = "COST"
FIXED_NAME_WIDTH = 8
FIXED_NUMBER_WIDTH = 12

_ROW_TYPES = {Sense.LE: "L", Sense.GE: "G", Sense.EQ: "E"}
_SENSES = {"L": Sense.LE, "G": Sense.GE, "E": Sense.EQ}


class MpsError(MipError):
    """MPS text could not be written or parsed."""

    pass


def _fixed_number(value: float) -> str | None:
    for precision in range(12, 0, -1):
        text = f"{value:.{precision}g}"
        if len(text) <= FIXED_NUMBER_WIDTH and float(text) == value:
            return text
    return None


def _free_number(value: float) -> str:
    return repr(float(value))


def _truncated(names: list[str]) -> list[str] | None:
    short = [name[:FIXED_NAME_WIDTH] for name in names]
    if len(set(short)) != len(short):
        return None
    return short


def _numbers(model: MipModel) -> list[float]:
    values = [c for c in model.objective if c != 0.0]
    values.append(-model.objective_constant)
    for con in model.constraints:
        values.append(con.rhs)
        values.extend(coef for _, coef in con.terms)
    for var in model.variables:
        values.extend(v for v in (var.lower, var.upper) if math.isfinite(v))
    return values


def mps_names(model: MipModel, fixed: bool = True) -> tuple[list[str], list[str], str | None]:
    """
    Column and row names as written, plus the reason for a free-format
    fallback (None when fixed format is used).
    """
    columns = [var.name for var in model.variables]
    rows = [con.name for con in model.constraints]
    if not fixed:
        return columns, rows, "free format requested"
    short_columns = _truncated(columns)
    short_rows = _truncated([OBJECTIVE_ROW, *rows])
    if short_columns is None or short_rows is None:
        return columns, rows, "names collide after 8-character truncation"
    if any(_fixed_number(v) is None for v in _numbers(model)):
        return columns, rows, "coefficients do not fit 12-character fields"
    return short_columns, short_rows[1:], None


def _fixed_line(code: str, name1: str, name2: str = "", value: str = "") -> str:
    # columns 2-3, 5-12, 15-22, 25-36
    line = f" {code:<2} {name1:<8}  {name2:<8}  {value:>12}" if value else f" {code:<2} {name1:<8}  {name2}"
    return line.rstrip()


def export_mps(model: MipModel, fixed: bool = True) -> str:
    columns, rows, fallback = mps_names(model, fixed)
    free = fallback is not None
    if free and fixed:
        logger.warning(f"MPS export of {model.name}: {fallback}, writing free MPS")
    number = _free_number if free else _fixed_number

    def line(code: str, name1: str, name2: str = "", value: float | None = None) -> str:
        text = "" if value is None else number(value)
        if free:
            return " " + " ".join(part for part in (code, name1, name2, text) if part)
        return _fixed_line(code, name1, name2, text)

    out = [f"NAME          {model.name}"]
    if free:
        out.append(f"* free MPS: {fallback}")
    out.append("ROWS")
    out.append(line("N", OBJECTIVE_ROW))
    for con, row in zip(model.constraints, rows):
        out.append(line(_ROW_TYPES[con.sense], row))

    entries: dict[int, list[tuple[str, float]]] = defaultdict(list)
    for k, coef in enumerate(model.objective):
        if coef != 0.0:
            entries[k].append((OBJECTIVE_ROW, coef))
    for con, row in zip(model.constraints, rows):
        for idx, coef in con.terms:
            entries[idx].append((row, coef))

    out.append("COLUMNS")
    binaries = [k for k, var in enumerate(model.variables) if var.is_binary]
    continuous = [k for k, var in enumerate(model.variables) if not var.is_binary]

    def column(k: int) -> None:
        items = entries.get(k) or [(OBJECTIVE_ROW, 0.0)]
        for row, coef in items:
            out.append(line("", columns[k], row, coef))

    for k in continuous:
        column(k)
    if binaries:
        out.append(line("", "MARKER", "'MARKER'") + "                 'INTORG'")
        for k in binaries:
            column(k)
        out.append(line("", "MARKER", "'MARKER'") + "                 'INTEND'")

    out.append("RHS")
    if model.objective_constant != 0.0:
        out.append(line("", "RHS", OBJECTIVE_ROW, -model.objective_constant))
    for con, row in zip(model.constraints, rows):
        if con.rhs != 0.0:
            out.append(line("", "RHS", row, con.rhs))

    out.append("BOUNDS")
    for k, var in enumerate(model.variables):
        name = columns[k]
        if var.is_binary:
            if var.lower == var.upper:
                out.append(line("FX", "BND", name, var.lower))
            elif var.lower == 0.0 and var.upper == 1.0:
                out.append(line("BV", "BND", name))
            else:
                raise MpsError(f"Binary {var.name} has bounds [{var.lower}, {var.upper}]")
            continue
        if var.lower == var.upper:
            out.append(line("FX", "BND", name, var.lower))
            continue
        if var.lower == -math.inf and var.upper == math.inf:
            out.append(line("FR", "BND", name))
            continue
        if var.lower == -math.inf:
            out.append(line("MI", "BND", name))
        elif var.lower != 0.0:
            out.append(line("LO", "BND", name, var.lower))
        if var.upper != math.inf:
            out.append(line("UP", "BND", name, var.upper))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_mps(text: str) -> MipModel:
    """Read fixed or free MPS written by ``export_mps`` (minimization, no RANGES)."""
    name = "mps"
    section = None
    objective_row = None
    row_senses: dict[str, Sense] = {}
    row_order: list[str] = []
    column_order: list[str] = []
    coefficients: dict[str, list[tuple[str, float]]] = defaultdict(list)
    integer_columns: set[str] = set()
    rhs: dict[str, float] = {}
    lower: dict[str, float] = {}
    upper: dict[str, float] = {}
    binary: set[str] = set()
    in_integer_block = False

    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            section = tokens[0].upper()
            if section == "NAME":
                name = tokens[1] if len(tokens) > 1 else name
            elif section == "RANGES":
                raise MpsError(f"Line {number}: RANGES are not supported")
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA", "OBJSENSE"):
                raise MpsError(f"Line {number}: unknown section {section}")
            continue
        try:
            if section == "ROWS":
                code, row = tokens[0].upper(), tokens[1]
                if code == "N":
                    if objective_row is None:
                        objective_row = row
                    continue
                row_senses[row] = _SENSES[code]
                row_order.append(row)
            elif section == "COLUMNS":
                if len(tokens) >= 3 and tokens[1].strip("'").upper() == "MARKER":
                    in_integer_block = tokens[2].strip("'").upper() == "INTORG"
                    continue
                col = tokens[0]
                if col not in coefficients:
                    column_order.append(col)
                    coefficients[col] = []
                if in_integer_block:
                    integer_columns.add(col)
                pairs = tokens[1:]
                for k in range(0, len(pairs) - 1, 2):
                    coefficients[col].append((pairs[k], float(pairs[k + 1])))
            elif section == "RHS":
                pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
                for k in range(0, len(pairs) - 1, 2):
                    rhs[pairs[k]] = float(pairs[k + 1])
            elif section == "BOUNDS":
                code, col = tokens[0].upper(), tokens[2]
                value = float(tokens[3]) if len(tokens) > 3 else None
                if code == "BV":
                    binary.add(col)
                elif code == "FX":
                    lower[col] = upper[col] = value  # type: ignore[assignment]
                elif code == "FR":
                    lower[col], upper[col] = -math.inf, math.inf
                elif code == "MI":
                    lower[col] = -math.inf
                elif code == "LO":
                    lower[col] = value  # type: ignore[assignment]
                elif code == "UP":
                    upper[col] = value  # type: ignore[assignment]
                else:
                    raise MpsError(f"Line {number}: unsupported bound type {code}")
        except (IndexError, KeyError, ValueError) as e:
            raise MpsError(f"Line {number}: cannot parse {raw.strip()!r}") from e

    if objective_row is None:
        raise MpsError("MPS text has no objective row")
    builder = ModelBuilder(name, kind="mps")
    index: dict[str, int] = {}
    row_terms: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for col in column_order:
        obj = sum(coef for row, coef in coefficients[col] if row == objective_row)
        is_integer = col in integer_columns or col in binary
        lo = lower.get(col, 0.0)
        hi = upper.get(col, 1.0 if is_integer else math.inf)
        if is_integer and (lo < 0 or hi > 1):
            raise MpsError(f"Integer column {col} is not binary")
        kind = VarKind.BINARY if is_integer else VarKind.CONTINUOUS
        index[col] = builder.add_var(col, kind, lower=lo, upper=hi, obj=obj)
        for row, coef in coefficients[col]:
            if row == objective_row:
                continue
            if row not in row_senses:
                raise MpsError(f"Column {col} references unknown row {row}")
            row_terms[row].append((index[col], coef))
    for row in row_order:
        builder.add_constraint(row, row_terms[row], row_senses[row], rhs.get(row, 0.0))
    builder.constant = -rhs.get(objective_row, 0.0)
    return builder.build()
