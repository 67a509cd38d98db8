"""Fixed-format MPS writer for external cross-validation of LPs.

Emits the classic ROWS / COLUMNS / RHS / RANGES / BOUNDS sections with
fields anchored at the traditional character positions (2, 5, 15, 25, 40,
50).  Values carry 12 significant digits; a long value may run past its
nominal field width, which every mainstream reader tokenises fine since
fields never contain blanks.  Row and column names are mangled to at most
8 characters; a collision after mangling is an error rather than a silent
rename.
"""

from __future__ import annotations

from .lp_engine import EQ, GE, LE, LpProblem

__all__ = ["MpsNameCollisionError", "export_mps"]

_OBJ_NAME = "COST"
_RHS_SET = "RHS"
_BND_SET = "BND"


class MpsNameCollisionError(ValueError):
    def __init__(self, collisions: list[tuple[str, str, str]]):
        self.collisions = collisions
        lines = ", ".join(f"{a!r} and {b!r} -> {m!r}" for a, b, m in collisions)
        super().__init__(f"names collide after mangling to 8 characters: {lines}")


def _mangle(name: str) -> str:
    clean = "".join(ch for ch in name if ch.isalnum() or ch in "_.")
    if not clean:
        clean = "N"
    return clean[:8]


def _mangle_all(names: list[str]) -> list[str]:
    mangled = [_mangle(n) for n in names]
    seen: dict[str, str] = {}
    collisions = []
    for original, short in zip(names, mangled):
        if short in seen and seen[short] != original:
            collisions.append((seen[short], original, short))
        seen.setdefault(short, original)
    if collisions:
        raise MpsNameCollisionError(collisions)
    return mangled


def _num(v: float) -> str:
    return format(v, ".12g")


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    out = " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8)
    if f4 or f5 or f6:
        out += "  " + f4.ljust(12)
    if f5 or f6:
        out += "   " + f5.ljust(8) + "  " + f6.ljust(12)
    return out.rstrip() + "\n"


def export_mps(problem: LpProblem, name: str | None = None) -> str:
    """Render the problem as MPS text (minimisation, objective row COST)."""
    rows = _mangle_all(problem.row_names)
    cols = _mangle_all(problem.col_names)
    if _OBJ_NAME in rows:
        raise MpsNameCollisionError([(_OBJ_NAME, "objective row", _OBJ_NAME)])

    sense_tag = {LE: "L", GE: "G", EQ: "E"}
    out = [f"NAME          {(name or problem.name)[:60]}\n"]
    out.append("ROWS\n")
    out.append(_line("N", _OBJ_NAME))
    for i in range(problem.n_rows):
        out.append(_line(sense_tag[problem.senses[i]], rows[i]))

    # entries per column: objective first, then rows in index order
    mat = problem.matrix().tocsc()
    out.append("COLUMNS\n")
    for j in range(problem.n_cols):
        entries: list[tuple[str, float]] = []
        if problem.objective[j] != 0.0:
            entries.append((_OBJ_NAME, float(problem.objective[j])))
        start, end = mat.indptr[j], mat.indptr[j + 1]
        for pos in range(start, end):
            entries.append((rows[mat.indices[pos]], float(mat.data[pos])))
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            if len(pair) == 2:
                out.append(
                    _line("", cols[j], pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1]))
                )
            else:
                out.append(_line("", cols[j], pair[0][0], _num(pair[0][1])))

    out.append("RHS\n")
    rhs_entries = [
        (rows[i], float(problem.rhs[i])) for i in range(problem.n_rows) if problem.rhs[i] != 0.0
    ]
    for k in range(0, len(rhs_entries), 2):
        pair = rhs_entries[k : k + 2]
        if len(pair) == 2:
            out.append(
                _line("", _RHS_SET, pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1]))
            )
        else:
            out.append(_line("", _RHS_SET, pair[0][0], _num(pair[0][1])))

    out.append("RANGES\n")

    out.append("BOUNDS\n")
    for j in range(problem.n_cols):
        lo, up = problem.lower[j], problem.upper[j]
        if lo == 0.0 and up == float("inf"):
            continue
        if lo == up:
            out.append(_line("FX", _BND_SET, cols[j], _num(lo)))
            continue
        if lo == float("-inf") and up == float("inf"):
            out.append(_line("FR", _BND_SET, cols[j]))
            continue
        if lo == float("-inf"):
            out.append(_line("MI", _BND_SET, cols[j]))
        elif lo != 0.0:
            out.append(_line("LO", _BND_SET, cols[j], _num(lo)))
        if up != float("inf"):
            out.append(_line("UP", _BND_SET, cols[j], _num(up)))

    out.append("ENDATA\n")
    return "".join(out)
