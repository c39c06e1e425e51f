"""Plain LP-file export for cross-checking models with external solvers."""

from __future__ import annotations

from .model import EQUAL, GREATER, LESS, LinearModel

_SENSE = {LESS: "<=", GREATER: ">=", EQUAL: "="}


def _term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    body = name if mag == 1 else f"{mag:.12g} {name}"
    return f"{sign} {body}" if not first else f"{sign}{body}"


def to_lp_string(model: LinearModel, name: str = "model") -> str:
    lines = [f"\\ {name}", "Minimize", " obj:"]
    terms = []
    first = True
    for v in model.variables:
        if v.obj != 0:
            terms.append(_term(v.obj, v.name, first))
            first = False
    lines.append("  " + (" ".join(terms) if terms else "0 " + model.variables[0].name if model.variables else "0"))
    lines.append("Subject To")
    for i, con in enumerate(model.constraints):
        terms = []
        first = True
        agg: dict[int, float] = {}
        for idx, coef in con.coeffs:
            agg[idx] = agg.get(idx, 0.0) + coef
        for idx in sorted(agg):
            if agg[idx] != 0:
                terms.append(_term(agg[idx], model.variables[idx].name, first))
                first = False
        label = con.name or f"c{i}"
        body = " ".join(terms) if terms else "0 " + model.variables[0].name
        lines.append(f" {label}: {body} {_SENSE[con.sense]} {con.rhs:.12g}")
    lines.append("Bounds")
    for v in model.variables:
        lines.append(f" {v.lower:.12g} <= {v.name} <= {v.upper:.12g}")
    ints = [v.name for v in model.variables if v.is_integer]
    if ints:
        lines.append("Generals")
        lines.append(" " + " ".join(ints))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp_file(model: LinearModel, path, name: str = "model") -> None:
    from pathlib import Path

    Path(path).write_text(to_lp_string(model, name))
