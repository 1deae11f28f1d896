"""Tabulated bound curves (fidelity and rate versus CHSH value)."""
from __future__ import annotations

import csv
import io
import math
from typing import Sequence

import numpy as np

from . import bounds
from .scenario import TSIRELSON

P0_VALUES = (0.25, 0.1, 0.01)
REGIME_TOKEN = bounds.Flag.REGIME_VIOLATED.value

Table = tuple[list[str], list[list]]


def beta_grid(resolution: int) -> np.ndarray:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    grid = np.linspace(2.0, TSIRELSON, resolution)
    grid[-1] = TSIRELSON
    return grid


def fig3(resolution: int = 201) -> Table:
    """Deterministic BSM bound: delta = 1, delta = beta/2sqrt2, and product sources."""
    header = ["beta", "f_bsm_delta_1", "f_bsm_delta_scaled", "f_bsm_independent_sources"]
    rows = []
    for beta in beta_grid(resolution):
        f_o = bounds.f_o_combined([0.25] * 4, [bounds.f_o_from_chsh(beta)] * 4)
        rows.append([
            float(beta),
            bounds.bsm_fidelity_bound(f_o, bounds.f_i_from_delta(1.0)),
            bounds.bsm_fidelity_bound(f_o, bounds.f_i_from_delta(beta / TSIRELSON)),
            bounds.independent_sources_curve(beta),
        ])
    return header, rows


def _partial_table(resolution: int, quantity: str) -> Table:
    header = ["beta_0"] + [f"{quantity}_p0_{p0:g}" for p0 in P0_VALUES]
    rows = []
    for beta in beta_grid(resolution):
        f_o_0 = bounds.f_o_from_chsh(beta)
        f_i = bounds.f_i_from_delta(min(1.0, beta / TSIRELSON))
        row: list = [float(beta)]
        for p0 in P0_VALUES:
            flags: set = set()
            if quantity == "f_cond":
                value = bounds.conditional_fidelity_bound(f_o_0, f_i, p0, flags)
            else:
                value = bounds.zeta_lower_bound(f_i, p0, flags)
            row.append(REGIME_TOKEN if bounds.Flag.REGIME_VIOLATED in flags else value)
        rows.append(row)
    return header, rows


def fig5(resolution: int = 201) -> Table:
    """Conditional fidelity of a heralding branch for several heralding probabilities."""
    return _partial_table(resolution, "f_cond")


def fig6(resolution: int = 201) -> Table:
    """Lower bound on the success factor zeta_0 for several heralding probabilities."""
    return _partial_table(resolution, "zeta_0")


FIGURES = {"fig3": fig3, "fig5": fig5, "fig6": fig6}


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def parse_csv(text: str) -> Table:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[v if v == REGIME_TOKEN else float(v) for v in row] for row in reader]
    return header, rows


def is_monotone(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]) if not (math.isnan(a) or math.isnan(b)))
