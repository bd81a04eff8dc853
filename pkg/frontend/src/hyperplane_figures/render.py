"""Render diagnostic figures from hyperplane CSV outputs.

Figures are pure post-processing: they never recompute statistics, only
display what the CLI wrote. Three kinds are supported:

  perimeter-growth     hull-trace CSVs -> log-scale perimeter against radius
  rescaled-histogram   pv_terminals.csv -> histogram of the rescaled terminal
                       perimeter with the limiting exponential density overlay
  bridge-discrepancy   bridge_discrepancies.csv -> discrepancy against size
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("perimeter-growth", "rescaled-histogram", "bridge-discrepancy")

GROWTH_RATE = 2.0 * np.sqrt(2.0)
LIMIT_RATE = 12.0


class SchemaError(ValueError):
    """An input CSV does not carry the columns the figure needs."""


@dataclass
class FigureSpec:
    inputs: list[str]
    kind: str
    output: str
    horizon: float = 4.0
    dpi: int = 150
    title: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def _read_csv(path: str, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path} is missing column(s) {missing}; found {header}")
        rows = list(reader)
    out = {}
    for col in required:
        out[col] = np.array([float(r[col]) for r in rows]) if rows else np.empty(0)
    return out


def _new_axes(title: str | None):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    if title:
        ax.set_title(title)
    return fig, ax


def _perimeter_growth(spec: FigureSpec, ax) -> None:
    any_data = False
    for k, path in enumerate(spec.inputs):
        data = _read_csv(path, ("r", "boundary_edges"))
        if data["r"].size == 0:
            continue
        any_data = True
        label = Path(path).stem if len(spec.inputs) > 1 else "hull boundary"
        ax.plot(data["r"], data["boundary_edges"], "o-", ms=3, lw=1,
                alpha=0.8, label=label if k < 12 else None)
    ax.set_xlabel("radius $r$")
    ax.set_ylabel(r"$|\partial B_r^\bullet|$")
    if any_data:
        ax.set_yscale("log")
        if len(spec.inputs) > 1:
            ax.legend(fontsize=7, ncol=2)


def _rescaled_histogram(spec: FigureSpec, ax) -> None:
    data = _read_csv(spec.inputs[0], ("P_T",))
    vals = data["P_T"] * np.exp(-GROWTH_RATE * spec.horizon)
    ax.set_xlabel(r"$e^{-2\sqrt{2}\,r}\,P_r$")
    ax.set_ylabel("density")
    if vals.size == 0:
        return
    ax.hist(vals, bins=max(int(np.sqrt(vals.size)), 10), density=True,
            alpha=0.6, label="simulated")
    grid = np.linspace(0, max(vals.max(), 0.5), 400)
    ax.plot(grid, LIMIT_RATE * np.exp(-LIMIT_RATE * grid), "r-",
            label=f"Exp({LIMIT_RATE:.0f}) density")
    ax.legend()


def _bridge_discrepancy(spec: FigureSpec, ax) -> None:
    data = _read_csv(spec.inputs[0],
                     ("n", "perimeter_discrepancy", "perimeter_stderr"))
    ax.set_xlabel("size parameter $n$")
    ax.set_ylabel("transform discrepancy")
    if data["n"].size == 0:
        return
    ax.errorbar(data["n"], data["perimeter_discrepancy"],
                yerr=2 * data["perimeter_stderr"], fmt="o-", capsize=3,
                label="perimeter")
    try:
        vol = _read_csv(spec.inputs[0], ("volume_discrepancy", "volume_stderr"))
        ax.errorbar(data["n"], vol["volume_discrepancy"],
                    yerr=2 * vol["volume_stderr"], fmt="s--", capsize=3,
                    label="volume")
    except SchemaError:
        pass
    ax.legend()


_RENDERERS = {
    "perimeter-growth": _perimeter_growth,
    "rescaled-histogram": _rescaled_histogram,
    "bridge-discrepancy": _bridge_discrepancy,
}


def render(spec: FigureSpec) -> str:
    """Render the figure described by spec; returns the output path."""
    fig, ax = _new_axes(spec.title)
    try:
        _RENDERERS[spec.kind](spec, ax)
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return str(spec.output)
