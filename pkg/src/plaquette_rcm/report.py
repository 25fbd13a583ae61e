"""Delimited outputs, config snapshots, and figure rendering.

Schemas are fixed so repeated runs with the same config and seed produce
byte-identical CSV/JSONL files; figures are rendered next to the data they
plot (one per plot-data file).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lattice import Bc, Box, PercolationConfig, enumerate_cells

SWEEP_COLUMNS = ["q", "bc", "group", "p", "m1", "m2", "area", "perimeter",
                 "p_hat", "ci_lo", "ci_hi", "n", "successes", "seed"]

PLOT_COLUMNS = ["p", "m1", "m2", "area", "perimeter", "p_hat",
                "neg_log_p_hat", "neg_log_over_area", "neg_log_over_per",
                "ci_lo", "ci_hi", "n", "seed"]

TRACE_COLUMNS = ["sweep", "n_plaquettes", "dual_components", "v_gamma"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def write_sweep_csv(path: str, rows) -> None:
    write_csv(path, SWEEP_COLUMNS, rows)


def write_trace_jsonl(path: str, trace) -> None:
    with open(path, "w") as fh:
        for row in trace:
            out = {k: row.get(k) for k in TRACE_COLUMNS if k in row}
            fh.write(json.dumps(out, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# config snapshots
# ---------------------------------------------------------------------------

def _bits_to_hex(bits: np.ndarray) -> str:
    return np.packbits(bits.astype(np.uint8), bitorder="little").tobytes().hex()


def _hex_to_bits(hexstr: str, n: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


@dataclass
class ConfigSnapshot:
    """Losslessly serializable percolation configuration."""

    d: int
    i: int
    box_lo: tuple
    box_hi: tuple
    bc: str
    q: float
    p: float
    seed: int
    sweep: int
    n_cells: int
    plaquettes_hex: str
    dual_hex: str | None = None

    @classmethod
    def of(cls, P: PercolationConfig, q: float, p: float, seed: int,
           sweep: int, with_dual: bool = False) -> "ConfigSnapshot":
        dual_hex = None
        if with_dual and P.i == P.box.d - 1:
            from .duality import dualize

            dual_hex = _bits_to_hex(dualize(P).occupied)
        return cls(P.box.d, P.i, P.box.lo, P.box.hi, P.bc.value, q, p,
                   seed, sweep, P.n_cells(), _bits_to_hex(P.occupied), dual_hex)

    def to_json(self) -> str:
        d = asdict(self)
        d["box_lo"] = list(d["box_lo"])
        d["box_hi"] = list(d["box_hi"])
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ConfigSnapshot":
        d = json.loads(text)
        d["box_lo"] = tuple(d["box_lo"])
        d["box_hi"] = tuple(d["box_hi"])
        return cls(**d)

    def restore(self) -> PercolationConfig:
        box = Box(self.box_lo, self.box_hi)
        bits = _hex_to_bits(self.plaquettes_hex, self.n_cells)
        if len(enumerate_cells(box, self.i)) != self.n_cells:
            raise ValueError("snapshot cell count does not match the box")
        return PercolationConfig(box, self.i, bits, Bc(self.bc))


# ---------------------------------------------------------------------------
# plot data and figures
# ---------------------------------------------------------------------------

def emit_plot_data(results, outdir: str, render: bool = True) -> list[str]:
    """One plot-data CSV (and figure) per (q, bc, group) of a sweep.

    Rows lacking a positive p_hat keep empty decay columns so the schema is
    stable; the figure shows -log p_hat normalized by area and perimeter.
    """
    os.makedirs(outdir, exist_ok=True)
    groups: dict[tuple, list] = {}
    for row in results:
        key = (row["q"], row["bc"], row["group"])
        groups.setdefault(key, []).append(row)
    written = []
    for (q, bc, group), rows in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        out = []
        for r in sorted(rows, key=lambda r: (r["area"], r["perimeter"], r["p"])):
            row = {c: r.get(c, "") for c in PLOT_COLUMNS}
            if r["p_hat"] and r["p_hat"] > 0:
                nl = -math.log(r["p_hat"])
                row["neg_log_p_hat"] = nl
                row["neg_log_over_area"] = nl / r["area"]
                row["neg_log_over_per"] = nl / r["perimeter"]
            else:
                row["neg_log_p_hat"] = ""
                row["neg_log_over_area"] = ""
                row["neg_log_over_per"] = ""
            out.append(row)
        stem = f"plotdata_q{q:g}_{bc}_group{group}"
        path = os.path.join(outdir, stem + ".csv")
        write_csv(path, PLOT_COLUMNS, out)
        written.append(path)
        if render:
            fig_path = os.path.join(outdir, stem + ".png")
            _render_decay_figure(out, fig_path,
                                 title=f"q={q:g}, bc={bc}, group={group}")
            written.append(fig_path)
    return written


def _render_decay_figure(rows, path: str, title: str) -> None:
    pts = [r for r in rows if r["neg_log_p_hat"] != ""]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, key, label in ((axes[0], "neg_log_over_area", "-log p / Area"),
                           (axes[1], "neg_log_over_per", "-log p / Per")):
        if pts:
            x = [r["area"] for r in pts]
            y = [r[key] for r in pts]
            ax.plot(x, y, "o-", ms=4)
        ax.set_xlabel("Area")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": "plaquette-rcm"})
    plt.close(fig)


def read_plot_data_points(path: str):
    """Load (area, perimeter, p_hat) triples back for fit_decay."""
    pts = []
    for row in read_csv(path):
        if row["p_hat"] and float(row["p_hat"]) > 0:
            pts.append((float(row["area"]), float(row["perimeter"]),
                        float(row["p_hat"])))
    return pts


def write_fit_report(path: str, fits: dict) -> None:
    def default(o):
        if hasattr(o, "__dict__"):
            return o.__dict__
        if isinstance(o, float) and math.isinf(o):
            return "inf"
        raise TypeError(type(o))

    with open(path, "w") as fh:
        json.dump(fits, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def render_trace_figure(trace, path: str, title: str = "") -> None:
    """|P| per sweep, the report-path figure for `sample` runs."""
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot([r["sweep"] for r in trace], [r["n_plaquettes"] for r in trace],
            lw=0.7)
    ax.set_xlabel("sweep")
    ax.set_ylabel("|P|")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": "plaquette-rcm"})
    plt.close(fig)
