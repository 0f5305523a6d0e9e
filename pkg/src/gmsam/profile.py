"""Analytic parameter and FLOP accounting for encoders.

Convention: one multiply-accumulate is 2 FLOPs; convolutions cost
``2 * out_elems * (in_ch / groups) * kh * kw`` (+1 per output for bias);
matmuls ``2 * m * n * k``; attention counts both the QK^T and AV products;
elementwise and normalisation ops cost 1 FLOP per element; reshapes are free.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import prod

import numpy as np

from gmsam import numerics as nx
from gmsam.encoders.models import build_encoder, check_image_shape
from gmsam.ledger import DISTILLATION_TABLE, QUOTED_REDUCTIONS, student_row, teacher_row

PAPER_INPUT_SHAPE = (1, 3, 1024, 1024)
CONVENTION = "FLOPs: MAC = 2 FLOPs; attention QK^T and AV counted; elementwise/norm ops 1 FLOP per element"


@dataclass
class LayerRow:
    name: str
    params: int = 0
    flops: int = 0


@dataclass
class ProfileReport:
    model: str
    input_shape: tuple | None
    rows: list = field(default_factory=list)

    @property
    def total_params(self):
        return sum(r.params for r in self.rows)

    @property
    def total_flops(self):
        return sum(r.flops for r in self.rows)

    def to_text(self):
        shape = "x".join(map(str, self.input_shape)) if self.input_shape else "-"
        width = max([len(r.name) for r in self.rows] + [5])
        lines = [f"# {self.model}  input={shape}", f"# {CONVENTION}",
                 f"{'layer':<{width}} {'params':>12} {'flops':>16}"]
        lines += [f"{r.name:<{width}} {r.params:>12,d} {r.flops:>16,d}" for r in self.rows]
        lines.append(f"{'TOTAL':<{width}} {self.total_params:>12,d} {self.total_flops:>16,d}")
        lines.append(f"# params={self.total_params / 1e6:.4f}M flops={self.total_flops / 1e6:.2f}M")
        return "\n".join(lines)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "params", "flops"])
        for r in self.rows:
            w.writerow([r.name, r.params, r.flops])
        w.writerow(["TOTAL", self.total_params, self.total_flops])
        return buf.getvalue()


def _leaf_param_rows(model):
    rows = []
    for name, module in model.named_modules():
        if module._params:
            rows.append(LayerRow(name, params=module.param_count()))
    return rows


def count_params(model):
    """Per-layer closed-form parameter counts."""
    return ProfileReport(model.name, None, _leaf_param_rows(model))


def count_flops(model, input_shape=PAPER_INPUT_SHAPE):
    """Per-layer analytic FLOPs for one forward pass at ``input_shape``."""
    input_shape = tuple(int(v) for v in input_shape)
    check_image_shape(input_shape)
    rows, _ = model.flop_rows(input_shape)
    return ProfileReport(model.name, input_shape, [LayerRow(n, flops=f) for n, f in rows])


def profile_model(model, input_shape=PAPER_INPUT_SHAPE):
    """Parameters and FLOPs merged into one per-layer table."""
    flops = count_flops(model, input_shape)
    merged = {r.name: LayerRow(r.name, flops=r.flops) for r in flops.rows}
    for r in count_params(model).rows:
        merged.setdefault(r.name, LayerRow(r.name)).params = r.params
    return ProfileReport(model.name, flops.input_shape, list(merged.values()))


# -- oracles -------------------------------------------------------------------


def inventory_param_total(model):
    """Element count summed over the parameter inventory."""
    return sum(prod(shape) for _, shape in model.parameter_inventory())


def instrumented_flops(model, input_shape):
    """FLOPs counted inside every primitive during a real forward pass."""
    dtype = model.parameters()[0].dtype
    x = nx.Tensor(np.zeros(input_shape, dtype=dtype))
    with nx.no_grad(), nx.count_flops() as counter:
        model(x)
    return counter.total


def oracle_check(model, input_shape):
    report = profile_model(model, input_shape)
    checks = {
        "params": (report.total_params, inventory_param_total(model)),
        "flops": (report.total_flops, instrumented_flops(model, input_shape)),
    }
    return {k: (a, b, a == b) for k, (a, b) in checks.items()}


# -- comparisons ---------------------------------------------------------------


def percent_reduction(before, after):
    return 100.0 * (before - after) / before


@dataclass
class StructureCost:
    name: str
    structure: list
    params: int
    flops: int


@dataclass
class ComparisonReport:
    input_shape: tuple
    entries: list

    def reductions(self):
        """(from, to, params %, flops %) for every ordered pair in table order."""
        out = []
        for i, a in enumerate(self.entries):
            for b in self.entries[i + 1:]:
                out.append((a.name, b.name, percent_reduction(a.params, b.params),
                            percent_reduction(a.flops, b.flops)))
        return out

    def to_text(self):
        lines = [f"# input={'x'.join(map(str, self.input_shape))}", f"# {CONVENTION}",
                 f"{'model':<20} {'structure':<16} {'params':>12} {'flops':>16}"]
        for e in self.entries:
            lines.append(f"{e.name:<20} {str(e.structure or '-'):<16} {e.params:>12,d} {e.flops:>16,d}")
        for a, b, p, f in self.reductions():
            # printed as signed change, so a cost increase shows up as "+"
            lines.append(f"{a} -> {b}: params {-p:+.2f}%  flops {-f:+.2f}%")
        return "\n".join(lines)


def compare_structures(specs, input_shape=PAPER_INPUT_SHAPE, seed=0):
    """Cost every spec, sort by parameter count (largest first), report reductions."""
    entries = []
    for spec in specs:
        model = build_encoder(spec, seed)
        report = profile_model(model, input_shape)
        entries.append(StructureCost(model.name, spec.structure(), report.total_params, report.total_flops))
    entries.sort(key=lambda e: (-e.params, -e.flops, e.name))
    return ComparisonReport(tuple(input_shape), entries)


def published_reductions():
    """Recompute the quoted teacher -> GMF [2,2,8,2] reductions from the raw table values."""
    t, s = teacher_row(), student_row((2, 2, 8, 2))
    return {
        "params_percent": percent_reduction(t.params_m, s.params_m),
        "params_abs_m": t.params_m - s.params_m,
        "flops_percent": percent_reduction(t.flops_m, s.flops_m),
        "flops_abs_m": t.flops_m - s.flops_m,
        "quoted": dict(QUOTED_REDUCTIONS),
    }


def published_costs():
    return [(r.model, r.structure, r.params_m, r.flops_m, r.citation) for r in DISTILLATION_TABLE]
