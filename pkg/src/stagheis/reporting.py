"""Report emission: versioned JSON, flat CSV tables, and figures.

A run produces report.json (one document, schema_version pinned),
scaling.csv and structure.csv next to it, and PNG figures under figures/.
Re-running the same configuration reproduces report.json byte-for-byte
except for the generated_at stamp.
"""

import datetime
import json
import os

from .lattice import LatticeSpec, StateSpaceError, build_lattice
from .operators import (build_hamiltonian, build_order_parameter,
                        build_staggered_sy)
from .reports import structure_csv_rows

SCHEMA_VERSION = 1


def lattice_inventory(cfg):
    """Geometry summaries and headline operator metadata per configured L."""
    out = []
    b_ref = next((b for b in cfg.B_list if b != 0.0), 0.2)
    for L in cfg.L_list:
        entry = {"L": L}
        try:
            lat = build_lattice(LatticeSpec(d=cfg.d, L=L, S=cfg.S),
                                max_state_bits=cfg.state_bits_cap)
        except StateSpaceError as exc:
            entry["skipped"] = str(exc)
            out.append(entry)
            continue
        entry["lattice"] = lat.to_json_dict()
        ops = [build_hamiltonian(lat, b_ref), build_order_parameter(lat)]
        feasible_r = [r for r in cfg.R_list if r <= L - 1]
        if feasible_r:
            ops.append(build_staggered_sy(lat, feasible_r[0]))
        entry["operators"] = [op.metadata() for op in ops]
        out.append(entry)
    return out


def assemble_payload(cfg, results, inventory=None):
    """Merge scenario results (sorted by name) into the report document."""
    results = sorted(results, key=lambda r: r.name)
    scenarios = []
    n_pass = n_fail = n_skip = 0
    for res in results:
        reps = [r.to_dict() for r in res.reports]
        scal = [r.to_dict() for r in res.scaling]
        failed = res.n_failed()
        n_fail += failed
        n_pass += len(res.reports) + len(res.scaling) - failed \
            + (0 if res.error else 0)
        n_skip += len(res.skips)
        scenarios.append({
            "scenario": res.name,
            "anchor": res.anchor,
            "reports": reps,
            "scaling": scal,
            "skips": res.skips,
            "extras": res.extras,
            "error": res.error,
            "n_failed": failed,
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "generated_at": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "config": cfg.to_dict(),
        "systems": inventory if inventory is not None else [],
        "scenarios": scenarios,
        "summary": {"n_pass": n_pass, "n_fail": n_fail, "n_skip": n_skip},
    }


def write_report_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_scaling_csv(path, results):
    lines = ["scenario,name,R,measured,fitted_exponent,predicted_exponent,"
             "prefactor,fit_residual"]
    for res in sorted(results, key=lambda r: r.name):
        for rep in res.scaling:
            for r, v in zip(rep.r_values, rep.measured):
                lines.append(
                    f"{res.name},{rep.name},{r},{v!r},"
                    f"{_fmt(rep.fitted_exponent)},{rep.predicted_exponent!r},"
                    f"{_fmt(rep.prefactor)},{_fmt(rep.fit_residual)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_structure_csv(path, results):
    rows = []
    for res in sorted(results, key=lambda r: r.name):
        rows.extend(res.structure_rows)
    with open(path, "w") as fh:
        fh.write("\n".join(structure_csv_rows(rows)) + "\n")


def _fmt(x):
    return "" if x is None else repr(float(x))


def render_figures(out_dir, results):
    """Render the run's figures; returns the list of files written."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    by_name = {res.name: res for res in results}

    scaling = [rep for res in results for rep in res.scaling]
    if scaling:
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for rep in scaling:
            ax.loglog(rep.r_values, rep.measured, "o", label=rep.name)
            if rep.fitted_exponent is not None:
                import numpy as np
                rr = np.array(rep.r_values, dtype=float)
                ax.loglog(rr, rep.prefactor * rr ** rep.fitted_exponent, "-",
                          label=f"fit: R^{rep.fitted_exponent:.3f}")
                ax.loglog(rr, rep.measured[0]
                          * (rr / rr[0]) ** rep.predicted_exponent, "--",
                          label=f"reference: R^{rep.predicted_exponent:g}")
        ax.set_xlabel("R")
        ax.set_ylabel("summed double-commutator norm")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(fig_dir, "double_commutator_scaling.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    rows = [row for res in results for row in res.structure_rows]
    if rows:
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        markers = {"duhamel_ir": "o", "falk_bruch": "s", "double_comm": "^",
                   "sym_from_duhamel": "v", "corr_ir": "d",
                   "sym_zero_t": "P", "corr_ir_zero_t": "X",
                   "duhamel_le_sym": "*", "adjoint_pair": "+"}
        seen = set()
        for row in rows:
            for name, entry in row.bounds.items():
                if entry.get("rhs") is None:
                    continue
                label = name if name not in seen else None
                seen.add(name)
                ax.plot(entry["rhs"], entry["lhs"],
                        markers.get(name, "o"), ms=4, alpha=0.6, label=label)
        lims = ax.get_xlim()
        hi = max(abs(lims[0]), abs(lims[1]), 1e-9)
        ax.plot([0, hi], [0, hi], "k-", lw=0.8)
        ax.set_xlabel("bound (rhs)")
        ax.set_ylabel("measured (lhs)")
        ax.set_title("structure-factor bounds: points must lie below the line")
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        path = os.path.join(fig_dir, "structure_bounds.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    vm = by_name.get("variational-magnetization")
    if vm and vm.extras.get("magnetization"):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        pts = vm.extras["magnetization"]
        for L in sorted({p["L"] for p in pts}):
            xs = [p["B"] for p in pts if p["L"] == L]
            ys = [p["m"] for p in pts if p["L"] == L]
            order = sorted(range(len(xs)), key=lambda i: xs[i])
            ax.plot([xs[i] for i in order], [ys[i] for i in order],
                    "o-", label=f"L={L}")
        ax.set_xlabel("staggered field B")
        ax.set_ylabel("order parameter per site")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(fig_dir, "magnetization_curve.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    sw = by_name.get("spectral-windows")
    if sw and sw.extras.get("window_weights"):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        pts = sw.extras["window_weights"]
        for key, style in (("low", "o-"), ("mid", "s-"), ("high", "^-")):
            xs = sorted({p["B"] for p in pts})
            ys = [sum(p[key] for p in pts if p["B"] == b) for b in xs]
            ax.plot(xs, ys, style, label=f"{key} window")
        ax.set_xlabel("staggered field B")
        ax.set_ylabel("probe weight")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(fig_dir, "window_weights.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    return written
