"""Experiment runners behind the CLI: manifests in, CSV + JSON summaries out.

A run is split into independent chunks keyed by (kind-specific) descriptors.
Chunk results are cached as JSON keyed by the manifest hash, so interrupted
runs resume, finished runs are no-ops, and the merge is associative: any
worker count produces identical outputs.  Every output row carries the
manifest hash, seed, trial range, and code version.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import clustergeom as cg
from .lattice import HeightFunction, blocks_of, build_box, build_wedge
from .percolation import label, sample, giant_proxy, is_finite_proxy, cluster_subgraph
from .stats import TailEstimate, fit_log_rate, ols_line, wilson_interval
from . import isoperimetry as iso
from . import renorm
from . import walk as walkmod
from . import wedge as wedgemod

HEADER_VERSION = "v1"


def manifest_hash(manifest: dict) -> str:
    canon = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _provenance(manifest, trial_lo=0, trial_hi=0):
    return {
        "manifest_sha": manifest_hash(manifest),
        "code_version": __version__,
        "seed": manifest["seed"],
        "trial_lo": trial_lo,
        "trial_hi": trial_hi,
    }


PROV_FIELDS = ["manifest_sha", "code_version", "seed", "trial_lo", "trial_hi"]


def _height(desc) -> HeightFunction:
    return HeightFunction.from_descriptor(desc)


def _anchor_near_origin(host, labeling, cid: int) -> int:
    """Cluster vertex closest to the window center, smallest id on ties."""
    members = labeling.vertices_of(cid)
    dist = np.abs(host.coords[members]).max(axis=1)
    return int(members[np.argmin(dist)])


# ---------------------------------------------------------------------------
# repulsion-tail

def _rt_chunks(m):
    per_batch = m["trials"] // m["batches"]
    block = 5000
    out = []
    for pi in range(len(m["p"])):
        for b in range(m["batches"]):
            lo = b * per_batch
            for s in range(lo, lo + per_batch, block):
                out.append({"p_idx": pi, "batch": b, "lo": s,
                            "hi": min(s + block, lo + per_batch)})
    return out


def _rt_run(m, ch):
    host = build_box(m["d"], m["n"])
    p = m["p"][ch["p_idx"]]
    ts = np.arange(m["t_lo"], m["t_hi"] + 1)
    counts = np.zeros(len(ts), dtype=np.int64)
    e = host.edges
    for t in range(ch["lo"], ch["hi"]):
        config = sample(host, p, m["seed"], trial=t)
        lab = label(config)
        g = giant_proxy(lab)
        o = lab.cluster_of(host.origin)
        if g.cluster is None or g.cluster == o:
            continue
        if not is_finite_proxy(lab, o, g):
            continue
        if lab.sizes[o] < m["m0"]:
            continue
        lu, lv = lab.labels[e[:, 0]], lab.labels[e[:, 1]]
        tau = int(np.count_nonzero(((lu == o) & (lv == g.cluster))
                                   | ((lv == o) & (lu == g.cluster))))
        counts += tau >= ts
    return {"counts": counts.tolist(), "trials": ch["hi"] - ch["lo"]}


def _rt_final(m, chunks, results):
    ts = list(range(m["t_lo"], m["t_hi"] + 1))
    acc = {}
    for ch, res in zip(chunks, results):
        key = (ch["p_idx"], ch["batch"])
        slot = acc.setdefault(key, {"counts": np.zeros(len(ts), dtype=np.int64),
                                    "trials": 0, "lo": ch["lo"], "hi": ch["hi"]})
        slot["counts"] += np.array(res["counts"])
        slot["trials"] += res["trials"]
        slot["lo"] = min(slot["lo"], ch["lo"])
        slot["hi"] = max(slot["hi"], ch["hi"])
    rows, fits = [], []
    for (pi, b), slot in sorted(acc.items()):
        p = m["p"][pi]
        ests = [TailEstimate(float(t), slot["trials"], int(c))
                for t, c in zip(ts, slot["counts"])]
        for est in ests:
            lo_w, hi_w = est.interval
            rows.append({
                **_provenance(m, slot["lo"], slot["hi"]),
                "p": p, "batch": b, "t": est.index,
                "trials": est.trials, "successes": est.successes,
                "p_hat": est.p_hat, "wilson_lo": lo_w, "wilson_hi": hi_w,
            })
        fit = fit_log_rate(ests, m["fit_lo"], m["fit_hi"])
        fits.append({
            "p": p, "batch": b,
            "slope": fit.slope if fit else None,
            "stderr": fit.stderr if fit else None,
            "sigmas": abs(fit.slope) / fit.stderr if fit else None,
            "points": fit.n_points if fit else 0,
        })
    summary = {
        "fits": fits,
        "all_negative_3sigma": all(
            f["slope"] is not None and f["slope"] < 0 and f["sigmas"] >= 3
            for f in fits
        ),
    }
    return rows, summary


# ---------------------------------------------------------------------------
# iso-profile

def _ip_chunks(m):
    return [{"n": n, "seed_idx": s} for n in m["n_list"] for s in range(m["seeds"])]


def _ip_run(m, ch):
    host = build_box(m["d"], ch["n"])
    config = sample(host, m["p"], m["seed"], trial=ch["seed_idx"])
    lab = label(config)
    g = giant_proxy(lab)
    anchor = _anchor_near_origin(host, lab, g.cluster)
    points = iso.profile(
        config, lab, g.cluster, anchor, m["size_classes"],
        seed=m["seed"] * 1000 + ch["seed_idx"],
        exact_max=m.get("exact_max", 0),
        uniform_trials=m.get("uniform_trials", 20),
    )
    return {"points": [
        {"size_class": pt.size_class, "min_ratio": pt.min_ratio,
         "witness": pt.witness, "samples": pt.samples, "exact": pt.exact}
        for pt in points
    ], "giant_size": int(lab.sizes[g.cluster])}


def _ip_final(m, chunks, results):
    rows = []
    per_n = {}
    for ch, res in zip(chunks, results):
        for pt in res["points"]:
            rows.append({
                **_provenance(m, ch["seed_idx"], ch["seed_idx"] + 1),
                "n": ch["n"], "seed_idx": ch["seed_idx"], **pt,
            })
            if not pt["exact"] and math.isfinite(pt["min_ratio"]):
                per_n.setdefault(ch["n"], []).append(pt["min_ratio"])
    minima = {str(n): min(v) for n, v in sorted(per_n.items())}
    summary = {"min_heuristic_ratio": minima}
    if len(minima) >= 2:
        ns = sorted(per_n)
        summary["band_ok"] = min(per_n[ns[0]]) <= 2.0 * min(per_n[ns[-1]])
        summary["all_positive"] = all(v > 0 for v in minima.values())
    return rows, summary


# ---------------------------------------------------------------------------
# sharpness

def _sh_chunks(m):
    block = 200
    return [{"lo": s, "hi": min(s + block, m["trials"])}
            for s in range(0, m["trials"], block)]


def _sh_run(m, ch):
    host = build_box(m["d"], m["n"])
    rows = []
    for t in range(ch["lo"], ch["hi"]):
        config = sample(host, m["p"], m["seed"], trial=t)
        res = iso.sharpness_witness(config, m["r"])
        if res is None:
            rows.append({"trial": t, "success": False, "frontier_size": -1,
                         "S_size": 0, "redeclared": 0})
        else:
            rows.append({
                "trial": t, "success": res.attached,
                "frontier_size": int(len(res.frontier_edges)),
                "S_size": int(res.S.size),
                "redeclared": res.redeclared,
            })
    return {"rows": rows}


def _sh_final(m, chunks, results):
    rows = []
    for ch, res in zip(chunks, results):
        for r in res["rows"]:
            rows.append({**_provenance(m, ch["lo"], ch["hi"]), **r})
    succ = [r for r in rows if r["success"]]
    summary = {
        "attempts": len(rows),
        "successes": len(succ),
        "frontier_one_fraction": (
            sum(r["frontier_size"] == 1 for r in succ) / len(succ) if succ else None
        ),
    }
    return rows, summary


# ---------------------------------------------------------------------------
# heat-kernel

def _hk_chunks(m):
    return [{"seed_idx": s} for s in range(m["seeds"])]


def _hk_run(m, ch):
    host = build_box(m["d"], m["n"])
    config = sample(host, m["p"], m["seed"], trial=ch["seed_idx"])
    lab = label(config)
    g = giant_proxy(lab)
    if m["p"] >= 1.0:
        anchor = host.origin
    else:
        rng = np.random.default_rng([m["seed"], ch["seed_idx"]])
        members = lab.vertices_of(g.cluster)
        anchor = int(members[rng.integers(len(members))])
    sub = cluster_subgraph(config, lab, g.cluster)
    op = walkmod.WalkOperator(sub, beta=m["beta"])
    seq = walkmod.heat_kernel_at_origin(op, sub.local_of(anchor), m["n_steps"])
    fit = walkmod.decay_exponent(seq, m["fit_lo"], m["fit_hi"])
    return {"p_seq": seq.tolist(), "slope": fit.slope, "stderr": fit.stderr,
            "anchor": int(anchor), "V": sub.num_vertices}


def _hk_final(m, chunks, results):
    rows, slopes = [], []
    for ch, res in zip(chunks, results):
        slopes.append(res["slope"])
        for n, pn in enumerate(res["p_seq"]):
            rows.append({
                **_provenance(m, ch["seed_idx"], ch["seed_idx"] + 1),
                "seed_idx": ch["seed_idx"], "n": n, "p_n": pn,
            })
    summary = {
        "slopes": slopes,
        "mean_slope": float(np.mean(slopes)),
        "fit_window": [m["fit_lo"], m["fit_hi"]],
    }
    return rows, summary


# ---------------------------------------------------------------------------
# mixing (relaxation time scaling, optional L-inf mixing time)

def _mx_chunks(m):
    return [{"n": n, "seed_idx": s} for n in m["n_list"] for s in range(m["seeds"])]


def _mx_run(m, ch):
    host = build_box(m["d"], ch["n"])
    config = sample(host, m["p"], m["seed"], trial=ch["seed_idx"])
    lab = label(config)
    g = giant_proxy(lab)
    sub = cluster_subgraph(config, lab, g.cluster)
    sr = walkmod.relaxation_time(sub, beta=m["beta"])
    out = {
        "V": sub.num_vertices, "E": sub.num_edges,
        "lambda2": sr.lambda2, "gap": sr.gap,
        "t_rel": sr.relaxation_time, "residual": sr.residual,
        "iterations": sr.iterations,
    }
    if m.get("eps") is not None:
        mix = walkmod.linfty_mixing(sub, beta=m["beta"], eps=m["eps"])
        out["t_mix"] = mix.n_mix
    return out


def _mx_final(m, chunks, results):
    rows, per_n = [], {}
    for ch, res in zip(chunks, results):
        rows.append({
            **_provenance(m, ch["seed_idx"], ch["seed_idx"] + 1),
            "n": ch["n"], "seed_idx": ch["seed_idx"], **res,
        })
        per_n.setdefault(ch["n"], []).append(res["t_rel"])
    med = {n: float(np.median(v)) for n, v in sorted(per_n.items())}
    summary = {"median_t_rel": {str(n): t for n, t in med.items()}}
    if len(med) >= 3:
        ns = sorted(med)
        slope, _, err = ols_line(np.log(ns), np.log([med[n] for n in ns]))
        summary["exponent"] = slope
        summary["exponent_stderr"] = err
    return rows, summary


# ---------------------------------------------------------------------------
# wedge-entropy

def _we_chunks(m):
    block = 500
    out = []
    for fi in range(len(m["families"])):
        for s in range(0, m["n_sets"], block):
            out.append({"family_idx": fi, "lo": s, "hi": min(s + block, m["n_sets"])})
    return out


def _we_run(m, ch):
    h = _height(m["families"][ch["family_idx"]])
    w = build_wedge(h, m["x_max"], m["y_max"])
    deltas = m["deltas"]
    rows = []
    for i in range(ch["lo"], ch["hi"]):
        rng = np.random.default_rng([m["seed"], ch["family_idx"], i])
        size = int(rng.integers(1, m["size_max"] + 1))
        ids = None
        for _ in range(50):
            anchor = int(rng.integers(w.num_vertices))
            ids = iso.grow_uniform(w, anchor, size, rng)
            if ids is not None:
                break
        if ids is None:
            continue
        rep = wedgemod.entropy_report(w, ids)
        checks = wedgemod.check_entropy_invariants(rep)
        rec = wedgemod.psi_profile_check(w, [rep])[0]
        row = {
            "set_idx": i, "v": rep.v, "w": rep.w,
            "w_x": rep.w_x, "w_y": rep.w_y, "w_z": rep.w_z,
            "H_xyz": rep.H_xyz, "H_xz": rep.H_xz, "H_yz": rep.H_yz,
            "H_z": rep.H_z, "k": rep.k, "nu": rep.nu, "rho": rep.rho,
            "ratio_psi": rec.ratio_psi,
            "cond_defect": wedgemod.conditioning_defect(rep),
            **{f"inv_{k}": v for k, v in checks.items()},
        }
        for d in deltas:
            z = wedgemod.zeta_quantile_check(
                rep, w, d, trials=m.get("zeta_trials", 200),
                seed=int(rng.integers(2**31)),
            )
            row[f"zeta_pass_{d}"] = z["passed"]
        rows.append(row)
    return {"rows": rows}


def _we_final(m, chunks, results):
    rows = []
    for ch, res in zip(chunks, results):
        fam = json.dumps(m["families"][ch["family_idx"]], sort_keys=True)
        for r in res["rows"]:
            rows.append({**_provenance(m, ch["lo"], ch["hi"]),
                         "family": fam, **r})
    inv_keys = [k for k in rows[0] if k.startswith("inv_")] if rows else []
    viol = {k: sum(not r[k] for r in rows) for k in inv_keys}
    summary = {
        "sets": len(rows),
        "violations": viol,
        "all_hold": all(v == 0 for v in viol.values()),
        "zeta_pass_fraction": {
            str(d): float(np.mean([r[f"zeta_pass_{d}"] for r in rows]))
            for d in m["deltas"]
        } if rows else {},
        "min_ratio_psi": min((r["ratio_psi"] for r in rows), default=None),
        "min_cond_defect": min((r["cond_defect"] for r in rows), default=None),
    }
    return rows, summary


# ---------------------------------------------------------------------------
# wedge-resistance

def _wr_chunks(m):
    return [{"family_idx": fi, "R": R}
            for fi in range(len(m["families"])) for R in m["radii"]]


def _wr_run(m, ch):
    h = _height(m["families"][ch["family_idx"]])
    res = wedgemod.wedge_shell_resistance(
        h, [ch["R"]], y_max=m["y_max"], tol=m.get("tol", 1e-8)
    )[ch["R"]]
    return {"r_eff": res.r_eff, "residual": res.residual, "solver": res.solver}


def _wr_final(m, chunks, results):
    rows, by_family = [], {}
    for ch, res in zip(chunks, results):
        fam = json.dumps(m["families"][ch["family_idx"]], sort_keys=True)
        rows.append({**_provenance(m), "family": fam, "R": ch["R"], **res})
        by_family.setdefault(ch["family_idx"], {})[ch["R"]] = res["r_eff"]
    increments = {}
    for fi, vals in by_family.items():
        fam = json.dumps(m["families"][fi], sort_keys=True)
        radii = sorted(vals)
        incs = [
            {"R": R, "increment": vals[2 * R] - vals[R]}
            for R in radii if 2 * R in vals
        ]
        seq = [x["increment"] for x in incs]
        increments[fam] = {
            "increments": incs,
            "strictly_decreasing": all(a > b for a, b in zip(seq, seq[1:])),
            "non_decreasing_within_tol": all(
                b >= a - m.get("tol", 1e-8) for a, b in zip(seq, seq[1:])
            ),
        }
    summary = {"increments": increments}
    if "lyons" in m:
        summary["lyons"] = [
            {
                "family": json.dumps(fam, sort_keys=True),
                **wedgemod.lyons_sum(_height(fam), m["lyons"]["J"]).__dict__,
            }
            for fam in m["lyons"]["families"]
        ]
    return rows, summary


# ---------------------------------------------------------------------------
# cutset-census

def _cc_chunks(m):
    out = [{"part": "census"}]
    block = 100_000
    for s in range(0, m["trials"], block):
        out.append({"part": "mc", "lo": s, "hi": min(s + block, m["trials"])})
    return out


def _cc_run(m, ch):
    host = build_box(m["d"], m["window_n"])
    if ch["part"] == "census":
        census = wedgemod.cutset_census(host, host.origin, m["n_max"])
        return {"q": {str(k): v for k, v in census.q.items()},
                "kappa": census.kappa, "peierls": census.peierls_upper,
                "size_cap": census.size_cap, "complete": census.complete}
    view = cg.GraphView.whole(host)
    counts = np.zeros(m["n_max"] + 1, dtype=np.int64)
    for t in range(ch["lo"], ch["hi"]):
        config = sample(host, m["p"], m["seed"], trial=t)
        lab = label(config)
        o = lab.cluster_of(host.origin)
        if lab.touches_boundary[o]:
            continue
        members = lab.vertices_of(o)
        fr = cg.frontier(members, cg.EDGE, view)
        if len(fr) <= m["n_max"]:
            counts[len(fr)] += 1
    return {"counts": counts.tolist(), "trials": ch["hi"] - ch["lo"]}


def _cc_final(m, chunks, results):
    census = None
    counts = np.zeros(m["n_max"] + 1, dtype=np.int64)
    trials = 0
    for ch, res in zip(chunks, results):
        if ch["part"] == "census":
            census = res
        else:
            counts += np.array(res["counts"])
            trials += res["trials"]
    q = {int(k): v for k, v in census["q"].items()}
    rows = []
    p = m["p"]
    for n in range(1, m["n_max"] + 1):
        qn = q.get(n, 0)
        bound = qn * (1 - p) ** n
        hits = int(counts[n])
        p_hat = hits / trials if trials else 0.0
        sigma = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / trials) if trials else 0.0
        rows.append({
            **_provenance(m, 0, trials),
            "n": n, "q_n": qn, "mc_hits": hits, "mc_trials": trials,
            "p_hat": p_hat, "union_bound": bound, "sigma": sigma,
            "within_3sigma": p_hat <= bound + 3 * sigma,
        })
    summary = {
        "q": {str(k): v for k, v in sorted(q.items())},
        "kappa": census["kappa"],
        "peierls_upper": census["peierls"],
        "size_cap": census["size_cap"],
        "complete": census["complete"],
        "mc_all_within_3sigma": all(r["within_3sigma"] for r in rows),
    }
    return rows, summary


# ---------------------------------------------------------------------------
# block-stats

def _bs_chunks(m):
    block = 50
    out = []
    for pi in range(len(m["p"])):
        for s in range(0, m["trials"], block):
            out.append({"p_idx": pi, "lo": s, "hi": min(s + block, m["trials"])})
    return out


def _bs_run(m, ch):
    host = build_box(m["d"], m["n"])
    grid = blocks_of(host, m["N"])
    p = m["p"][ch["p_idx"]]
    good = total = 0
    for t in range(ch["lo"], ch["hi"]):
        config = sample(host, p, m["seed"], trial=t)
        for cc in grid.coarse_l1.coords:
            good += renorm.classify_block(config, grid, cc)
            total += 1
    return {"good": good, "total": total}


def _bs_final(m, chunks, results):
    acc = {}
    for ch, res in zip(chunks, results):
        slot = acc.setdefault(ch["p_idx"], {"good": 0, "total": 0})
        slot["good"] += res["good"]
        slot["total"] += res["total"]
    rows = []
    fracs = []
    for pi, slot in sorted(acc.items()):
        lo_w, hi_w = wilson_interval(slot["good"], slot["total"])
        frac = slot["good"] / slot["total"]
        fracs.append((m["p"][pi], frac))
        rows.append({
            **_provenance(m, 0, m["trials"]),
            "p": m["p"][pi], "blocks": slot["total"], "good": slot["good"],
            "fraction": frac, "wilson_lo": lo_w, "wilson_hi": hi_w,
        })
    fracs.sort()
    summary = {
        "fractions": {str(p): f for p, f in fracs},
        "monotone_in_p": all(a[1] <= b[1] for a, b in zip(fracs, fracs[1:])),
    }
    return rows, summary


# ---------------------------------------------------------------------------
# Manifest validation

def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return _is_int(x) or isinstance(x, float)


def _check_fields(m, table, errors, prefix=""):
    for field, check, msg in table:
        if field not in m:
            errors.append(f"{prefix}{field}: missing ({msg})")
            continue
        if not check(m[field]):
            errors.append(f"{prefix}{field}: {msg}, got {m[field]!r}")


def _int_list(v):
    return isinstance(v, list) and v and all(_is_int(x) and x > 0 for x in v)


def _prob_list(v):
    return (isinstance(v, list) and v
            and all(_is_num(x) and 0 < x < 1 for x in v))


def _family_list(v):
    if not (isinstance(v, list) and v):
        return False
    for d in v:
        try:
            _height(d)
        except Exception:
            return False
    return True


_KIND_FIELDS = {
    "repulsion-tail": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("n", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("p", _prob_list, "list of probabilities in (0,1)"),
        ("m0", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("t_lo", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("t_hi", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("trials", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("batches", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("fit_lo", _is_num, "number"),
        ("fit_hi", _is_num, "number"),
    ],
    "iso-profile": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("p", lambda v: _is_num(v) and 0 < v <= 1, "probability in (0,1]"),
        ("n_list", _int_list, "nonempty list of positive ints"),
        ("seeds", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("size_classes", _int_list, "nonempty list of positive ints"),
    ],
    "sharpness": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("n", lambda v: _is_int(v) and v >= 3, "int >= 3"),
        ("p", lambda v: _is_num(v) and 0 < v < 1, "probability in (0,1)"),
        ("r", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("trials", lambda v: _is_int(v) and v >= 1, "int >= 1"),
    ],
    "heat-kernel": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("n", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("p", lambda v: _is_num(v) and 0 < v <= 1, "probability in (0,1]"),
        ("beta", lambda v: _is_num(v) and 0 <= v < 1, "laziness in [0,1)"),
        ("n_steps", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("fit_lo", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("fit_hi", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("seeds", lambda v: _is_int(v) and v >= 1, "int >= 1"),
    ],
    "mixing": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("n_list", _int_list, "nonempty list of positive ints"),
        ("p", lambda v: _is_num(v) and 0 < v <= 1, "probability in (0,1]"),
        ("beta", lambda v: _is_num(v) and 0 <= v < 1, "laziness in [0,1)"),
        ("seeds", lambda v: _is_int(v) and v >= 1, "int >= 1"),
    ],
    "wedge-entropy": [
        ("families", _family_list, "list of height-function descriptors"),
        ("x_max", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("y_max", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("n_sets", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("size_max", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("deltas", _prob_list, "list of probabilities in (0,1)"),
    ],
    "wedge-resistance": [
        ("families", _family_list, "list of height-function descriptors"),
        ("radii", _int_list, "nonempty list of positive ints"),
        ("y_max", lambda v: _is_int(v) and v >= 1, "int >= 1"),
    ],
    "cutset-census": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("window_n", lambda v: _is_int(v) and v >= 1, "int >= 1"),
        ("n_max", lambda v: _is_int(v) and 1 <= v <= 14, "int in [1,14]"),
        ("p", lambda v: _is_num(v) and 0 < v < 1, "probability in (0,1)"),
        ("trials", lambda v: _is_int(v) and v >= 0, "int >= 0"),
    ],
    "block-stats": [
        ("d", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("n", lambda v: _is_int(v) and v >= 2, "int >= 2"),
        ("N", lambda v: _is_int(v) and v >= 20 and v % 20 == 0,
         "block scale, multiple of 20"),
        ("p", _prob_list, "list of probabilities in (0,1)"),
        ("trials", lambda v: _is_int(v) and v >= 1, "int >= 1"),
    ],
}


def validate_manifest(manifest) -> list[str]:
    """Field-level diagnostics for a manifest dict; empty list means valid."""
    errors: list[str] = []
    if not isinstance(manifest, dict):
        return ["manifest: expected a JSON object"]
    _check_fields(manifest, [
        ("name", lambda v: isinstance(v, str) and v
         and all(c.isalnum() or c in "-_." for c in v),
         "filename-safe string"),
        ("kind", lambda v: v in KINDS,
         f"one of {sorted(KINDS)}"),
        ("seed", lambda v: _is_int(v) and v >= 0, "int >= 0"),
    ], errors)
    kind = manifest.get("kind")
    if kind in _KIND_FIELDS:
        _check_fields(manifest, _KIND_FIELDS[kind], errors)
    if errors:
        return errors
    # Cross-field constraints, checked only once the pieces parse.
    if kind == "repulsion-tail":
        if manifest["t_lo"] >= manifest["t_hi"]:
            errors.append("t_hi: must exceed t_lo")
        if manifest["trials"] % manifest["batches"]:
            errors.append("batches: must divide trials")
        if not manifest["fit_lo"] < manifest["fit_hi"]:
            errors.append("fit_hi: must exceed fit_lo")
    elif kind == "sharpness":
        if manifest["r"] + 2 > manifest["n"]:
            errors.append("r: needs r + 2 <= n for the outer collar")
    elif kind == "heat-kernel":
        if not manifest["fit_lo"] < manifest["fit_hi"] <= manifest["n_steps"]:
            errors.append("fit_hi: needs fit_lo < fit_hi <= n_steps")
    elif kind == "block-stats":
        if manifest["n"] < manifest["N"]:
            errors.append("n: window must be at least one block wide")
    return errors


# ---------------------------------------------------------------------------
# Registry and driver

KINDS = {
    "repulsion-tail": (_rt_chunks, _rt_run, _rt_final),
    "iso-profile": (_ip_chunks, _ip_run, _ip_final),
    "sharpness": (_sh_chunks, _sh_run, _sh_final),
    "heat-kernel": (_hk_chunks, _hk_run, _hk_final),
    "mixing": (_mx_chunks, _mx_run, _mx_final),
    "wedge-entropy": (_we_chunks, _we_run, _we_final),
    "wedge-resistance": (_wr_chunks, _wr_run, _wr_final),
    "cutset-census": (_cc_chunks, _cc_run, _cc_final),
    "block-stats": (_bs_chunks, _bs_run, _bs_final),
}

CSV_FIELDS = {
    "repulsion-tail": ["p", "batch", "t", "trials", "successes", "p_hat",
                       "wilson_lo", "wilson_hi"],
    "iso-profile": ["n", "seed_idx", "size_class", "min_ratio", "witness",
                    "samples", "exact"],
    "sharpness": ["trial", "success", "frontier_size", "S_size", "redeclared"],
    "heat-kernel": ["seed_idx", "n", "p_n"],
    "mixing": ["n", "seed_idx", "V", "E", "lambda2", "gap", "t_rel",
               "residual", "iterations", "t_mix"],
    "wedge-entropy": None,  # wide row, fields taken from the first row
    "wedge-resistance": ["family", "R", "r_eff", "residual", "solver"],
    "cutset-census": ["n", "q_n", "mc_hits", "mc_trials", "p_hat",
                      "union_bound", "sigma", "within_3sigma"],
    "block-stats": ["p", "blocks", "good", "fraction", "wilson_lo", "wilson_hi"],
}


def _chunk_worker(args):
    manifest, idx = args
    chunks_fn, run_chunk, _ = KINDS[manifest["kind"]]
    return idx, run_chunk(manifest, chunks_fn(manifest)[idx])


def run_manifest(manifest: dict, out_dir: str, workers: int = 1,
                 resume: bool = True, log=print) -> dict:
    """Execute one manifest; returns the summary dict.

    Completed runs (summary present with matching hash) are no-ops.  Chunk
    results are cached under <name>.chunks/ keyed by the manifest hash.
    """
    errors = validate_manifest(manifest)
    if errors:
        raise ValueError("invalid manifest: " + "; ".join(errors))
    kind = manifest["kind"]
    chunks_fn, run_chunk, finalize = KINDS[kind]
    name = manifest["name"]
    h = manifest_hash(manifest)
    os.makedirs(out_dir, exist_ok=True)
    summary_path = os.path.join(out_dir, f"{name}.summary.json")
    csv_path = os.path.join(out_dir, f"{name}.csv")

    if os.path.exists(summary_path):
        with open(summary_path) as f:
            done = json.load(f)
        if done.get("manifest_sha") == h:
            log(f"{name}: complete, nothing to do")
            return done

    chunk_dir = os.path.join(out_dir, f"{name}.chunks")
    os.makedirs(chunk_dir, exist_ok=True)
    chunks = chunks_fn(manifest)
    results: list = [None] * len(chunks)
    todo = []
    for i in range(len(chunks)):
        path = os.path.join(chunk_dir, f"{i:05d}.json")
        if resume and os.path.exists(path):
            with open(path) as f:
                blob = json.load(f)
            if blob.get("manifest_sha") == h:
                results[i] = blob["result"]
                continue
        todo.append(i)

    def store(i, res):
        results[i] = res
        path = os.path.join(chunk_dir, f"{i:05d}.json")
        with open(path, "w") as f:
            json.dump({"manifest_sha": h, "result": res}, f)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in pool.map(_chunk_worker, [(manifest, i) for i in todo]):
                store(i, res)
                log(f"{name}: chunk {i + 1}/{len(chunks)} done")
    else:
        for i in todo:
            store(i, run_chunk(manifest, chunks[i]))
            log(f"{name}: chunk {i + 1}/{len(chunks)} done")

    rows, summary = finalize(manifest, chunks, results)
    fields = CSV_FIELDS[kind]
    if fields is None:
        fields = [k for k in rows[0] if k not in PROV_FIELDS] if rows else []
    _write_csv(csv_path, kind, PROV_FIELDS + fields, rows)
    summary = {
        "name": name, "kind": kind, "manifest_sha": h,
        "code_version": __version__, **summary,
    }
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, default=str)
    log(f"{name}: wrote {csv_path} and {summary_path}")
    return summary


def _write_csv(path: str, kind: str, fields: list, rows: list):
    import csv

    with open(path, "w", newline="") as f:
        f.write(f"# percolab {kind} {HEADER_VERSION}\n")
        writer = csv.DictWriter(f, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
