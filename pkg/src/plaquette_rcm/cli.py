"""Command-line entry point: exact enumeration, sampling, verification
suites, sweeps with figure reports, surface tension, and the anomaly table.

Configuration precedence is config file < PLAQUETTE_RCM_* environment
variables < command-line flags; a run's effective configuration is written
into the output directory so it can be reproduced bit for bit.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import algebra as alg
from . import experiments as expmod
from . import plgt as plgtmod
from . import prcm as prcmmod
from . import report as repmod
from . import verify as vermod
from .lattice import Bc, Box, loop_boundary_chain

ENV_PREFIX = "PLAQUETTE_RCM_"

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2


@dataclass
class RunConfig:
    """Flat key-value record driving one CLI run; fully serializable."""

    command: str
    values: dict = field(default_factory=dict)

    def get(self, key, default=None, cast=None):
        v = self.values.get(key, default)
        if v is None:
            return None
        return cast(v) if cast else v

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        # the output location is where the run lands, not what it computes
        cp[self.command] = {k: str(v) for k, v in sorted(self.values.items())
                            if k != "out"}
        import io

        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, path: str, command: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ValueError(f"cannot read config file {path}")
        section = command if cp.has_section(command) else cp.sections()[0]
        return cls(command, dict(cp[section]))


def _apply_env(values: dict) -> None:
    for key, val in os.environ.items():
        if key.startswith(ENV_PREFIX):
            values[key[len(ENV_PREFIX):].lower()] = val


def _merge_config(args, command: str, flag_keys) -> RunConfig:
    values = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        values.update(RunConfig.from_ini(cfg_path, command).values)
    _apply_env(values)
    for key in flag_keys:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(command, values)


def _effective_p(cfg: RunConfig, default: float = 0.5) -> float:
    """p directly, or through --beta as p = 1 - e^{-beta}."""
    if cfg.get("p") is not None:
        return cfg.get("p", cast=float)
    if cfg.get("beta") is not None:
        return -math.expm1(-cfg.get("beta", cast=float))
    return default


def _parse_box(spec: str, d_hint: int | None = None) -> Box:
    dims = tuple(int(x) for x in str(spec).split(","))
    return Box.lattice((0,) * len(dims), dims)


def _parse_bc(spec: str) -> Bc:
    return Bc(str(spec).lower())


def _gamma_in_box(box: Box, spec: str):
    """A rectangle boundary m1,m2 centered in the box at mid-height."""
    m1, m2 = (int(x) for x in str(spec).split(","))
    dims = box.dims()
    if m1 > dims[0] or m2 > dims[1]:
        raise ValueError("loop does not fit in the box")
    o1 = box.lo[0] + ((dims[0] - m1) // 2) * 2
    o2 = box.lo[1] + ((dims[1] - m2) // 2) * 2
    h = (box.lo[-1] + box.hi[-1]) // 2
    h -= h % 2
    lo = (o1, o2) + box.lo[2:-1] + (h,)
    hi = (o1 + 2 * m1, o2 + 2 * m2) + box.lo[2:-1] + (h,)
    return Box(lo, hi)


def _outdir(cfg: RunConfig) -> str:
    out = cfg.get("out", "out")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "runconfig.ini"), "w") as fh:
        fh.write(cfg.to_ini())
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_enumerate(args) -> int:
    cfg = _merge_config(args, "enumerate",
                        ["p", "beta", "q", "i", "d", "bc", "box", "out",
                         "rational"])
    box = _parse_box(cfg.get("box", "2,2,2"))
    d = box.d
    params = prcmmod.PrcmParams(
        p=_effective_p(cfg), q=cfg.get("q", 2, float),
        i=cfg.get("i", d - 1, int), d=d, bc=_parse_bc(cfg.get("bc", "free")),
        rational=str(cfg.get("rational", "false")).lower() == "true")
    dist = prcmmod.enumerate_measure(box, params)
    out = _outdir(cfg)
    rows = []
    for P, prob in zip(dist.configs, dist.probs):
        rows.append({"occupied_hex": repmod._bits_to_hex(P.occupied),
                     "n_occupied": P.n_occupied(),
                     "probability": float(prob)})
    repmod.write_csv(os.path.join(out, "measure.csv"),
                     ["occupied_hex", "n_occupied", "probability"], rows)
    summary = {"n_configs": len(dist), "partition_value": float(dist.partition_value),
               "mean_occupied": float(dist.expectation(lambda P: P.n_occupied()))}
    if not params.rational and params.i == d - 1 and params.q >= 1:
        rational = prcmmod.enumerate_measure(
            box, prcmmod.PrcmParams(p=params.p, q=params.q, i=params.i, d=d,
                                    bc=params.bc, rational=True))
        summary["group_equals_rational"] = all(
            dist.prob_of(P) == rational.prob_of(P) for P in dist.configs)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"enumerate: {len(dist)} configs -> {out}/measure.csv")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _merge_config(args, "sample",
                        ["p", "beta", "q", "i", "d", "bc", "box", "out", "seed",
                         "sweeps", "burn_in", "sampler", "gamma"])
    box = _parse_box(cfg.get("box", "2,2,2"))
    d = box.d
    params = prcmmod.PrcmParams(
        p=_effective_p(cfg), q=cfg.get("q", 2, float),
        i=cfg.get("i", d - 1, int), d=d, bc=_parse_bc(cfg.get("bc", "free")))
    gamma = None
    if cfg.get("gamma"):
        gamma = loop_boundary_chain(_gamma_in_box(box, cfg.get("gamma")))
    seed = cfg.get("seed", 0, int)
    final, trace, diag = prcmmod.sample(
        params, box, cfg.get("sweeps", 1000, int), cfg.get("burn_in", 100, int),
        seed, gamma=gamma, sampler=cfg.get("sampler", "auto"))
    out = _outdir(cfg)
    repmod.write_trace_jsonl(os.path.join(out, "trace.jsonl"), trace)
    snap = repmod.ConfigSnapshot.of(final, params.q, params.p, seed,
                                    len(trace), with_dual=params.i == d - 1)
    with open(os.path.join(out, "final_config.json"), "w") as fh:
        fh.write(snap.to_json() + "\n")
    repmod.render_trace_figure(trace, os.path.join(out, "trace.png"),
                               title=f"p={params.p} q={params.q:g} {params.bc.value}")
    with open(os.path.join(out, "diagnostics.json"), "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"sample: {len(trace)} sweeps -> {out}/trace.jsonl "
          f"(tau_int={diag['tau_int_n_plaquettes']:.2f})")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _merge_config(args, "verify",
                        ["suite", "p", "q", "box", "n", "seed", "out"])
    suites = str(cfg.get("suite", "all")).split(",")
    if suites == ["all"]:
        suites = list(vermod.SUITES)
    box = _parse_box(cfg.get("box", "2,2,2"))
    q = cfg.get("q", 2, float)
    p = cfg.get("p", 0.45, float)
    n = cfg.get("n", 120, int)
    seed = cfg.get("seed", 0, int)
    results = []
    for name in suites:
        if name not in vermod.SUITES:
            print(f"unknown suite {name!r}; known: {sorted(vermod.SUITES)}")
            return EXIT_CONFIG_ERROR
        box_for = box
        if name == "linking" and box.dims() < (3, 3, 3):
            box_for = Box.lattice((0, 0, 0), (3, 3, 3))
        res = vermod.SUITES[name](box_for, q, p, n=n, seed=seed)
        results.append(res)
        print(res.line())
    if cfg.get("out"):
        out = _outdir(cfg)
        with open(os.path.join(out, "verify.json"), "w") as fh:
            json.dump([res.__dict__ for res in results], fh, indent=2,
                      sort_keys=True, default=str)
            fh.write("\n")
    return EXIT_OK if all(r.ok for r in results) else EXIT_VERIFY_FAILED


def _sweep_point(task):
    (p, q, bc_value, group, m1, m2, margin, hmargin, samples, seed, d) = task
    loop = Box.lattice((0, 0, 0), (m1, m2, 0))
    box = Box.lattice((-margin, -margin, -hmargin),
                      (m1 + margin, m2 + margin, hmargin))
    gamma = loop_boundary_chain(loop)
    params = prcmmod.PrcmParams(p=p, q=q, i=d - 1, d=d, bc=Bc(bc_value))
    est = expmod.estimate_v_gamma(params, box, gamma, samples,
                                  seed, group_q=group)
    from .lattice import area, perimeter

    return {"q": q, "bc": bc_value, "group": group, "p": p, "m1": m1, "m2": m2,
            "area": area(loop), "perimeter": perimeter(loop),
            "p_hat": est["p_hat"], "ci_lo": est["ci_lo"], "ci_hi": est["ci_hi"],
            "n": est["n"], "successes": est["successes"], "seed": seed}


def cmd_sweep(args) -> int:
    cfg = _merge_config(args, "sweep",
                        ["p", "q", "bc", "group", "loops", "margin",
                         "height_margin", "samples", "seed", "out", "workers", "d"])
    ps = [float(x) for x in str(cfg.get("p", "0.5")).split(",")]
    qs = [float(x) for x in str(cfg.get("q", "1")).split(",")]
    bcs = str(cfg.get("bc", "free")).split(",")
    group = cfg.get("group", 0, int)
    loops = [tuple(int(v) for v in item.split("x"))
             for item in str(cfg.get("loops", "2x2,3x3,4x4")).split(",")]
    margin = cfg.get("margin", 2, int)
    hmargin = cfg.get("height_margin", 2, int)
    samples = cfg.get("samples", 1000, int)
    seed = cfg.get("seed", 0, int)
    workers = cfg.get("workers", 1, int)
    d = cfg.get("d", 3, int)
    tasks = []
    for q in qs:
        for bc in bcs:
            for p in ps:
                for (m1, m2) in loops:
                    tasks.append((p, q, bc, group, m1, m2, margin, hmargin,
                                  samples, seed, d))
    tasks.sort()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    rows.sort(key=lambda r: (r["q"], r["bc"], r["group"], r["p"],
                             r["area"], r["perimeter"]))
    out = _outdir(cfg)
    repmod.write_sweep_csv(os.path.join(out, "sweep.csv"), rows)
    files = repmod.emit_plot_data(rows, out)
    fits = {}
    for path in [f for f in files if f.endswith(".csv")]:
        by_p: dict[float, list] = {}
        for row in repmod.read_csv(path):
            if row["p_hat"] and float(row["p_hat"]) > 0:
                by_p.setdefault(float(row["p"]), []).append(
                    (float(row["area"]), float(row["perimeter"]),
                     float(row["p_hat"])))
        for p, pts in sorted(by_p.items()):
            if len(pts) >= 3:
                key = f"{os.path.basename(path)}:p={p:g}"
                try:
                    fits[key] = expmod.fit_decay(pts).__dict__
                except ValueError:
                    pass
    repmod.write_fit_report(os.path.join(out, "fits.json"), fits)
    print(f"sweep: {len(rows)} points -> {out}/sweep.csv "
          f"(+{len(files)} plot files)")
    return EXIT_OK


def cmd_tension(args) -> int:
    cfg = _merge_config(args, "tension",
                        ["pstar", "q", "n", "big_n", "seed", "d", "out"])
    res = expmod.surface_tension_estimate(
        cfg.get("pstar", 0.5, float), cfg.get("q", 1, float),
        cfg.get("big_n", 2, int), cfg.get("n", 2000, int),
        cfg.get("seed", 0, int), d=cfg.get("d", 3, int))
    out = _outdir(cfg)
    with open(os.path.join(out, "tension.json"), "w") as fh:
        json.dump(res, fh, indent=2, sort_keys=True)
        fh.write("\n")
    tau = res["tau_hat"]
    print(f"tension: p_cross={res['p_cross']:.6g} "
          f"tau_hat={'inf' if math.isinf(tau) else f'{tau:.6g}'} -> {out}/tension.json")
    return EXIT_OK


def cmd_anomaly(args) -> int:
    cfg = _merge_config(args, "anomaly", ["k", "q", "out"])
    k = cfg.get("k", 2, int)
    qs = [int(x) for x in str(cfg.get("q", "2,3")).split(",")]
    ex = plgtmod.anomaly_example(k)
    P, gamma = ex.config, ex.gamma
    rows = [{"group": "Z", "v_gamma": alg.null_homology_test(P, gamma, 0),
             "wilson_conditional": ""}]
    print(f"anomaly k={k}: tube of {len(ex.tube_cubes)} cubes in {P.box}")
    print(f"  V_gamma(Z) = {rows[0]['v_gamma']}")
    for q in qs:
        v = alg.null_homology_test(P, gamma.reduce_mod(q), q)
        w = alg.wilson_conditional(P, gamma.reduce_mod(q), q)
        rows.append({"group": f"Z_{q}", "v_gamma": v, "wilson_conditional": w})
        print(f"  V_gamma({q}) = {v}   E[W_gamma | P] = {w}   "
              f"({'consistent' if int(v) == w else 'INCONSISTENT'})")
    if cfg.get("out"):
        out = _outdir(cfg)
        repmod.write_csv(os.path.join(out, "anomaly.csv"),
                         ["group", "v_gamma", "wilson_conditional"], rows)
    ok = all(int(r["v_gamma"]) == r["wilson_conditional"]
             for r in rows if r["wilson_conditional"] != "")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plaquette-rcm",
        description="Plaquette random-cluster model and Potts lattice gauge "
                    "theory on boxes in Z^d")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("enumerate", help="exact measure on a tiny box")
    common(sp)
    for flag in ("--p", "--beta", "--q", "--bc", "--box", "--rational"):
        sp.add_argument(flag)
    sp.add_argument("--i", type=int)
    sp.add_argument("--d", type=int)
    sp.set_defaults(fn=cmd_enumerate)

    sp = sub.add_parser("sample", help="Monte Carlo trace")
    common(sp)
    for flag in ("--p", "--beta", "--q", "--bc", "--box", "--sampler",
                 "--gamma"):
        sp.add_argument(flag)
    sp.add_argument("--i", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sweeps", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=int)
    sp.set_defaults(fn=cmd_sample)

    sp = sub.add_parser("verify", help="oracle-equivalence suites")
    common(sp)
    sp.add_argument("--suite")
    sp.add_argument("--p")
    sp.add_argument("--q")
    sp.add_argument("--box")
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("sweep", help="V_gamma estimation grid")
    common(sp)
    for flag in ("--p", "--q", "--bc", "--loops"):
        sp.add_argument(flag)
    sp.add_argument("--group", type=int)
    sp.add_argument("--margin", type=int)
    sp.add_argument("--height-margin", dest="height_margin", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--d", type=int)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("tension", help="surface tension estimator")
    common(sp)
    sp.add_argument("--pstar", type=float)
    sp.add_argument("--q")
    sp.add_argument("--n", type=int)
    sp.add_argument("--big-n", dest="big_n", type=int,
                    help="half-width N of the box Lambda_N")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--d", type=int)
    sp.set_defaults(fn=cmd_tension)

    sp = sub.add_parser("anomaly", help="composite-q anomaly table")
    common(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--q")
    sp.set_defaults(fn=cmd_anomaly)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, configparser.Error) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
