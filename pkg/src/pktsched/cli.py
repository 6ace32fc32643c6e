"""Command-line entry point: ``pktsched <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` with flat ``key=value`` lines
(keys are flag names without dashes); flags given on the command line win.
The effective configuration is echoed to stdout and, when an output
directory is used, written there as ``effective_config.txt`` so the run can
be replayed with ``--config``.

Exit codes: 0 success, 1 internal invariant violation, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import statistics
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .assignment import offline_optimum
from .extensions import TandemConfig, buffer_size_study, run_tandem
from .model import ConfigError, Instance, SimulationError, dump_instance, load_instance
from .policies import GOLDEN, parse_policy
from .sim import run
from .workload import GenConfig, generate, scenario1

log = logging.getLogger("pktsched")

_KEY_ALIASES = {"lambda": "lam", "t-end": "t_end", "run-length": "run_length"}


def _floats(text):
    return [float(x) for x in str(text).split(",") if x]


def _range(text):
    vals = _floats(text)
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return tuple(vals)


def _ints(text):
    return [int(x) for x in str(text).split(",") if x]


def _window(text):
    lo, hi = (int(x) for x in str(text).split(","))
    return lo, hi


def _add_gen(p):
    g = p.add_argument_group("generator")
    g.add_argument("--T", type=int, default=200)
    g.add_argument("--lambda", dest="lam", type=float, default=5.0)
    g.add_argument("--wmax", type=int, default=20)
    g.add_argument("--dmax", type=int, default=20)
    g.add_argument("--model", choices=["Model1", "Model2"], default="Model1")
    g.add_argument("--p", dest="bimodal_p", type=float, default=0.85, help="Model 2 mixture weight")
    g.add_argument("--kappa", type=int, default=None, help="warmup steps (default max(40, 0.4T))")
    g.add_argument("--scenario1", action="store_true", help="multiply weights by deadlines")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="pktsched", description=__doc__.splitlines()[0])
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="key=value file; flags override it")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("run", "run one policy on one instance")
    _add_gen(p)
    p.add_argument("--policy", default="mg", help="kind[:key=val,...], e.g. smmg:p=0.85")
    p.add_argument("--instance", type=Path, help="load an instance file instead of generating")
    p.add_argument("--t-end", dest="t_end", type=int)
    p.add_argument("--window", type=_window)
    p.add_argument("--offline-mode", choices=["window", "horizon"], default="horizon")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_run)

    p = add("batch", "run a scenario preset or a custom parameter space")
    p.add_argument("--scenario", default="S2", help="S1, S2, S3, PSI, MOD or custom")
    p.add_argument("--combos", type=int, default=50)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--fresh-reps", action="store_true", help="new instance per repetition")
    p.add_argument("--policies", help="policies separated by ';', e.g. 'mg;mlp;smmg:p=0.85'")
    p.add_argument("--offline-mode", choices=["window", "horizon"], default="horizon")
    p.add_argument("--T-range", dest="T_range", type=_range)
    p.add_argument("--lambda-range", dest="lam_range", type=_range)
    p.add_argument("--wmax-range", dest="wmax_range", type=_range)
    p.add_argument("--dmax-range", dest="dmax_range", type=_range)
    p.add_argument("--p-range", dest="p_range", type=_range)
    p.add_argument("--model", choices=["Model1", "Model2"])
    p.add_argument("--transform", choices=harness.SCENARIOS, help="override the scenario tag")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--svg", action="store_true", help="also write scatter plots")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_batch)

    p = add("psi", "frequency of w_h > 1.618 w_e under MG")
    _add_gen(p)
    p.add_argument("--phi", type=float, default=GOLDEN)
    p.add_argument("--grid", action="store_true", help="run the stratified psi study instead")
    p.add_argument("--wmax-grid", dest="wmax_grid", type=_ints, default=[1, 2, 3, 5, 8, 12, 16, 20])
    p.add_argument("--dmax-grid", dest="dmax_grid", type=_ints, default=[1, 5, 10, 20, 30, 40])
    p.add_argument("--lambda-range", dest="lam_range", type=_range, default=(0.7, 20.0))
    p.add_argument("--lam-samples", dest="lam_samples", type=int, default=8,
                   help="rates drawn per grid cell")
    p.add_argument("--group", default="wmax,dmax", help="cell keys; psi is averaged over the rest")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_psi)

    p = add("tandem", "multi-node chain with and without the deadline adjustment")
    _add_gen(p)
    p.add_argument("--nodes", type=int, default=3)
    p.add_argument("--policy", default="mg")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_tandem)

    p = add("buffersize", "occupancy quantile under MG")
    p.add_argument("--lambda", dest="lam", type=_floats, default=[2.0, 10.0, 50.0, 100.0])
    p.add_argument("--target", type=float, default=1e-6)
    p.add_argument("--run-length", dest="run_length", type=int, default=10_000_000)
    p.add_argument("--wmax", type=int, default=20)
    p.add_argument("--dmax", type=int, default=20)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_buffersize)

    p = add("hardinstance", "three-packet instance where MLP loses to MG")
    p.add_argument("--w1", type=float, default=1.0)
    p.add_argument("--w2", type=float, default=100.0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_hardinstance)

    p = add("gen", "generate an instance file")
    _add_gen(p)
    p.add_argument("--out", type=Path, default=Path("instance.txt"))
    p.set_defaults(func=cmd_gen)
    return top


def read_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[_KEY_ALIASES.get(key, key).replace("-", "_")] = val
    return values


def _file_defaults(sub: argparse.ArgumentParser, values: dict[str, str]) -> dict:
    by_dest = {a.dest: a for a in sub._actions}
    out = {}
    for key, val in values.items():
        action = by_dest.get(key)
        if action is None:
            raise ConfigError(f"unknown config key {key!r}")
        if action.const is True or action.const is False:   # store_true / store_false
            out[key] = val.lower() in ("1", "true", "yes", "on")
        elif val in ("", "None"):
            out[key] = None
        else:
            out[key] = action.type(val) if action.type else val
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**_file_defaults(sub, read_config_file(args.config)))
        args = parser.parse_args(argv)
    return args


def effective_config(args) -> str:
    skip = {"func", "config", "command", "verbose"}
    lines = [f"# pktsched {args.command}"]
    for key, val in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(val, (list, tuple)):
            val = ",".join(str(v) for v in val)
        lines.append(f"{key}={'' if val is None else val}")
    return "\n".join(lines) + "\n"


def _echo(args, out_dir: Path | None):
    text = effective_config(args)
    print(text, end="")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "effective_config.txt").write_text(text)


def _gen_config(args) -> GenConfig:
    kappa = harness.kappa_for(args.T) if args.kappa is None else args.kappa
    return GenConfig(T=args.T, lam=args.lam, w_max=args.wmax, d_max=args.dmax, model=args.model,
                     bimodal_p=args.bimodal_p, kappa=kappa, seed=args.seed)


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.6g}"


# --- subcommands ----------------------------------------------------------------------

def cmd_run(args) -> int:
    _echo(args, args.out)
    spec = parse_policy(args.policy)
    if args.instance is not None:
        inst = load_instance(args.instance)
        t_end = args.t_end or inst.horizon
        window = args.window or (1, t_end)
    else:
        cfg = _gen_config(args)
        inst = generate(cfg)
        t_end = args.t_end or cfg.horizon
        window = args.window or (cfg.kappa + 1, min(t_end, cfg.kappa + cfg.T))
    if args.scenario1:
        inst = scenario1(inst)
    res = run(spec, inst, t_end, window, seed=args.seed)
    zeta_off, _ = offline_optimum(inst, t_end, window, args.offline_mode)
    log_path = args.out / f"sendlog_{spec.label}.txt"
    log_path.write_text("".join(f"{t} {pid}\n" for t, pid in res.sent))
    print(f"policy={spec.label} packets={len(inst)} t_end={t_end} window={window[0]},{window[1]}")
    print(f"zeta={_num(res.zeta)} zeta_total={_num(res.zeta_total)} zeta_off={_num(zeta_off)}")
    rho = res.zeta / zeta_off if zeta_off else 1.0
    print(f"rho={rho:.6g} nbar={res.nbar:.6g}")
    print(f"send_log={log_path}")
    return 0


def _custom_space(args, base: harness.ParamSpace) -> harness.ParamSpace:
    def ints(r):
        return None if r is None else (int(r[0]), int(r[1]))
    return harness.ParamSpace(
        T=ints(args.T_range) or base.T,
        lam=args.lam_range or base.lam,
        w_max=ints(args.wmax_range) or base.w_max,
        d_max=ints(args.dmax_range) or base.d_max,
        bimodal_p=args.p_range or base.bimodal_p,
        model=args.model or base.model,
    )


def make_batch(args) -> harness.BatchConfig:
    name = args.scenario.upper()
    overrides = {"fresh_instance_reps": args.fresh_reps, "offline_mode": args.offline_mode}
    if args.policies:
        overrides["policies"] = tuple(parse_policy(s.strip()) for s in args.policies.split(";") if s.strip())
    if name == "CUSTOM":
        base = harness.BatchConfig(combinations=max(args.combos, 1))
        batch = replace(base, **overrides, combinations=args.combos, reps=args.reps,
                        master_seed=args.seed)
    else:
        batch = harness.scenario_presets(name, combinations=args.combos, reps=args.reps,
                                         master_seed=args.seed, **overrides)
    batch = replace(batch, space=_custom_space(args, batch.space))
    if args.transform:
        batch = replace(batch, scenario=args.transform)
    return batch


def cmd_batch(args) -> int:
    if args.combos < 1 or args.reps < 1:
        raise ConfigError("--combos and --reps must be >= 1")
    batch = make_batch(args)
    _echo(args, args.out)
    records = harness.run_protocol(batch, jobs=args.jobs)
    stem = args.out / f"batch_{args.scenario.lower()}"
    labels = [p.label for p in batch.policies]
    harness.emit_csv(records, stem.with_suffix(".csv"), labels)
    harness.emit_run_log(records, stem.with_suffix(".log"), batch)
    worst = max((v for r in records for v in r.rho.values()), default=0.0)
    if worst > 1 + 1e-9:
        if batch.offline_mode == "window":
            log.error("dominance violated: rho=%s", worst)
            return 1
        # horizon-counted offline is not a strict upper bound inside the window
        log.warning("an online policy beat the horizon-counted offline inside the window: rho=%s", worst)
    print(f"records={len(records)} csv={stem.with_suffix('.csv')}")
    for key, (mean, sd) in harness.summarize(records).items():
        print(f"{key}: mean={mean:.6g} sd={sd:.6g}")
    if args.svg:
        write_svg(records, stem)
    return 0


def write_svg(records, stem: Path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "pktsched"
    nbar = [r.nbar for r in records]
    fig, ax = plt.subplots()
    for label, color in (("mg", "green"), ("mlp", "red")):
        ys = [r.rho.get(label) for r in records]
        if all(y is not None for y in ys):
            ax.scatter(nbar, ys, s=8, c=color, label=label)
    ax.set_xlabel("nbar")
    ax.set_ylabel("rho")
    ax.legend()
    fig.savefig(stem.with_name(stem.name + "_rho_nbar.svg"), metadata={"Date": None})
    plt.close(fig)
    hats = [(r.params["lam"], r.rho_hat) for r in records if r.rho_hat is not None]
    if hats:
        fig, ax = plt.subplots()
        ax.scatter(*zip(*hats), s=8)
        ax.set_xlabel("lambda")
        ax.set_ylabel("rho_hat")
        fig.savefig(stem.with_name(stem.name + "_rhohat_lambda.svg"), metadata={"Date": None})
        plt.close(fig)


def cmd_psi(args) -> int:
    _echo(args, args.out)
    if args.grid:
        names = {"wmax": "w_max", "dmax": "d_max", "lambda": "lam"}
        keys = tuple(names.get(k, k) for k in args.group.split(","))
        if not set(keys) <= set(names.values()):
            raise ConfigError(f"--group keys must be among {sorted(names)}, got {args.group!r}")
        study = harness.PsiStudy(tuple(args.wmax_grid), tuple(args.dmax_grid), tuple(args.lam_range),
                                 args.lam_samples, args.T, args.seed)
        cells = harness.psi_cells(harness.psi_study(study), keys)
        for cell, psi in cells.items():
            print(" ".join(f"{k}={_num(v)}" for k, v in zip(keys, cell)) + f" psi={psi:.6g}")
        print(f"max_psi={max(cells.values()):.6g}")
        return 0
    cfg = _gen_config(args)
    inst = generate(cfg)
    if args.scenario1:
        inst = scenario1(inst)
    if not inst.packets:
        print("psi= freq_h=  (no packets)")
        return 0
    psi, freq = harness.psi_stat(inst, args.phi, cfg.horizon, (cfg.kappa + 1, cfg.horizon))
    print(f"psi={'' if psi is None else f'{psi:.6g}'} freq_h={'' if freq is None else f'{freq:.6g}'}")
    return 0


def cmd_tandem(args) -> int:
    _echo(args, args.out)
    base = _gen_config(args)
    spec = parse_policy(args.policy)
    rows = []
    for i in range(args.runs):
        inst = generate(base.with_seed((args.seed, i)))
        for adjust in (True, False):
            res = run_tandem(TandemConfig(base, args.nodes, adjust, spec), t_end=base.horizon, instance=inst)
            rows.append((i, adjust, res))
    path = args.out / "tandem.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "adjust"] + [f"zeta_node{k}" for k in range(1, args.nodes)]
                   + [f"dropped_node{k}" for k in range(1, args.nodes)])
        for i, adjust, res in rows:
            w.writerow([i, int(adjust)] + [f"{z:.6g}" for z in res.zeta] + res.dropped)
    for adjust in (True, False):
        sel = [res for _, a, res in rows if a == adjust]
        means = [statistics.fmean(r.zeta[k] for r in sel) for k in range(args.nodes - 1)]
        print(f"adjust={int(adjust)} " + " ".join(f"zeta_node{k + 1}={m:.6g}" for k, m in enumerate(means)))
    print(f"csv={path}")
    return 0


def cmd_buffersize(args) -> int:
    _echo(args, args.out)
    path = args.out / "buffersize.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "b", "ratio", "mean_occupancy", "steps"])
        for lam in args.lam:
            r = buffer_size_study(lam, args.target, args.wmax, args.dmax, args.run_length, args.seed)
            w.writerow([f"{lam:.6g}", r.b, f"{r.ratio:.6g}", f"{r.mean_occupancy:.6g}", r.steps])
            print(f"lambda={lam:.6g} b={r.b} ratio={r.ratio:.4g}" + (" (underresolved)" if r.underresolved else ""))
    print(f"csv={path}")
    return 0


def hard_instance(w1: float, w2: float) -> Instance:
    return Instance.from_triples([(1, 1, w1), (1, 2, w2), (2, 2, w2)])


def cmd_hardinstance(args) -> int:
    inst = hard_instance(args.w1, args.w2)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        dump_instance(inst, args.out / "hard_instance.txt")
    z = {k: run(parse_policy(k), inst, 2, (1, 2)).zeta for k in ("mlp", "mg")}
    off, _ = offline_optimum(inst, 2, (1, 2))
    print(f"MLP={_num(z['mlp'])} MG={_num(z['mg'])} OFF={_num(off)}")
    if args.w1 < args.w2 / GOLDEN:
        if not (z["mlp"] == args.w1 + args.w2 and z["mg"] == off == 2 * args.w2):
            log.error("hard instance expectations violated")
            return 1
    return 0


def cmd_gen(args) -> int:
    cfg = _gen_config(args)
    inst = generate(cfg)
    if args.scenario1:
        inst = scenario1(inst)
    dump_instance(inst, args.out)
    print(f"packets={len(inst)} horizon={inst.horizon} path={args.out}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"pktsched: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"pktsched: error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, AssertionError) as exc:
        print(f"pktsched: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
