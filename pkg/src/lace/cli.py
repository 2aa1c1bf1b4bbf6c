"""Experiment front-end.

Reproduces the five synthetic experiments, the activation-clustering layer
sweep, and the frozen-embedding run from flat key=value config files. Each
run writes CSV reports and SVG figures into its output directory; re-running
with the same config and seed overwrites byte-identical files.

Exit codes: 0 success, 1 acceptance-band failure (--check), 2 usage error.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import clustering, domains, report, trainer
from .detector import DetectorConfig
from .trainer import TrainConfig

EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4", "exp5", "cluster-sweep",
               "real-embed")

# Flat key=value config schema; every default equals the standard
# hyperparameters (W=50, tau=2.5, K=1, C=60, warmup=100, lr=3e-4, batch 64).
CONFIG_KEYS = {
    "d_base": int, "d_max": int, "d_emb": int, "batch_size": int,
    "lr": float, "phase_length": int, "num_families": int, "variants": int,
    "window": int, "spike_ratio": float, "confirm": int, "cooldown": int,
    "warmup": int, "sustained_threshold": float, "sustained_steps": int,
    "sigma": float, "eval_interval": int, "eval_per_domain": int,
    "d_pca": int, "distance_threshold": float,
}


class UsageError(Exception):
    pass


def parse_config_file(path):
    """Flat key=value pairs, '#' comments; unknown keys are rejected."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = CONFIG_KEYS[key](val.strip())
            except ValueError:
                raise UsageError(
                    f"{path}:{lineno}: bad value for {key}: {val.strip()!r}")
    return out


def build_train_config(overrides, seed, num_families, variants, d_base, d_max,
                       phase_length):
    det_keys = {"window", "spike_ratio", "confirm", "cooldown", "warmup",
                "sustained_threshold", "sustained_steps"}
    det = DetectorConfig(**{k: v for k, v in overrides.items() if k in det_keys})
    sched = domains.make_schedule(
        num_families=overrides.get("num_families", num_families),
        variants=overrides.get("variants", variants),
        phase_length=overrides.get("phase_length", phase_length),
        seed=seed)
    cfg_keys = {"d_emb", "batch_size", "lr", "sigma", "eval_interval",
                "eval_per_domain"}
    extra = {k: v for k, v in overrides.items() if k in cfg_keys}
    return TrainConfig(schedule=sched,
                       d_base=overrides.get("d_base", d_base),
                       d_max=overrides.get("d_max", d_max),
                       detector=det, seed=seed, **extra)


def _write_run_artifacts(out, name, rep):
    trainer.write_report_csv(os.path.join(out, f"{name}_report.csv"), rep)
    trainer.write_perdomain_csv(os.path.join(out, f"{name}_perdomain.csv"), rep)
    trainer.write_events_csv(os.path.join(out, f"{name}_events.csv"), rep.events)
    report.plot_run(os.path.join(out, f"{name}_loss_dims.svg"), rep,
                    f"{name}: loss and active dims")


def _check(ok, msg, failures):
    line = f"{'PASS' if ok else 'FAIL'}: {msg}"
    print(line)
    if not ok:
        failures.append(msg)


def run_trio(config, out, check, failures, bands):
    """LACE + both fixed baselines; returns reports keyed by mode.

    LACE_THREADS > 1 runs the three modes in parallel worker processes;
    results are identical either way since runs share no state."""
    modes = ("dynamic", "fixed_large", "fixed_small")
    workers = int(os.environ.get("LACE_THREADS", "1"))
    reports = {}
    models = {}
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=min(workers, len(modes))) as ex:
            futs = {mode: ex.submit(trainer.run, replace(config, mode=mode))
                    for mode in modes}
            for mode, fut in futs.items():
                reports[mode], models[mode] = fut.result()
    else:
        for mode in modes:
            reports[mode], models[mode] = trainer.run(
                replace(config, mode=mode))
    for mode in modes:
        _write_run_artifacts(out, mode, reports[mode])
    trainer.write_summary_csv(os.path.join(out, "summary.csv"),
                              [reports[m] for m in
                               ("dynamic", "fixed_large", "fixed_small")])
    if check:
        d = reports["dynamic"]
        _check(d.final_accuracy >= bands["lace_acc"],
               f"LACE accuracy {d.final_accuracy:.4f} >= {bands['lace_acc']}",
               failures)
        _check(d.boundary_precision == 1.0,
               f"boundary precision {d.boundary_precision} == 1.0", failures)
    return reports, models


def run_exp1(config, out, check, failures):
    reports, models = run_trio(config, out, check, failures,
                               {"lace_acc": 0.98})
    if check:
        d = reports["dynamic"]
        _check(reports["fixed_large"].final_accuracy >= 0.98,
               "Fixed-Large accuracy >= 0.98", failures)
        _check(reports["fixed_small"].final_accuracy >= 0.97,
               "Fixed-Small accuracy >= 0.97", failures)
        _check(5 <= len(d.events) <= 20,
               f"expansion count {len(d.events)} in [5, 20]", failures)
        _check(d.d_avg < config.d_max,
               f"d_avg {d.d_avg:.1f} < d_max {config.d_max}", failures)
    return reports, models


def run_exp2(config, out, check, failures):
    reports, _ = run_trio(config, out, check, failures, {"lace_acc": 0.98})
    num = config.schedule.num_classes
    for mode in ("dynamic", "fixed_large"):
        steps, mat = trainer.forgetting_curves(reports[mode], num)
        report.plot_perdomain(os.path.join(out, f"{mode}_perdomain.svg"),
                              steps, mat, f"{mode}: per-domain accuracy")
        if check:
            worst = min(float((c := mat[:, d][~np.isnan(mat[:, d])])[-1]
                              - c.max()) for d in range(num))
            _check(worst >= -0.05,
                   f"{mode} no-forgetting (final-peak {worst:.3f} >= -0.05)",
                   failures)
    return reports


def run_exp3(config, out, check, failures):
    rep, model = trainer.run(replace(config, mode="dynamic"))
    _write_run_artifacts(out, "dynamic", rep)
    toks, labs = config.schedule.eval_set(config.schedule.num_classes - 1,
                                          config.eval_per_domain)
    rows = trainer.ablation_sweep(model, toks, labs)
    with open(os.path.join(out, "ablation.csv"), "w") as f:
        f.write("condition,accuracy,drop\n")
        for c, a, d in rows:
            f.write(f"{c},{a:.6g},{d:.6g}\n")
    report.plot_ablation(os.path.join(out, "ablation.svg"), rows,
                         "adapter-dimension ablation")
    if check:
        coll = next(d for c, _, d in rows if c == "all_adapters")
        ind = max(d for c, _, d in rows if c.startswith("dim"))
        _check(coll >= 0.01, f"collective drop {coll:.4f} >= 0.01", failures)
        _check(coll >= ind,
               f"collective drop {coll:.4f} >= max individual {ind:.4f}",
               failures)
    return rows


def run_exp4(config, out, check, failures):
    results = trainer.compare_confirmation(config, [1, 3])
    with open(os.path.join(out, "summary.csv"), "w") as f:
        f.write("K,final_acc,expansions,d_final,d_avg,boundary_precision\n")
        for k, rep in sorted(results.items()):
            f.write(f"{k},{rep.final_accuracy:.4f},{len(rep.events)},"
                    f"{rep.d_final},{rep.d_avg:.2f},"
                    f"{rep.boundary_precision:.4f}\n")
            _write_run_artifacts(out, f"k{k}", rep)
    if check:
        for k, rep in results.items():
            _check(rep.boundary_precision == 1.0,
                   f"K={k} boundary precision 1.0", failures)
            _check(rep.final_accuracy >= 0.98,
                   f"K={k} accuracy {rep.final_accuracy:.4f} >= 0.98",
                   failures)
        _check(len(results[3].events) <= len(results[1].events),
               "expansions(K=3) <= expansions(K=1)", failures)
    return results


def run_exp5(config, out, check, failures):
    reports, _ = run_trio(config, out, check, failures, {"lace_acc": 0.0})
    if check:
        L = reports["dynamic"].final_accuracy
        FL = reports["fixed_large"].final_accuracy
        FS = reports["fixed_small"].final_accuracy
        _check(FS + 0.10 <= L <= FL + 0.02,
               f"LACE {L:.3f} within [Fixed-Small+0.10, Fixed-Large+0.02]",
               failures)
        _check(FS <= 0.7 * FL,
               f"Fixed-Small {FS:.3f} <= 0.7 * Fixed-Large {FL:.3f}", failures)
        _check(config.d_base < reports["dynamic"].d_final <= config.d_max,
               f"d_final {reports['dynamic'].d_final} in ({config.d_base}, "
               f"{config.d_max}]", failures)
    return reports


def run_cluster_sweep(act_files, out, overrides):
    sets = [clustering.read_activations(p) for p in act_files]
    rows = clustering.layer_sweep(
        sets, d_pca=overrides.get("d_pca", 32),
        distance_threshold=overrides.get("distance_threshold", 0.15))
    with open(os.path.join(out, "purity.csv"), "w") as f:
        f.write("layer,purity,clusters\n")
        for layer, p, k in rows:
            f.write(f"{layer},{p:.6g},{k}\n")
    report.plot_layer_purity(os.path.join(out, "purity.svg"), rows,
                             "layer-wise cluster purity")
    return rows


def run_real_embed(act_files, out, seed, overrides, check, failures):
    """Train the dynamic classifier on precomputed embedding vectors.

    Each input file holds one domain (file order = introduction order);
    a held-out tail of each file is used for evaluation.
    """
    from .model import DynamicModel
    from .detector import Detector
    from .domains import mix64

    sets = [clustering.read_activations(p) for p in act_files]
    d_in = sets[0].d
    if any(s.d != d_in for s in sets):
        raise UsageError("embedding files disagree on vector width")
    phase = overrides.get("phase_length", 300)
    batch_size = overrides.get("batch_size", 64)
    splits = []  # (train values, eval values) per domain
    for s in sets:
        n_eval = max(1, s.n // 5)
        splits.append((s.values[:-n_eval], s.values[-n_eval:]))

    det_keys = {"window", "spike_ratio", "confirm", "cooldown", "warmup",
                "sustained_threshold", "sustained_steps"}
    det = Detector(DetectorConfig(
        **{k: v for k, v in overrides.items() if k in det_keys}))
    model = DynamicModel(d_base=overrides.get("d_base", 32),
                         d_max=overrides.get("d_max", 128),
                         num_classes=len(sets), seed=seed,
                         lr=overrides.get("lr", 3e-4),
                         input_dim=d_in)
    exp_rng = np.random.default_rng(mix64(seed, 0xE59A))
    events, loss_trace, d_trace = [], [], []
    total = phase * len(sets)
    from .detector import Decision
    for step in range(total):
        cur = step // phase
        rng = np.random.default_rng(mix64(seed, step, 0x43A7))
        doms = np.where(rng.random(batch_size) < 0.5, cur,
                        rng.integers(0, cur + 1, batch_size))
        xs = np.concatenate([
            splits[d][0][rng.integers(0, len(splits[d][0]),
                                      int((doms == d).sum()))]
            for d in np.unique(doms)])
        ys = np.concatenate([np.full(int((doms == d).sum()), d)
                             for d in np.unique(doms)])
        loss = model.train_step_vec(xs, ys)
        obs = det.observe(loss)
        if obs.decision is Decision.EXPAND and model.d_active < model.d_max:
            events.append(model.expand(overrides.get("sigma", 0.01),
                                       step=step, signal=obs.signal,
                                       rng=exp_rng))
        loss_trace.append(loss)
        d_trace.append(model.d_active)

    correct = total_n = 0
    for d, (_, ev) in enumerate(splits):
        logits, _ = model.forward_vec(ev)
        correct += int((logits.argmax(axis=1) == d).sum())
        total_n += len(ev)
    acc = correct / total_n
    bounds = [d * phase for d in range(len(sets))]
    tp = sum(1 for e in events if any(e.step - phase < b <= e.step
                                      for b in bounds))
    precision = tp / len(events) if events else 1.0
    with open(os.path.join(out, "summary.csv"), "w") as f:
        f.write("model,final_acc,expansions,d_final,boundary_precision\n")
        f.write(f"dynamic,{acc:.4f},{len(events)},{model.d_active},"
                f"{precision:.4f}\n")
    trainer.write_events_csv(os.path.join(out, "events.csv"), events)
    if check:
        _check(len(events) >= len(sets) - 1,
               f"expansions {len(events)} >= {len(sets) - 1}", failures)
        _check(precision == 1.0, f"boundary precision {precision}", failures)
    return acc, events, precision


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="lace",
        description="Loss-adaptive capacity expansion experiments")
    ap.add_argument("--exp", choices=EXPERIMENTS,
                    help="experiment to run")
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="output directory (parent must exist)")
    ap.add_argument("--check", action="store_true",
                    help="assert acceptance bands; exit 1 on failure")
    ap.add_argument("--dump-corpus", action="store_true",
                    help="write the synthetic corpus as TSV to stdout")
    ap.add_argument("--per-domain", type=int, default=10,
                    help="samples per domain for --dump-corpus")
    ap.add_argument("--acts", nargs="*", default=[],
                    help="LACT activation files (cluster-sweep, real-embed)")
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2

    try:
        overrides = parse_config_file(args.config) if args.config else {}

        if args.dump_corpus:
            sched = domains.make_schedule(
                num_families=overrides.get("num_families", 10),
                variants=overrides.get("variants", 1),
                phase_length=overrides.get("phase_length", 200),
                seed=args.seed)
            domains.dump_corpus(sched, args.per_domain, sys.stdout)
            return 0

        if not args.exp:
            ap.print_usage(sys.stderr)
            print("error: --exp or --dump-corpus required", file=sys.stderr)
            return 2
        if not args.out:
            print("error: --out is required", file=sys.stderr)
            return 2
        parent = os.path.dirname(os.path.abspath(args.out))
        if not os.path.isdir(parent):
            print(f"error: parent of output dir does not exist: {parent}",
                  file=sys.stderr)
            return 2
        os.makedirs(args.out, exist_ok=True)

        failures = []
        if args.exp in ("exp1", "exp2", "exp3", "exp4"):
            cfg = build_train_config(overrides, args.seed, num_families=10,
                                     variants=1, d_base=64, d_max=84,
                                     phase_length=200)
            {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3,
             "exp4": run_exp4}[args.exp](cfg, args.out, args.check, failures)
        elif args.exp == "exp5":
            cfg = build_train_config(overrides, args.seed, num_families=10,
                                     variants=5, d_base=8, d_max=48,
                                     phase_length=200)
            run_exp5(cfg, args.out, args.check, failures)
        elif args.exp == "cluster-sweep":
            if not args.acts:
                raise UsageError("cluster-sweep requires --acts files")
            run_cluster_sweep(args.acts, args.out, overrides)
        elif args.exp == "real-embed":
            if not args.acts:
                raise UsageError("real-embed requires --acts files")
            run_real_embed(args.acts, args.out, args.seed, overrides,
                           args.check, failures)
        if args.check and failures:
            print(f"{len(failures)} acceptance check(s) failed",
                  file=sys.stderr)
            return 1
        return 0
    except (UsageError, clustering.FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
