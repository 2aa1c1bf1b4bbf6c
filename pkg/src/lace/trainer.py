"""End-to-end training loop over a domain schedule, plus run metrics.

Runs the dynamic (expanding) model and the two fixed-width baselines, tracks
per-domain held-out accuracy over time, boundary precision of expansion
events, and the adapter-dimension ablation sweep.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .detector import Decision, Detector, DetectorConfig
from .domains import DomainSchedule, mix64
from .model import DynamicModel, ExpansionEvent

MODES = ("dynamic", "fixed_large", "fixed_small")


@dataclass
class TrainConfig:
    schedule: DomainSchedule
    d_base: int = 64
    d_max: int = 84
    d_emb: int = 32
    batch_size: int = 64
    lr: float = 3e-4
    seq_len: int = 32
    vocab: int = 128
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    mode: str = "dynamic"
    seed: int = 0
    sigma: float = 0.01
    eval_interval: int = 20
    eval_per_domain: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class RunReport:
    mode: str
    final_accuracy: float
    per_domain: list            # (eval_step, domain, accuracy) rows
    events: list                # ExpansionEvent list
    d_final: int
    d_avg: float
    boundary_precision: float
    precision_flagged: bool     # True when there were no events to score
    loss_trace: list
    d_active_trace: list
    observations: list          # detector trace rows (dynamic mode)


def boundary_precision(events, schedule):
    """Fraction of events within one phase window after a domain introduction.

    An event at step t is a true positive iff an introduction occurred in
    (t - phase_length, t]. With no events, precision is reported as 1.0 with
    a flag.
    """
    if not events:
        return 1.0, True
    bounds = schedule.boundaries
    tp = 0
    for ev in events:
        if any(ev.step - schedule.phase_length < b <= ev.step for b in bounds):
            tp += 1
    return tp / len(events), False


def _evaluate(model, eval_cache, schedule, n_introduced, per_domain):
    """Per-domain held-out accuracy for the first n_introduced domains."""
    if n_introduced not in eval_cache:
        eval_cache[n_introduced] = schedule.eval_set(n_introduced - 1, per_domain)
    toks, labs = eval_cache[n_introduced]
    logits, _ = model.forward(toks)
    pred = logits.argmax(axis=1)
    correct = pred == labs
    accs = {}
    for d in range(n_introduced):
        sel = labs == d
        accs[d] = float(correct[sel].mean())
    return accs, float(correct.mean())


def run(config: TrainConfig) -> RunReport:
    """Execute one training run; deterministic given the config."""
    sched = config.schedule
    d_base = config.d_max if config.mode == "fixed_large" else config.d_base
    model = DynamicModel(vocab_size=config.vocab, d_emb=config.d_emb,
                         d_base=d_base, d_max=config.d_max,
                         num_classes=sched.num_classes,
                         seq_len=config.seq_len, lr=config.lr,
                         seed=config.seed, dtype=np.float32)
    det = Detector(config.detector) if config.mode == "dynamic" else None
    exp_rng = np.random.default_rng(mix64(config.seed, 0xE59A))

    events = []
    loss_trace = []
    d_trace = []
    observations = []
    per_domain_rows = []
    eval_cache = {}
    final_acc = 0.0
    total = sched.total_steps
    for step in range(total):
        toks, labs = sched.batch(step, config.batch_size)
        loss = model.train_step(toks, labs)
        if det is not None:
            obs = det.observe(loss)
            observations.append(obs)
            if obs.decision is Decision.EXPAND and model.d_active < model.d_max:
                ev = model.expand(config.sigma, step=step, signal=obs.signal,
                                  rng=exp_rng)
                events.append(ev)
        loss_trace.append(loss)
        d_trace.append(model.d_active)
        if step % config.eval_interval == 0 or step == total - 1:
            n_intro = sched.domain_at(step) + 1
            accs, overall = _evaluate(model, eval_cache, sched, n_intro,
                                      config.eval_per_domain)
            for d, a in accs.items():
                per_domain_rows.append((step, d, a))
            if step == total - 1:
                final_acc = overall

    precision, flagged = boundary_precision(events, sched)
    return RunReport(mode=config.mode, final_accuracy=final_acc,
                     per_domain=per_domain_rows, events=events,
                     d_final=model.d_active,
                     d_avg=float(np.mean(d_trace)),
                     boundary_precision=precision,
                     precision_flagged=flagged,
                     loss_trace=loss_trace, d_active_trace=d_trace,
                     observations=observations), model


def forgetting_curves(report: RunReport, num_domains):
    """(eval_point, domain) accuracy matrix; NaN before a domain's intro."""
    steps = sorted({s for s, _, _ in report.per_domain})
    idx = {s: i for i, s in enumerate(steps)}
    mat = np.full((len(steps), num_domains), np.nan)
    for s, d, a in report.per_domain:
        mat[idx[s], d] = a
    return np.array(steps), mat


class EmptyAdapterError(ValueError):
    """Ablation sweep on a model with no activated adapter dimensions."""


def ablation_sweep(model: DynamicModel, eval_tokens, eval_labels):
    """Accuracy drop per adapter dimension and for all of them collectively.

    Returns rows (condition, accuracy, drop); condition is "baseline",
    "dim <i>", or "all_adapters".
    """
    if model.d_active <= model.d_base:
        raise EmptyAdapterError("model has no activated adapter dimensions")

    def acc(disabled):
        logits = model.forward_ablated(eval_tokens, disabled)
        return float((logits.argmax(axis=1) == eval_labels).mean())

    base = acc([])
    rows = [("baseline", base, 0.0)]
    adapters = list(range(model.d_base, model.d_active))
    for i in adapters:
        a = acc([i])
        rows.append((f"dim {i}", a, base - a))
    a = acc(adapters)
    rows.append(("all_adapters", a, base - a))
    return rows


def compare_confirmation(config: TrainConfig, k_values):
    """One run per confirmation value K, identical seeds otherwise."""
    if len(k_values) < 2:
        raise ValueError("need at least two K values")
    out = {}
    for k in k_values:
        cfg = replace(config, detector=replace(config.detector, confirm=k))
        report, _ = run(cfg)
        out[k] = report
    return out


# -- CSV export ---------------------------------------------------------

def write_report_csv(path, report: RunReport):
    dec = {o.step: o.decision.value for o in report.observations}
    with open(path, "w") as f:
        f.write("step,loss,d_active,decision\n")
        for step, (loss, d) in enumerate(zip(report.loss_trace,
                                             report.d_active_trace)):
            f.write(f"{step},{loss:.6g},{d},{dec.get(step, 'none')}\n")


def write_perdomain_csv(path, report: RunReport):
    with open(path, "w") as f:
        f.write("eval_step,domain,accuracy\n")
        for s, d, a in report.per_domain:
            f.write(f"{s},{d},{a:.6g}\n")


def write_events_csv(path, events):
    with open(path, "w") as f:
        f.write("step,d_before,d_after,signal\n")
        for ev in events:
            f.write(f"{ev.step},{ev.d_before},{ev.d_after},{ev.signal}\n")


def summary_row(report: RunReport):
    prec = "" if report.precision_flagged and not report.events else \
        f"{report.boundary_precision:.4f}"
    return (f"{report.mode},{report.final_accuracy:.4f},{len(report.events)},"
            f"{report.d_final},{report.d_avg:.2f},{prec}")


def write_summary_csv(path, reports):
    with open(path, "w") as f:
        f.write("model,final_acc,expansions,d_final,d_avg,boundary_precision\n")
        for r in reports:
            f.write(summary_row(r) + "\n")
