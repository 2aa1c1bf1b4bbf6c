"""Deterministic synthetic character-sequence corpus.

Ten structurally distinct families, each generated from a small template
grammar over a family-specific lexicon plus shared English filler words.
Variants of a family re-draw ~30% of the lexicon and the punctuation rate
from the variant seed, so variants stay related but distinguishable.

Every sample is exactly 32 printable-ASCII characters (token ids < 128).
Generation is deterministic given (spec, seed): seeds are mixed with a
splitmix64-style hash and fed to numpy's PCG64, which is bit-stable across
platforms. Train and eval draws live in disjoint seed namespaces
(eval seed = train seed XOR EVAL_SEED_XOR).

Template examples (base variant of each family):
  scientific: "entropy flux of the isotope (42) "
  code:       "def foo(x1): return x1 + 3; if "
  math:       "7*x + 14 = 35; y = (2^3) - 9 + "
"""

from dataclasses import dataclass, field

import numpy as np

SEQ_LEN = 32
VOCAB = 128
EVAL_SEED_XOR = 0x9E3779B97F4A7C15

FAMILIES = ("scientific", "news", "dialog", "medical", "code",
            "poetry", "financial", "sports", "math", "legal")

FILLER = ["the", "and", "of", "to", "in", "a"]

_LEXICON = {
    "scientific": ["quantum", "entropy", "photon", "theorem", "lattice",
                   "isotope", "spectral", "flux", "orbital", "plasma",
                   "gradient", "vector"],
    "news": ["officials", "announced", "report", "breaking", "sources",
             "capital", "minister", "press", "today", "crisis",
             "election", "statement"],
    "dialog": ["yeah", "okay", "really", "what", "sure", "hmm",
               "right", "maybe", "wait", "dunno", "guess", "totally"],
    "medical": ["patient", "dosage", "acute", "chronic", "symptom",
                "renal", "hepatic", "lesion", "therapy", "biopsy",
                "prognosis", "clinical"],
    "code": ["def", "return", "if", "else", "for", "while",
             "import", "class", "print", "len", "range", "None"],
    "poetry": ["moon", "whisper", "golden", "silent", "river",
               "autumn", "shadow", "petal", "ember", "sorrow",
               "dusk", "bloom"],
    "financial": ["shares", "market", "profit", "quarter", "revenue",
                  "stock", "dividend", "index", "bond", "yield",
                  "equity", "hedge"],
    "sports": ["match", "goal", "season", "coach", "league",
               "striker", "victory", "penalty", "defense", "squad",
               "finals", "champion"],
    "math": ["x", "y", "z", "n", "a", "b"],
    "legal": ["whereas", "herein", "party", "clause", "shall",
              "pursuant", "liability", "covenant", "thereof", "breach",
              "statute", "remedy"],
}


def mix64(*parts):
    """splitmix64-style mixer collapsing integers into one 64-bit seed."""
    h = np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        for p in parts:
            h ^= np.uint64(p & 0xFFFFFFFFFFFFFFFF)
            h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            h ^= h >> np.uint64(31)
    return int(h)


@dataclass(frozen=True)
class DomainSpec:
    family: str
    variant: int
    label: int
    seed: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")


def _alpha_word(rng, chars, lo=4, hi=9):
    n = int(rng.integers(lo, hi))
    return "".join(chars[i] for i in rng.integers(0, len(chars), n))


def variant_lexicon(spec):
    """Words, word-choice weights, and punctuation rate for one variant.

    Variant 0 is the base family. Higher variants re-draw ~30% of the
    lexicon over a variant-specific subset of the family's letters, skew the
    word-choice frequencies, and perturb the punctuation rate, so variants
    of one family stay related but statistically distinguishable.
    """
    words = list(_LEXICON[spec.family])
    weights = np.full(len(words), 1.0 / len(words))
    punct_rate = 0.3
    if spec.variant > 0:
        vrng = np.random.default_rng(mix64(spec.seed, spec.variant, 0x5EED))
        pool = sorted(set("".join(words)))
        sub = [pool[i] for i in sorted(
            vrng.choice(len(pool), size=max(2, int(0.6 * len(pool))),
                        replace=False))]
        n_swap = max(1, int(round(0.3 * len(words))))
        idx = vrng.choice(len(words), size=n_swap, replace=False)
        for i in idx:
            words[i] = _alpha_word(vrng, sub)
        weights = vrng.dirichlet(np.full(len(words), 0.4))
        weights = 0.9 * weights + 0.1 / len(words)
        punct_rate = float(vrng.uniform(0.1, 0.5))
    return words, weights, punct_rate


def _build_text(spec, words, cum_weights, punct_rate, rng):
    """One raw sample string for the family's template grammar."""
    fam = spec.family
    pick = lambda ws: ws[int(rng.integers(0, len(ws)))]
    wpick = lambda: words[int(np.searchsorted(cum_weights, rng.random()))]
    out = []
    if fam == "code":
        indent = " " * int(rng.integers(0, 3))
        out.append(indent)
        while len("".join(out)) < SEQ_LEN:
            kw = wpick()
            ident = pick(["x1", "tmp", "arr", "val", "i"])
            form = int(rng.integers(0, 3))
            if form == 0:
                out.append(f"{kw} {ident}({ident}): ")
            elif form == 1:
                out.append(f"{ident} = {kw}({int(rng.integers(0, 99))}); ")
            else:
                out.append(f"{kw} {ident} {{}} ")
    elif fam == "math":
        while len("".join(out)) < SEQ_LEN:
            v = wpick()
            a, b, c = rng.integers(1, 99, 3)
            op = pick(["+", "-", "*", "/", "^"])
            out.append(f"{a}{op}{v} {pick(['+', '-', '='])} {b} ")
            if rng.random() < punct_rate:
                out.append(f"({c}) ")
    elif fam == "dialog":
        speaker = "a"
        while len("".join(out)) < SEQ_LEN:
            out.append(f"{speaker}: {wpick()} {wpick()}")
            out.append("? " if rng.random() < 0.6 else ". ")
            speaker = "b" if speaker == "a" else "a"
    elif fam == "poetry":
        # crude alliteration: stick to one bucket of words per line
        while len("".join(out)) < SEQ_LEN:
            w1, w2 = wpick(), wpick()
            out.append(f"{w1} {w2}")
            out.append(" / " if rng.random() < 0.7 else ", ")
    elif fam == "financial":
        while len("".join(out)) < SEQ_LEN:
            out.append(f"{wpick()} ${int(rng.integers(1, 999))}."
                       f"{int(rng.integers(0, 99)):02d} ")
            if rng.random() < punct_rate:
                out.append(f"{int(rng.integers(0, 99))}% ")
    elif fam == "sports":
        while len("".join(out)) < SEQ_LEN:
            out.append(f"{wpick()} "
                       f"{int(rng.integers(0, 9))}-{int(rng.integers(0, 9))}! ")
            if rng.random() < punct_rate:
                out.append(f"{wpick()} ")
    elif fam == "news":
        while len("".join(out)) < SEQ_LEN:
            w = wpick()
            out.append(w.capitalize() if rng.random() < 0.5 else w)
            out.append(", " if rng.random() < punct_rate else " ")
            if rng.random() < 0.15:
                out.append(f'"{pick(FILLER)}" ')
    elif fam == "scientific":
        while len("".join(out)) < SEQ_LEN:
            out.append(f"{wpick()} {pick(FILLER)} ")
            if rng.random() < punct_rate:
                out.append(f"({int(rng.integers(1, 99))}) ")
    elif fam == "medical":
        while len("".join(out)) < SEQ_LEN:
            out.append(f"{wpick()}-{wpick()} ")
            if rng.random() < punct_rate:
                out.append(f"{int(rng.integers(1, 500))}mg ")
    else:  # legal
        while len("".join(out)) < SEQ_LEN:
            out.append(f"{wpick()} {wpick()}; ")
            if rng.random() < punct_rate:
                out.append(f"({chr(97 + int(rng.integers(0, 6)))}) ")
    return "".join(out)[:SEQ_LEN]


def generate(spec, rng_seed, n):
    """n deterministic samples for one spec: (tokens (n, 32) uint8, labels)."""
    rng = np.random.default_rng(
        mix64(spec.seed, rng_seed, spec.variant,
              FAMILIES.index(spec.family)))
    words, weights, punct_rate = variant_lexicon(spec)
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    tokens = np.empty((n, SEQ_LEN), dtype=np.uint8)
    for i in range(n):
        text = _build_text(spec, words, cum, punct_rate, rng)
        tokens[i] = np.frombuffer(text.encode("ascii"), dtype=np.uint8)
    labels = np.full(n, spec.label, dtype=np.int64)
    return tokens, labels


def sample_text(tokens):
    """Decode one token row back to its string form."""
    return bytes(np.asarray(tokens, dtype=np.uint8)).decode("ascii")


@dataclass
class DomainSchedule:
    """Ordered domain specs introduced one per phase_length steps."""
    domains: list
    phase_length: int = 200
    seed: int = 0

    @property
    def total_steps(self):
        return len(self.domains) * self.phase_length

    @property
    def num_classes(self):
        return len(self.domains)

    @property
    def boundaries(self):
        """Introduction step of every domain (including domain 0 at step 0)."""
        return [d * self.phase_length for d in range(len(self.domains))]

    def domain_at(self, step):
        if not 0 <= step < self.total_steps:
            raise IndexError(f"step {step} outside schedule of {self.total_steps}")
        return step // self.phase_length

    def batch(self, step, batch_size, current_frac=0.5):
        """batch_size training samples: each sample comes from the currently
        active domain with probability current_frac, otherwise uniformly from
        any introduced domain. Training on the current domain alone collapses
        the shared head (all labels equal within a phase), so earlier domains
        stay in the mix."""
        cur = self.domain_at(step)
        rng = np.random.default_rng(mix64(self.seed, step, 0x7EA1))
        doms = np.where(rng.random(batch_size) < current_frac, cur,
                        rng.integers(0, cur + 1, batch_size))
        toks = np.empty((batch_size, SEQ_LEN), dtype=np.uint8)
        labs = np.empty(batch_size, dtype=np.int64)
        for d in np.unique(doms):
            sel = doms == d
            t, l = generate(self.domains[d], mix64(self.seed, step, int(d), 0xBA7C),
                            int(sel.sum()))
            toks[sel] = t
            labs[sel] = l
        return toks, labs

    def eval_set(self, up_to_domain, per_domain):
        """Held-out samples for domains 0..up_to_domain (inclusive)."""
        if per_domain < 1:
            raise ValueError("per_domain must be >= 1")
        toks, labs = [], []
        for d in range(up_to_domain + 1):
            spec = self.domains[d]
            t, l = generate(spec, (self.seed ^ EVAL_SEED_XOR) + d, per_domain)
            toks.append(t)
            labs.append(l)
        return np.concatenate(toks), np.concatenate(labs)


def make_schedule(num_families=10, variants=1, phase_length=200, seed=0):
    """Standard schedule: families cycle fastest, variants outermost, so the
    50-domain run interleaves all ten families within each variant block."""
    specs = []
    label = 0
    for v in range(variants):
        for fam in FAMILIES[:num_families]:
            specs.append(DomainSpec(family=fam, variant=v, label=label,
                                    seed=mix64(seed, label, 0xD0)))
            label += 1
    return DomainSchedule(domains=specs, phase_length=phase_length, seed=seed)


def dump_corpus(schedule, per_domain, out_file):
    """TSV corpus dump: label <TAB> raw 32-char string."""
    for spec in schedule.domains:
        toks, labs = generate(spec, schedule.seed, per_domain)
        for row, lab in zip(toks, labs):
            out_file.write(f"{lab}\t{sample_text(row)}\n")
