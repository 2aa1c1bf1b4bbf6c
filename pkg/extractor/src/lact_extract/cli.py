"""Command line front-end: TSV of samples in, one LACT file per layer out.

    lact-extract --model gpt2 --layers 1-12 --in samples.tsv --out acts/

Input rows are either "label<TAB>text" or bare "text" (unlabeled). Output
files are named layer<NN>.lact.
"""

import argparse
import os
import sys

from .backends import BackendError, HashBackend, TransformersBackend
from .format import write_lact


def parse_layers(spec):
    """'1-12' or '0,3,7' or a mix ('0,2-4') -> sorted unique layer list."""
    layers = set()
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            lo, _, hi = part.partition("-")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"bad layer range {part!r}")
            layers.update(range(lo, hi + 1))
        else:
            layers.add(int(part))
    if not layers or min(layers) < 0:
        raise ValueError(f"bad layer spec {spec!r}")
    return sorted(layers)


def read_samples(path):
    """Returns (texts, labels); labels is None if no row carries one."""
    texts, labels = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                print(f"warning: {path}:{lineno}: skipping empty line",
                      file=sys.stderr)
                continue
            if "\t" in line:
                label, text = line.split("\t", 1)
                try:
                    labels.append(int(label))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: label {label!r} is not an int")
            else:
                labels.append(None)
                text = line
            texts.append(text)
    if not texts:
        raise ValueError(f"{path}: no samples")
    if all(l is None for l in labels):
        return texts, None
    if any(l is None for l in labels):
        raise ValueError(f"{path}: mixed labeled and unlabeled rows")
    return texts, labels


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="lact-extract",
        description="Dump per-layer mean-pooled activations to LACT files")
    ap.add_argument("--model", default="gpt2",
                    help="Hugging Face model name (ignored with --stub)")
    ap.add_argument("--layers", required=True,
                    help="layers to extract, e.g. 1-12 or 0,4,8")
    ap.add_argument("--in", dest="input", required=True,
                    help="TSV input: 'label<TAB>text' or bare text per line")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--stub", action="store_true",
                    help="use the deterministic hash backend (no weights)")
    ap.add_argument("--stub-dim", type=int, default=64,
                    help="vector width for the stub backend")
    ap.add_argument("--batch-size", type=int, default=16)
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2

    try:
        layers = parse_layers(args.layers)
        texts, labels = read_samples(args.input)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    try:
        if args.stub:
            backend = HashBackend(d=args.stub_dim)
            acts = backend.hidden_states(texts, layers)
        else:
            backend = TransformersBackend(args.model)
            acts = backend.hidden_states(texts, layers,
                                         batch_size=args.batch_size)
    except BackendError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    os.makedirs(args.out, exist_ok=True)
    for layer in layers:
        path = os.path.join(args.out, f"layer{layer:02d}.lact")
        write_lact(path, layer, acts[layer], labels)
        print(f"wrote {path}: {acts[layer].shape[0]} x {acts[layer].shape[1]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
