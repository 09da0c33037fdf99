"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 partial failure, 64 usage error.
All outputs are line-oriented and deterministic given identical inputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus, report, snr, toytrain
from .core import french_inventory, load_inventory, read_posteriorgram
from .decode import beam_decode, greedy_decode, greedy_path_logprob
from .errors import EmptyReference, PerEvalError
from .metrics import align, corpus_per, per
from .schedule import select_checkpoint

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PARTIAL = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_decoder_flags(sub):
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--beam", type=_positive_int, metavar="N",
                       help="prefix beam search with width N (default 10)")
    group.add_argument("--greedy", action="store_true",
                       help="per-frame argmax decoding")


def _decoder_config(args) -> report.DecoderConfig:
    if args.greedy:
        return report.DecoderConfig(kind="greedy")
    return report.DecoderConfig(kind="beam", width=args.beam)


def cmd_decode(args) -> int:
    inventory = load_inventory(args.inventory)
    gram = read_posteriorgram(args.gram)
    if gram.classes != inventory.size:
        raise PerEvalError(
            f"posteriorgram has {gram.classes} classes, inventory has {inventory.size}"
        )
    if args.greedy:
        # Score is the log mass of the argmax path itself, not the
        # collapsed sequence's total mass.
        hyp = greedy_decode(gram)
        score = greedy_path_logprob(gram)
    else:
        hyp, score = beam_decode(gram, args.beam or 10)[0]
    print(" ".join(inventory.to_symbols(hyp)) + f"\t{score:.6f}")
    return EXIT_OK


def _read_symbol_lines(path, inventory):
    seqs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        seqs.append(inventory.to_indices(line.split()))
    return seqs


def cmd_score(args) -> int:
    inventory = load_inventory(args.inventory)
    refs = _read_symbol_lines(args.ref, inventory)
    hyps = _read_symbol_lines(args.hyp, inventory)
    if len(refs) != len(hyps):
        raise PerEvalError(
            f"line count mismatch: {len(refs)} references, {len(hyps)} hypotheses"
        )
    all_ops = []
    for i, (ref, hyp) in enumerate(zip(refs, hyps), 1):
        ops = align(ref, hyp)
        all_ops.append(ops)
        try:
            print(f"{i}\t{per(ops):.1f}")
        except EmptyReference:
            print(f"{i}\tn/a")
    print(f"overall\t{corpus_per(all_ops):.1f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    inventory = load_inventory(args.inventory)
    utterances = corpus.load_manifest(args.manifest, inventory)
    result = report.evaluate(utterances, inventory, _decoder_config(args), jobs=args.jobs)
    sys.stdout.write(report.render(result, args.format).decode("utf-8"))
    if args.figures is not None:
        for path in report.render_figures(result, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_snr(args) -> int:
    samples, rate = snr.read_wav_mono(args.wav)
    value = snr.estimate_snr(samples, rate)
    print(f"{value:.1f}\t{snr.noise_band(value).value}")
    return EXIT_OK


def cmd_clean(args) -> int:
    rules = corpus.CleaningRules.from_json(args.rules)
    kept = 0
    total = 0
    with open(args.outfile, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(
            Path(args.infile).read_text(encoding="utf-8").splitlines(), 1
        ):
            total += 1
            decision = corpus.clean_transcript(line.split(), rules)
            if decision.kept:
                out.write(" ".join(decision.tokens) + "\n")
                kept += 1
            else:
                print(f"line {lineno} discarded: {decision.discard_reason}",
                      file=sys.stderr)
    print(f"kept {kept} of {total} lines", file=sys.stderr)
    return EXIT_OK


def cmd_phonetize(args) -> int:
    inventory = (
        load_inventory(args.inventory) if args.inventory else french_inventory()
    )
    lexicon = corpus.load_lexicon(args.lexicon, inventory)
    for line in Path(args.infile).read_text(encoding="utf-8").splitlines():
        result = corpus.phonetize(line.split(), lexicon)
        if result.ok:
            print("ok\t" + " ".join(inventory.to_symbols(result.phonemes)))
        else:
            print("oov\t" + " ".join(result.oov))
    return EXIT_OK


def cmd_train_toy(args) -> int:
    task, policy, hyper = toytrain.load_train_config(args.config)
    if args.seed is not None:
        task = toytrain.SyntheticTask.from_dict({**task.to_dict(), "seed": args.seed})
    train_data = toytrain.generate_synthetic(task)
    val_data = toytrain.generate_synthetic(toytrain.validation_task(task))
    model = toytrain.ToyModel.init(task, seed=task.seed)
    _, history = toytrain.train(model, train_data, val_data, policy, hyper,
                                shuffle_seed=task.seed)
    toytrain.write_history_csv(history, args.out_history)
    best = select_checkpoint([(h.epoch, h.val_per) for h in history])
    best_per = min(h.val_per for h in history)
    print(f"best_epoch\t{best}")
    print(f"best_val_per\t{best_per:.4f}")
    print(f"final_val_per\t{history[-1].val_per:.4f}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="pereval",
                     description="CTC phoneme decoding and PER evaluation toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("decode", help="decode one posteriorgram file")
    p.add_argument("--gram", required=True, help="PGRM posteriorgram file")
    p.add_argument("--inventory", required=True, help="phoneme inventory file")
    _add_decoder_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="PER between reference and hypothesis files")
    p.add_argument("--inventory", required=True)
    p.add_argument("--ref", required=True, help="one utterance per line, symbols")
    p.add_argument("--hyp", required=True, help="one utterance per line, symbols")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="evaluate a manifest and print a report")
    p.add_argument("--manifest", required=True, help="JSONL manifest")
    p.add_argument("--inventory", required=True)
    _add_decoder_flags(p)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="utterance-level parallelism (output is identical)")
    p.add_argument("--figures", metavar="DIR",
                   help="also write PER bar charts into DIR")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("snr", help="estimate SNR of a WAV file")
    p.add_argument("--wav", required=True)
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("clean", help="clean transcript lines")
    p.add_argument("--rules", required=True, help="cleaning rules JSON")
    p.add_argument("--in", dest="infile", required=True, help="raw transcript lines")
    p.add_argument("--out", dest="outfile", required=True, help="cleaned output file")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("phonetize", help="words to phonemes via a lexicon")
    p.add_argument("--lexicon", required=True, help="word<TAB>phonemes file")
    p.add_argument("--in", dest="infile", required=True, help="word lines")
    p.add_argument("--inventory", help="defaults to the shipped French inventory")
    p.set_defaults(func=cmd_phonetize)

    p = sub.add_parser("train-toy", help="run the synthetic-data trainer")
    p.add_argument("--config", required=True, help="task/policy/hyperparameters JSON")
    p.add_argument("--out-history", dest="out_history", required=True,
                   help="history CSV (epoch,loss,val_per)")
    p.add_argument("--seed", type=int, help="override the task seed")
    p.set_defaults(func=cmd_train_toy)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PerEvalError, OSError, ValueError) as exc:
        print(f"pereval: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
