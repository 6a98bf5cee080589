"""``makged`` command line: ingest, build-dataset, train-encoder, detect, evaluate, transcript."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from .config import RunConfig, build_backends, parse_config, validate_config
from .dataset import (
    Label,
    corrupt_dataset,
    read_examples,
    read_split,
    split,
    train_similarity_embeddings,
    write_split,
)
from .encoder.gcn import TrainConfig, accuracy, save_checkpoint, train_encoder
from .errors import ConfigError, MakgedError
from .evaluation import confusion, metrics, report, report_json
from .kg import KnowledgeGraph, load_kg
from .protocol import RunStats, detect_batch, read_decisions, write_decisions

log = logging.getLogger("makged")

TOY_KG = "@toy"


def toy_kg_path() -> Path:
    return Path(str(resources.files("makged") / "data" / "toy_kg.tsv"))


def _kg(path: str | Path) -> KnowledgeGraph:
    return load_kg(toy_kg_path() if str(path) == TOY_KG else path)


def _rate(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"rate must be in (0, 1), got {value}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        return validate_config(args.config)
    return parse_config({})


def _pick(flag, default):
    return default if flag is None else flag


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    g = _kg(args.kg)
    print(f"triples={len(g)} entities={g.num_entities} relations={g.num_relations}")
    if args.out:
        Path(args.out).write_text("".join(line + "\n" for line in g.serialize()), encoding="utf-8")
    return 0


def cmd_build_dataset(args) -> int:
    cfg = _config(args)
    g = _kg(args.kg)
    rate = _pick(args.rate, cfg.corruption.rate)
    seed = _pick(args.seed, cfg.corruption.seed)
    top_k = _pick(args.top_k, cfg.corruption.top_k)
    sim = cfg.similarity
    table = train_similarity_embeddings(
        g, dim=sim.dim, epochs=_pick(args.sim_epochs, sim.epochs), margin=sim.margin, lr=sim.lr, seed=seed
    )
    examples = corrupt_dataset(g, table, rate=rate, top_k=top_k, seed=seed)
    parts = split(examples, seed=seed)
    write_split(args.out, g, parts)
    n_bad = sum(ex.label.value == "incorrect" for ex in examples)
    print(
        f"examples={len(examples)} incorrect={n_bad} "
        f"train={len(parts.train)} valid={len(parts.valid)} test={len(parts.test)} out={args.out}"
    )
    return 0


def cmd_train_encoder(args) -> int:
    cfg = _config(args)
    g = _kg(args.kg)
    parts = read_split(args.dataset, g)
    enc = cfg.encoder
    tc = TrainConfig(
        lr=_pick(args.lr, enc.lr),
        batch=_pick(args.batch, enc.batch),
        epochs=_pick(args.epochs, enc.epochs),
        hidden=_pick(args.hidden, enc.hidden),
        dim=_pick(args.dim, enc.dim),
        seed=_pick(args.seed, enc.seed),
        cap=cfg.protocol.cap,
    )
    result = train_encoder(parts, g, tc)
    scores = {
        name: accuracy(result.params, g, examples, tc.cap, tc.seed)
        for name, examples in parts.parts().items()
        if examples
    }
    final = result.losses[-1] if result.losses else float("nan")
    save_checkpoint(args.out, result.params, tc, extra={"final_loss": final, "accuracy": scores})
    print(f"final_loss={final:.6f} " + " ".join(f"{k}_accuracy={v:.4f}" for k, v in scores.items()))
    return 0


def cmd_detect(args) -> int:
    cfg = _config(args)
    g = _kg(args.kg)
    examples = read_examples(args.dataset, g)
    targets = [ex.triple for ex in examples]
    backends = build_backends(cfg.backends)
    parallelism = _pick(args.parallelism, cfg.protocol.parallelism)
    result = detect_batch(targets, g, backends, cfg.protocol.to_protocol(), parallelism)
    write_decisions(args.out, g, targets, result)
    s = result.stats
    print(
        f"decided={s.n} errors={len(result.errors)} avg_rounds={s.mean_rounds:.2f} tie_rate={s.tie_fraction:.2f}"
    )
    for i, exc in sorted(result.errors.items()):
        log.warning("triple %d failed: %s: %s", i, exc.category, exc)
    return 1 if result.errors else 0


class _Gold:
    __slots__ = ("triple", "label")

    def __init__(self, triple, label):
        self.triple, self.label = triple, label


def _read_gold(path) -> list[_Gold]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(_Gold((obj["head"], obj["relation"], obj["tail"]), Label(obj["label"])))
    return out


def cmd_evaluate(args) -> int:
    preds = read_decisions(args.pred)
    failed = [p for p in preds if p.label is None]
    if failed:
        raise ConfigError("pred", f"{len(failed)} triple(s) have no decision, e.g. {failed[0].key!r}")
    gold = _read_gold(args.gold)
    m = metrics(confusion(preds, gold))
    stats = RunStats.from_decisions(preds)
    print(report(m, stats))
    doc = report_json(m, stats)
    print(json.dumps(doc, sort_keys=True))
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _parse_key(key: str) -> tuple[str, ...]:
    for sep in ("\t", "|"):
        parts = key.split(sep)
        if len(parts) == 3:
            return tuple(p.strip() for p in parts)
    raise ConfigError("--triple", "expected head<TAB>relation<TAB>tail or head|relation|tail")


def format_transcript(rec) -> str:
    lines = ["Triple: ({}, {}, {})".format(*rec.triple)]
    if rec.error:
        lines.append(f"Failed: {rec.error['category']}: {rec.error['message']}")
        return "\n".join(lines)
    current = None
    for turn in rec.turns:
        if turn["round"] != current:
            current = turn["round"]
            lines.append("")
            lines.append("[Analysis]" if current == 0 else f"[Discussion round {current}]")
        lines.append(f"  {turn['role']}: {turn['verdict']}")
        if turn["rationale"]:
            lines.append(f"      {' '.join(turn['rationale'].split())}")
    if rec.summary:
        lines += ["", "[Summarizer]", f"  {rec.summary['verdict']}: {' '.join(rec.summary['rationale'].split())}"]
    lines += ["", f"Final: {rec.label.value} (by {rec.method.value}, {rec.rounds_used} discussion round(s))"]
    return "\n".join(lines)


def cmd_transcript(args) -> int:
    want = _parse_key(args.triple)
    for rec in read_decisions(args.file):
        if rec.triple == want:
            print(format_transcript(rec))
            return 0
    raise ConfigError("--triple", f"{'|'.join(want)} not found in {args.file}")


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="makged", description="Multi-agent knowledge graph error detection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    kg_help = f"triple file (head<TAB>relation<TAB>tail per line); {TOY_KG} for the bundled toy graph"

    p = sub.add_parser("ingest", help="load a triple file and print its size")
    p.add_argument("--kg", required=True, help=kg_help)
    p.add_argument("--out", help="write the deduplicated graph back out as TSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-dataset", help="corrupt a clean graph and write train/valid/test.jsonl")
    p.add_argument("--kg", required=True, help=kg_help)
    p.add_argument("--rate", type=_rate, help="fraction of triples to corrupt, in (0, 1) (default 0.3)")
    p.add_argument("--seed", type=int, help="seed for embeddings, corruption and split (default 0)")
    p.add_argument("--top-k", type=_positive, help="cosine neighbours to draw replacements from (default 10)")
    p.add_argument("--sim-epochs", type=int, help="training epochs for the similarity embeddings (default 100)")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train-encoder", help="train the GCN subgraph encoder and its classifier head")
    p.add_argument("--dataset", required=True, help="directory with train/valid/test.jsonl")
    p.add_argument("--kg", required=True, help=kg_help)
    p.add_argument("--out", required=True, help="checkpoint path (JSON)")
    p.add_argument("--epochs", type=int, help="default 100")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 0.001)")
    p.add_argument("--batch", type=_positive, help="batch size (default 64)")
    p.add_argument("--hidden", type=_positive, help="hidden width (default 128)")
    p.add_argument("--dim", type=_positive, help="node feature / output width (default 64)")
    p.add_argument("--seed", type=int, help="default 0")
    p.add_argument("--config", help="YAML run configuration")
    p.set_defaults(func=cmd_train_encoder)

    p = sub.add_parser("detect", help="run the agent protocol over a dataset file")
    p.add_argument("--kg", required=True, help=kg_help)
    p.add_argument("--dataset", required=True, help="JSONL examples to judge (labels are ignored)")
    p.add_argument("--config", required=True, help="YAML run configuration with a backends section")
    p.add_argument("--out", required=True, help="decision JSONL output")
    p.add_argument("--parallelism", type=_positive, help="triples decided concurrently (default from config)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score decisions against gold labels")
    p.add_argument("--pred", required=True, help="decision JSONL from detect")
    p.add_argument("--gold", required=True, help="gold example JSONL, same order")
    p.add_argument("--json", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("transcript", help="pretty-print one triple's discussion")
    p.add_argument("file", help="decision JSONL from detect")
    p.add_argument("--triple", required=True, help="head|relation|tail (or TAB-separated)")
    p.set_defaults(func=cmd_transcript)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MakgedError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IOError: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: ValueError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
