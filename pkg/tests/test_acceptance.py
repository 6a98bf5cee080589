"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from makged.agents import DIRECTIONAL_ROLES, AgentRole, ScriptedBackend, Verdict  # noqa: E402
from makged.cli import main as cli_main  # noqa: E402
from makged.dataset import Label, read_split, split  # noqa: E402
from makged.encoder import (  # noqa: E402
    FusedEmbedding,
    ToyConditionedModel,
    TrainConfig,
    UniformModel,
    assemble_training_sequence,
    gradient_oracle_check,
    init_parameters,
    instruction_tuning_loss,
    lm_gradient_check,
    train_encoder,
)
from makged.encoder.gcn import accuracy  # noqa: E402
from makged.evaluation import MetricsReport, confusion, metrics, report  # noqa: E402
from makged.kg import Triple, load_kg  # noqa: E402
from makged.protocol import Method, decide  # noqa: E402
from makged.subgraphs import KINDS, DirectionalSubgraph, extract  # noqa: E402

from synthetic import planted_dataset, random_graph, unique_graph  # noqa: E402
from test_evaluation import recount, rows  # noqa: E402
from test_subgraphs import brute_force  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}


def record(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{number}] {name}: {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------------


def test_1_subgraph_oracle_equivalence():
    rng = random.Random(2024)
    start = time.perf_counter()
    mismatches = checks = 0
    for _ in range(20):
        g = random_graph(rng, rng.randint(50, 1000), rng.randint(5, 120), rng.randint(1, 12))
        for _ in range(100):
            if rng.random() < 0.5:
                target = rng.choice(g.triples)
            else:
                target = Triple(rng.randrange(g.num_entities), rng.randrange(g.num_relations), rng.randrange(g.num_entities))
            for kind in KINDS:
                checks += 1
                if set(extract(g, target, kind, cap=None).triples) != brute_force(g, target, kind):
                    mismatches += 1
    elapsed = time.perf_counter() - start
    record(1, "subgraph oracle equivalence", mismatches == 0 and elapsed < 10,
           f"{checks} extractions, {mismatches} mismatches, {elapsed:.2f}s (limit 10s)")


# 2 ---------------------------------------------------------------------------------


class _Counting:
    def __init__(self, inner):
        self.inner, self.name, self.rounds = inner, inner.name, []

    def complete(self, prompt, context):
        self.rounds.append(context.round)
        return self.inner.complete(prompt, context)


def _expected(combo):
    n_c, n_i = combo.count(Verdict.CORRECT), combo.count(Verdict.INCORRECT)
    if n_c == 4 or n_i == 4:
        return Method.CONSENSUS, Label.CORRECT if n_c else Label.INCORRECT, 0
    if n_c != n_i:
        return Method.MAJORITY, Label.CORRECT if n_c > n_i else Label.INCORRECT, 3
    return Method.SUMMARIZER, Label.INCORRECT, 3


def test_2_protocol_exhaustiveness():
    g = load_kg(Path(__file__).parent.parent / "src" / "makged" / "data" / "toy_kg.tsv")
    target = g.triples[0]
    start = time.perf_counter()
    failures = []
    for combo in itertools.product(list(Verdict), repeat=4):
        bk = {role: ScriptedBackend.fixed([v]) for role, v in zip(DIRECTIONAL_ROLES, combo)}
        summarizer = _Counting(ScriptedBackend.fixed(["incorrect"]))
        bk[AgentRole.SUMMARIZER] = summarizer
        d = decide(target, g, bk)
        method, label, rounds = _expected(list(combo))
        want_calls = 1 if method is Method.SUMMARIZER else 0
        if (d.method, d.label, d.rounds_used, len(summarizer.rounds)) != (method, label, rounds, want_calls):
            failures.append(combo)
    elapsed = time.perf_counter() - start
    record(2, "protocol exhaustiveness", not failures and elapsed < 5,
           f"81 combinations, {len(failures)} wrong, {elapsed:.2f}s (limit 5s)")


# 3 ---------------------------------------------------------------------------------


class _TableModel:
    def __init__(self, tokens, probs, vocab_size=8):
        self.tokens, self.probs, self.vocab_size = tokens, probs, vocab_size

    def probabilities(self, prefix, conditioning):
        i = len(prefix)
        dist = np.full(self.vocab_size, (1.0 - self.probs[i]) / (self.vocab_size - 1))
        dist[self.tokens[i]] = self.probs[i]
        return dist


def test_3_instruction_loss_numeric():
    cond = FusedEmbedding(np.zeros(4), 2)
    tokens = [1, 2, 3, 4]
    seq = assemble_training_sequence(tokens[:3], cond, tokens[3:])
    hand = instruction_tuning_loss(_TableModel(tokens, [0.5, 0.5, 0.25, 0.125]), seq)
    errs = {}
    for v in (2, 10, 100):
        s = assemble_training_sequence([0, 1, 1], cond, [0, 1])
        errs[v] = abs(instruction_tuning_loss(UniformModel(v), s) - math.log(v))
    ok = abs(hand - 1.213008) <= 1e-6 and max(errs.values()) <= 1e-9
    record(3, "instruction-tuning loss", ok,
           f"hand example {hand:.7f} (want 1.213008 +-1e-6), max |loss-lnV| {max(errs.values()):.1e} (limit 1e-9)")


# 4 ---------------------------------------------------------------------------------


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    n_ent = int(rng.integers(6, 30))
    params = init_parameters(n_ent, dim=int(rng.integers(4, 17)), hidden=int(rng.integers(4, 25)), seed=seed)
    params.clf_w = rng.normal(0, 0.5, size=params.clf_w.shape)
    params.clf_b = rng.normal(0, 0.5, size=params.clf_b.shape)
    kind = KINDS[seed % 4]
    center = int(rng.integers(n_ent))
    triples = []
    for _ in range(int(rng.integers(1, 7))):
        other = int(rng.integers(n_ent))
        rel = int(rng.integers(3))
        triples.append(Triple(center, rel, other) if kind.is_forward else Triple(other, rel, center))
    triples = tuple(dict.fromkeys(triples))
    sg = DirectionalSubgraph(kind, center, Triple(0, 0, 0), triples, False)
    vocab = int(rng.integers(5, 15))
    model = ToyConditionedModel(vocab, int(rng.integers(2, 6)), 8, seed=seed)
    seq = assemble_training_sequence(
        rng.integers(0, vocab, int(rng.integers(1, 6))).tolist(), FusedEmbedding(rng.normal(size=8), 4),
        rng.integers(0, vocab, int(rng.integers(1, 4))).tolist(),
    )
    return params, sg, model, seq


def test_4_gradient_correctness():
    worst = 0.0
    for seed in range(20):
        params, sg, model, seq = _random_instance(seed)
        worst = max(worst, gradient_oracle_check(params, sg, 1e-5, seed=seed), lm_gradient_check(model, seq, 1e-5, seed=seed))
    record(4, "gradient correctness", worst < 1e-4,
           f"20 instances, max relative error {worst:.2e} (limit 1e-4)")


# 5 ---------------------------------------------------------------------------------


def test_5_encoder_learnability():
    g, examples = planted_dataset(n_triples=500, rate=0.3, seed=0)
    parts = split(examples, seed=0)
    start = time.perf_counter()
    result = train_encoder(parts, g, TrainConfig(lr=0.001, batch=64, epochs=100))
    held_out = parts.valid + parts.test
    acc = accuracy(result.params, g, held_out)
    elapsed = time.perf_counter() - start
    record(5, "encoder learnability", acc >= 0.85 and elapsed < 120,
           f"held-out accuracy {acc:.4f} on {len(held_out)} examples (need >=0.85), {elapsed:.1f}s (limit 120s)")


# 6 ---------------------------------------------------------------------------------


def _quiet_cli(*argv) -> int:
    import contextlib
    import io

    with contextlib.redirect_stdout(io.StringIO()):
        return cli_main([str(a) for a in argv])


def test_6_dataset_contract(tmp_path):
    g = unique_graph(random.Random(61), 1000, 200, 10)
    kg = tmp_path / "kg.tsv"
    kg.write_text("".join(line + "\n" for line in g.serialize()))
    outs = []
    for run in ("a", "b"):
        assert _quiet_cli("build-dataset", "--kg", kg, "--rate", "0.3", "--seed", "5", "--out", tmp_path / run) == 0
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / run).glob("*.jsonl"))})
    parts = read_split(tmp_path / "a", g)
    every = parts.train + parts.valid + parts.test
    n_bad = sum(ex.label is Label.INCORRECT for ex in every)
    collisions = sum(ex.label is Label.INCORRECT and g.contains(ex.triple) for ex in every)
    sizes = (len(parts.train), len(parts.valid), len(parts.test))
    ok = n_bad == 300 and collisions == 0 and sizes == (800, 100, 100) and outs[0] == outs[1]
    record(6, "dataset contract", ok,
           f"incorrect={n_bad} collisions={collisions} split={'/'.join(map(str, sizes))} identical_rerun={outs[0] == outs[1]}")


# 7 ---------------------------------------------------------------------------------


def test_7_metrics_oracle():
    rng = random.Random(77)
    worst = 0.0
    for _ in range(100):
        n = rng.randint(1, 1000)
        gold = [Label.INCORRECT if rng.random() < rng.random() else Label.CORRECT for _ in range(n)]
        pred = [Label.INCORRECT if rng.random() < 0.5 else Label.CORRECT for _ in range(n)]
        m = metrics(confusion(rows(pred), rows(gold)))
        ref = recount(pred, gold)
        got = (m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1)
        worst = max(worst, *(abs(a - b) for a, b in zip(got, ref)))
    from makged.evaluation import ConfusionMatrix

    w = metrics(ConfusionMatrix(tp=3, fp=1, fn=1, tn=5))
    worked = max(abs(v - 0.791667) for v in (w.macro_precision, w.macro_recall, w.macro_f1))
    record(7, "metrics oracle", worst <= 1e-12 and worked <= 1e-6,
           f"100 random pairs, max deviation {worst:.1e} (limit 1e-12); worked example off by {worked:.1e}")


# 8 ---------------------------------------------------------------------------------


def _pipeline(root: Path, parallelism: int) -> dict[str, bytes]:
    import contextlib
    import io

    config = Path(__file__).parent / "data" / "toy_run.yaml"
    root.mkdir(parents=True)
    ds = root / "dataset"
    assert _quiet_cli("ingest", "--kg", "@toy", "--out", root / "kg.tsv") == 0
    assert _quiet_cli("build-dataset", "--kg", root / "kg.tsv", "--config", config, "--out", ds) == 0
    assert _quiet_cli("detect", "--kg", root / "kg.tsv", "--dataset", ds / "train.jsonl", "--config", config,
                      "--out", root / "decisions.jsonl", "--parallelism", parallelism) == 0
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        assert cli_main(["evaluate", "--pred", str(root / "decisions.jsonl"), "--gold", str(ds / "train.jsonl")]) == 0
    return {"decisions": (root / "decisions.jsonl").read_bytes(), "report": buf.getvalue().encode()}


def test_8_end_to_end_determinism(tmp_path):
    runs = {
        "p1a": _pipeline(tmp_path / "p1a", 1),
        "p1b": _pipeline(tmp_path / "p1b", 1),
        "p4": _pipeline(tmp_path / "p4", 4),
    }
    ok = runs["p1a"] == runs["p1b"] == runs["p4"]
    record(8, "end-to-end determinism", ok,
           f"decisions+report identical across 2 runs and parallelism 1/4: {ok}")


# 9 ---------------------------------------------------------------------------------


def test_9_report_fidelity():
    text = report(MetricsReport(accuracy=0.7748, macro_precision=0.7686, macro_recall=0.7252, macro_f1=0.7367, n=1))
    row = text.splitlines()[1]
    record(9, "report fidelity", row == "0.7748 0.7367 0.7686 0.7252", f"rendered row {row!r}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
