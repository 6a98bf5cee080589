"""Knowledge graph error detection with four directional subgraph agents."""

from .dataset import CorruptionKind, DatasetSplit, EmbeddingTable, Label, LabeledExample
from .kg import KnowledgeGraph, Triple, Vocab, ingest_triples, load_kg
from .protocol import Decision, DiscussionTranscript, Method, ProtocolConfig, RunStats, decide, detect_batch, tally
from .subgraphs import DirectionalSubgraph, SubgraphKind, extract, extract_all_four

__version__ = "0.1.0"

__all__ = [
    "CorruptionKind",
    "DatasetSplit",
    "Decision",
    "DirectionalSubgraph",
    "DiscussionTranscript",
    "EmbeddingTable",
    "KnowledgeGraph",
    "Label",
    "LabeledExample",
    "Method",
    "ProtocolConfig",
    "RunStats",
    "SubgraphKind",
    "Triple",
    "Vocab",
    "decide",
    "detect_batch",
    "extract",
    "extract_all_four",
    "ingest_triples",
    "load_kg",
    "tally",
]
