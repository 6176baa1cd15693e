"""Retrieval-augmented generation over n-ary relational hypergraphs."""

from .chains import PseudoTriple, Question, derive_triples, load_questions
from .context import BudgetConfig, ContextBundle, pack
from .embedding import CachedEmbedder, HashingEmbedder, RemoteEmbedder, make_embedder
from .exceptions import BackendError, ConfigError, DataError, HyperRAGError
from .llm import HttpChatBackend, LlmGateway, ScriptedBackend
from .memory import BeamConfig, HyperMemory, beam_retrieve
from .plausibility import PlausibilityMLP
from .retriever import DensityMode, HyperRetriever, SearchConfig, adaptive_search
from .store import Entity, Hypergraph, NaryFact, RoleBoundQuery, ingest

__version__ = "0.1.0"

__all__ = [
    "BackendError", "BeamConfig", "BudgetConfig", "CachedEmbedder", "ConfigError", "ContextBundle", "DataError",
    "DensityMode", "Entity", "HashingEmbedder", "HttpChatBackend", "HyperMemory", "HyperRAGError", "HyperRetriever",
    "Hypergraph", "LlmGateway", "NaryFact", "PlausibilityMLP", "PseudoTriple", "Question", "RemoteEmbedder",
    "RoleBoundQuery", "ScriptedBackend", "SearchConfig", "adaptive_search", "beam_retrieve", "derive_triples",
    "ingest", "load_questions", "make_embedder", "pack",
]
