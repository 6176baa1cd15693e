"""Command-line entry point: ``hyperrag <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .chains import Question, load_questions, resolve_surface_forms
from .config import Config, load_config
from .context import BudgetConfig, pack
from .embedding import make_embedder
from .evaluation import arity_sweep, run_cost_bench, run_eval, sample_queries
from .exceptions import ConfigError, DataError, HyperRAGError
from .llm import HttpChatBackend, LlmGateway, ScriptedBackend
from .memory import HyperMemory
from .plausibility import PlausibilityMLP, write_history
from .retriever import HyperRetriever, classify_density
from .store import Hypergraph, ingest

logger = logging.getLogger("hyperrag")


# -- wiring -------------------------------------------------------------------


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    # skip the automatic suffix when the help text already explains the default
    def _get_help_string(self, action):
        text = action.help or ""
        if "default" in text:
            return text
        return super()._get_help_string(action)


def _embedder(cfg: Config, no_cache: bool):
    b = cfg.backend
    cache = None if no_cache else cfg.paths.cache
    if b.embedder == "remote":
        if not b.embed_endpoint:
            raise ConfigError("backend.embed_endpoint is required for the remote embedder")
        return make_embedder("remote", dimension=b.embed_dim, cache_path=cache, endpoint=b.embed_endpoint,
                             model=b.embed_model, api_key_env=b.embed_api_key_env, max_in_flight=b.max_in_flight,
                             retries=b.retries, backoff=b.backoff)
    if b.embedder != "hashing":
        raise ConfigError(f"unknown embedder {b.embedder!r}")
    return make_embedder("hashing", dimension=b.embed_dim, cache_path=cache)


def _gateway(cfg: Config, required=True):
    b = cfg.backend
    if b.chat == "mock":
        if not b.mock_script:
            if required:
                raise ConfigError("the mock chat backend needs a script (--mock or backend.mock_script)")
            return None
        backend = ScriptedBackend.from_file(b.mock_script)
    elif b.chat == "http":
        if not b.chat_endpoint:
            raise ConfigError("backend.chat_endpoint is required for the http chat backend")
        backend = HttpChatBackend(b.chat_endpoint, b.chat_model, b.chat_api_key_env)
    else:
        raise ConfigError(f"unknown chat backend {b.chat!r}")
    return LlmGateway(backend, cfg.paths.templates, retries=b.retries, backoff=b.backoff, max_in_flight=b.max_in_flight)


def _graph(cfg: Config, path=None) -> Hypergraph:
    path = path or cfg.paths.graph
    if not path:
        raise ConfigError("no graph snapshot given (--graph or paths.graph)")
    return Hypergraph.load(path)


def _retriever(cfg: Config, embedder, checkpoint=None) -> HyperRetriever:
    path = checkpoint or cfg.paths.checkpoint
    if not path:
        raise ConfigError("no checkpoint given (--checkpoint or paths.checkpoint)")
    s = cfg.search
    return HyperRetriever.load(path, embedder, tau0=s.tau0, n_max=s.n_max, min_per_hop=s.min_per_hop, decay=s.decay,
                               density_lo=s.density_lo, density_up=s.density_up,
                               high_density_cap=s.high_density_cap, max_hops=s.max_hops)


def _budget(cfg: Config) -> BudgetConfig:
    b = cfg.budget
    return BudgetConfig(b.total_tokens, b.hyperedge_share, b.entity_share, b.chunk_share)


def _emit(records, out=None):
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _question(args, g: Hypergraph, gateway) -> Question:
    if args.qa:
        qs = {q.id: q for q in load_questions(args.qa)}
        if args.qid not in qs:
            raise DataError(f"question id {args.qid!r} not in {args.qa}")
        return qs[args.qid]
    if not args.question:
        raise ConfigError("give --question or --qa with --qid")
    topics = None
    if args.topic:
        topics = resolve_surface_forms(g, args.topic)
        if not topics:
            raise DataError(f"none of the topic names {args.topic} resolve to graph entities")
    return Question(args.qid or "cli", args.question, [], topics)


def _retrieve_chains(args, cfg, g, gateway, embedder):
    q = _question(args, g, gateway)
    rgraph = g.to_binary_graph() if args.binary_ablation else g
    trace = [] if args.trace else None
    if args.pipeline == "hyper-retriever":
        retriever = _retriever(cfg, embedder, args.checkpoint)
        chains = retriever.retrieve(q, rgraph, gateway=gateway, trace=trace)
    else:
        if gateway is None:
            raise ConfigError("hyper-memory needs a chat backend")
        result = HyperMemory(gateway, cfg.beam.width, cfg.beam.depth).retrieve(q, rgraph)
        chains = result.retained
        if trace is not None:
            trace.extend(result.trace)
        if result.error:
            logger.error("beam search aborted: %s", result.error)
    if args.trace:
        _emit(trace, args.trace)
    return q, rgraph, chains


# -- commands ------------------------------------------------------------------


def cmd_ingest(args, cfg):
    g = ingest(args.facts, args.entities, args.chunks or ())
    out = args.out or cfg.paths.graph
    if not out:
        raise ConfigError("no output path (--out or paths.graph)")
    g.save(out)
    _emit([{"snapshot": str(out), "entities": len(g.entities), "facts": len(g.facts), "chunks": len(g.chunks),
            "density": g.density, "density_mode": classify_density(g).value}])


def cmd_train(args, cfg):
    g = _graph(cfg, args.graph)
    if args.binary_ablation:
        g = g.to_binary_graph()
    questions = load_questions(args.qa)
    t = cfg.train
    model = PlausibilityMLP(tuple(t.hidden_layer_sizes), t.batch_size, t.learning_rate, t.max_epochs, t.patience,
                            t.validation_fraction, t.optimizer, cfg.seed)
    retriever = HyperRetriever(embedder=_embedder(cfg, args.no_cache), model=model, dde_layers=cfg.dde.layers,
                               supervision_hops=t.supervision_hops, max_negatives=t.max_negatives)
    retriever.fit(questions, graph=g, gateway=_gateway(cfg, required=False))
    out = args.out or cfg.paths.checkpoint
    if not out:
        raise ConfigError("no checkpoint output path (--out or paths.checkpoint)")
    retriever.save(out)
    history = args.history or f"{out}.history.csv"
    write_history(retriever.model_.history_, history)
    if hasattr(retriever.embedder, "save"):
        retriever.embedder.save()
    _emit([{"checkpoint": str(out), "history": str(history), "rows": retriever.n_training_rows_,
            "best_epoch": retriever.model_.best_epoch_, "train_loss": retriever.model_.train_loss_}])


def cmd_retrieve(args, cfg):
    g = _graph(cfg, args.graph)
    gateway = _gateway(cfg, required=args.pipeline == "hyper-memory")
    _, _, chains = _retrieve_chains(args, cfg, g, gateway, _embedder(cfg, args.no_cache))
    _emit([c.to_record() for c in chains], args.out)


def cmd_answer(args, cfg):
    g = _graph(cfg, args.graph)
    gateway = _gateway(cfg)
    q, rgraph, chains = _retrieve_chains(args, cfg, g, gateway, _embedder(cfg, args.no_cache))
    bundle = pack(chains, rgraph, _budget(cfg))
    if args.dump_bundle:
        Path(args.dump_bundle).write_text(json.dumps({"question": q.text, "context": bundle.text,
                                                      "bundle": bundle.to_record()}, indent=1))
    answer = gateway.generate_answer(bundle.text, q, args.mode)
    _emit([{"question_id": q.id, "answer": answer, "chains": len(chains), "tokens": bundle.used}], args.out)


def cmd_eval(args, cfg):
    g = _graph(cfg, args.graph)
    questions = load_questions(args.qa)
    embedder = _embedder(cfg, args.no_cache)
    needs_gateway = args.pipeline == "hyper-memory" or args.mode == "open" or args.ranking == "generator"
    gateway = _gateway(cfg, required=needs_gateway)
    retriever = _retriever(cfg, embedder, args.checkpoint) if args.pipeline == "hyper-retriever" else None
    memory = HyperMemory(gateway, cfg.beam.width, cfg.beam.depth) if args.pipeline == "hyper-memory" else None
    out = args.out or cfg.paths.out or "eval_out"
    report = run_eval(questions, g, args.pipeline, args.mode, retriever=retriever, memory=memory, gateway=gateway,
                      budget=_budget(cfg), ranking=args.ranking, binary_ablation=args.binary_ablation, out_dir=out,
                      workers=cfg.backend.eval_workers)
    _emit([report.metrics])


def cmd_bench(args, cfg):
    if args.arity_sweep:
        xs, ys, slope = arity_sweep(range(2, 9), k=args.k, seed=cfg.seed)
        _emit([{"arity": x, "chases_per_out": y} for x, y in zip(xs, ys)] + [{"slope": slope}])
        return
    g = _graph(cfg, args.graph)
    report = run_cost_bench(g, sample_queries(g, args.k, args.queries, cfg.seed))
    out = args.out or "bench.csv"
    report.write_csv(out)
    _emit([{"bench_csv": str(out), **report.summary()}])


def cmd_synth(args, cfg):
    from .synthetic import planted_film_qa

    data = planted_film_qa(args.questions, seed=args.seed if args.seed is not None else cfg.seed, prefix=args.prefix)
    paths = data.write(args.out)
    _emit([{k: str(v) for k, v in paths.items()}])


# -- parser --------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file (default: none, built-in defaults)")
    common.add_argument("--seed", type=int, default=None, help="global seed (default: config seed, 0)")
    common.add_argument("--no-cache", action="store_true", help="disable the embedding cache (default: off)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. search.tau0=0.4 (repeatable)")
    common.add_argument("--mock", help="mock chat script JSON; selects the mock backend (default: config)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging to stderr")

    parser = argparse.ArgumentParser(prog="hyperrag", description="N-ary hypergraph retrieval-augmented generation.",
                                     formatter_class=_Formatter)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = _Formatter

    p = sub.add_parser("ingest", parents=[common], formatter_class=fmt, help="build a graph snapshot from JSONL")
    p.add_argument("--facts", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--chunks", default=None)
    p.add_argument("--out", default=None, help="snapshot path (default: paths.graph)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], formatter_class=fmt, help="train the plausibility model")
    p.add_argument("--graph", default=None)
    p.add_argument("--qa", required=True)
    p.add_argument("--out", default=None, help="checkpoint path (default: paths.checkpoint)")
    p.add_argument("--history", default=None, help="history CSV (default: <out>.history.csv)")
    p.add_argument("--binary-ablation", action="store_true", help="train over the event-reified binary graph")
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (("retrieve", cmd_retrieve, "print retrieved chains as JSONL"),
                              ("answer", cmd_answer, "retrieve, pack context and generate an answer")):
        p = sub.add_parser(name, parents=[common], formatter_class=fmt, help=help_)
        p.add_argument("--graph", default=None)
        p.add_argument("--question", default=None, help="question text")
        p.add_argument("--topic", action="append", default=[], help="topic entity name (repeatable)")
        p.add_argument("--qa", default=None, help="qa.jsonl to take the question from")
        p.add_argument("--qid", default=None, help="question id within --qa")
        p.add_argument("--pipeline", choices=("hyper-retriever", "hyper-memory"), default="hyper-retriever")
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--trace", default=None, help="write the retrieval trace JSONL here")
        p.add_argument("--binary-ablation", action="store_true", help="retrieve over the event-reified graph")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        if name == "answer":
            p.add_argument("--mode", choices=("open", "closed"), default="open", help="answer mode")
            p.add_argument("--dump-bundle", default=None, help="write the exact generation payload here")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", parents=[common], formatter_class=fmt, help="evaluate a pipeline on qa.jsonl")
    p.add_argument("--graph", default=None)
    p.add_argument("--qa", required=True)
    p.add_argument("--pipeline", choices=("hyper-retriever", "hyper-memory"), default="hyper-retriever")
    p.add_argument("--mode", choices=("open", "closed"), default="closed", help="evaluation mode")
    p.add_argument("--ranking", choices=("retrieval", "generator"), default=None,
                   help="closed-mode ranking source (default: retrieval for hyper-retriever, generator otherwise)")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--binary-ablation", action="store_true")
    p.add_argument("--out", default=None, help="report directory (default: paths.out or eval_out)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], formatter_class=fmt, help="native vs binary cost benchmark")
    p.add_argument("--graph", default=None)
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--k", type=int, default=2, help="bound arguments per query")
    p.add_argument("--out", default=None, help="bench CSV path (default: bench.csv)")
    p.add_argument("--arity-sweep", action="store_true", help="sweep arity 2..8 on synthetic graphs instead")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", parents=[common], formatter_class=fmt, help="write a planted-answer demo dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--questions", type=int, default=20)
    p.add_argument("--prefix", default="q")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {"seed": args.seed}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key] = _parse_value(value)
        if args.mock:
            overrides["backend.chat"] = "mock"
            overrides["backend.mock_script"] = args.mock
        cfg = load_config(args.config, overrides)
        args.func(args, cfg)
    except HyperRAGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
