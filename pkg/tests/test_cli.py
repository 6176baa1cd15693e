import json

import pytest

from hyperrag.cli import build_parser, main
from hyperrag.synthetic import planted_film_qa


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture
def toy_files(tmp_path):
    ents = [{"id": i, "name": n, "description": None, "chunk_ids": []}
            for i, n in [("a", "Ada"), ("b", "Bob"), ("c", "Cy"), ("d", "Dee")]]
    facts = [
        {"id": "f1", "description": "Ada hired Bob at the lab", "args": [{"role": "boss", "entity": "a"},
                                                                       {"role": "hire", "entity": "b"},
                                                                       {"role": "site", "entity": "c"}]},
        {"id": "f2", "description": "Bob met Dee", "args": [{"entity": "b"}, {"entity": "d"}]},
        {"id": "f3", "description": "Cy hosted Dee", "args": [{"entity": "c"}, {"entity": "d"}]},
    ]
    (tmp_path / "e.jsonl").write_text("".join(json.dumps(x) + "\n" for x in ents))
    (tmp_path / "f.jsonl").write_text("".join(json.dumps(x) + "\n" for x in facts))
    return tmp_path


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    d = tmp_path_factory.mktemp("planted")
    train = planted_film_qa(20, seed=1, prefix="t").write(d / "train")
    test = planted_film_qa(8, seed=2).write(d / "test")
    return d, train, test


def test_help_lists_defaults(capsys):
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["eval", "--help"])
    out = capsys.readouterr().out
    for flag in ("--config", "--seed", "--no-cache", "--binary-ablation", "--mock", "--out", "--pipeline"):
        assert flag in out
    assert "(default: closed)" in out


def test_ingest_then_retrieve(toy_files, capsys, planted):
    d, train, _ = planted
    code, out, _ = _run(capsys, "ingest", "--facts", toy_files / "f.jsonl", "--entities", toy_files / "e.jsonl",
                        "--out", toy_files / "g.json")
    assert code == 0 and _jsonl(out)[0]["facts"] == 3 and (toy_files / "g.json").exists()

    ck = toy_files / "ck.json"
    assert _run(capsys, "train", "--graph", _ingest(capsys, train, toy_files), "--qa", train["qa"], "--out", ck)[0] == 0
    code, out, _ = _run(capsys, "retrieve", "--graph", toy_files / "g.json", "--question", "Who did Ada hire?",
                        "--topic", "ada", "--checkpoint", ck, "--trace", toy_files / "trace.jsonl")
    chains = _jsonl(out)
    assert code == 0 and chains and {"head", "fact", "tail", "score", "hop", "tau"} <= set(chains[0])
    assert chains[0]["head"] == "a"
    assert _jsonl((toy_files / "trace.jsonl").read_text())


def _ingest(capsys, paths, where):
    out = where / "train_graph.json"
    assert _run(capsys, "ingest", "--facts", paths["facts"], "--entities", paths["entities"], "--chunks",
                paths["chunks"], "--out", out)[0] == 0
    return out


def test_train_is_reproducible(planted, capsys, tmp_path):
    d, train, _ = planted
    g = _ingest(capsys, train, tmp_path)
    for name in ("a.json", "b.json"):
        code, out, _ = _run(capsys, "train", "--graph", g, "--qa", train["qa"], "--out", tmp_path / name, "--seed", 7)
        assert code == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    history = (tmp_path / "a.json.history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,val_loss" and len(history) > 1


def test_eval_hyper_memory_with_mock(planted, capsys, tmp_path):
    _, _, test = planted
    g = _ingest(capsys, test, tmp_path)
    code, out, _ = _run(capsys, "eval", "--graph", g, "--qa", test["qa"], "--pipeline", "hyper-memory",
                        "--mock", test["script"], "--out", tmp_path / "ev")
    assert code == 0
    metrics = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert metrics["hits@1"] == 1.0 and _jsonl(out)[0]["hits@1"] == 1.0


def test_answer_and_bundle_dump(planted, capsys, tmp_path):
    _, _, test = planted
    g = _ingest(capsys, test, tmp_path)
    code, out, _ = _run(capsys, "answer", "--graph", g, "--qa", test["qa"], "--qid", "q000", "--pipeline",
                        "hyper-memory", "--mock", test["script"], "--dump-bundle", tmp_path / "b.json")
    gold = json.loads(test["qa"].read_text().splitlines()[0])["answers"][0]
    assert code == 0 and _jsonl(out)[0]["answer"] == gold
    dump = json.loads((tmp_path / "b.json").read_text())
    assert dump["context"].startswith("FACT") and dump["bundle"]["total_tokens"] == 4000


def test_bench_and_synth(planted, capsys, tmp_path):
    _, _, test = planted
    g = _ingest(capsys, test, tmp_path)
    code, out, _ = _run(capsys, "bench", "--graph", g, "--queries", 30, "--out", tmp_path / "bench.csv")
    assert code == 0 and (tmp_path / "bench.csv").read_text().startswith("query_id,path,")
    code, out, _ = _run(capsys, "bench", "--arity-sweep")
    assert _jsonl(out)[-1]["slope"] == pytest.approx(1.0)
    code, out, _ = _run(capsys, "synth", "--out", tmp_path / "s", "--questions", 3)
    assert code == 0 and (tmp_path / "s" / "qa.jsonl").read_text().count("\n") == 3


def test_exit_codes(planted, capsys, tmp_path, toy_files):
    _, _, test = planted
    code, _, err = _run(capsys, "eval", "--qa", test["qa"])
    assert code == 2 and "graph" in err
    code, _, _ = _run(capsys, "eval", "--qa", test["qa"], "--set", "search.bogus=1")
    assert code == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "f1", "description": "x", "args": [{"entity": "zz"}, {"entity": "a"}]}\n')
    code, _, err = _run(capsys, "ingest", "--facts", bad, "--entities", toy_files / "e.jsonl", "--out", tmp_path / "g")
    assert code == 3 and "zz" in err
    g = _ingest(capsys, test, tmp_path)
    (tmp_path / "empty_script.json").write_text("{}")
    code, _, err = _run(capsys, "answer", "--graph", g, "--qa", test["qa"], "--qid", "q000", "--pipeline",
                        "hyper-memory", "--mock", tmp_path / "empty_script.json")
    assert code == 4
