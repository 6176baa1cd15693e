"""Synthetic graphs and planted-answer QA sets for tests, benches and demos."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chains import Question
from .store import Entity, Hypergraph, NaryFact

ROLES = ("agent", "patient", "theme", "source", "goal", "time", "place", "instrument")


def random_role_graph(rng: np.random.Generator, n_entities=40, n_facts=100, arity=(2, 6), roles=ROLES,
                      roleless_prob=0.1) -> Hypergraph:
    """Random role-typed hypergraph; some arguments are roleless."""
    ents = [Entity(f"e{i:04d}", f"entity {i}") for i in range(n_entities)]
    facts = []
    for i in range(n_facts):
        n = int(rng.integers(arity[0], arity[1] + 1))
        args = set()
        while len(args) < n:
            e = ents[int(rng.integers(n_entities))].id
            role = None if rng.random() < roleless_prob else roles[int(rng.integers(len(roles)))]
            args.add((role, e))
        args = sorted(args, key=lambda a: (str(a[0]), a[1]))
        order = rng.permutation(len(args))
        facts.append(NaryFact(f"f{i:05d}", f"fact {i}", tuple(args[j] for j in order)))
    return Hypergraph.build(ents, facts)


def fixed_arity_graph(arity: int, n_facts=50, n_entities=None, seed=0) -> Hypergraph:
    """Every fact has exactly ``arity`` role-typed arguments with distinct roles."""
    rng = np.random.default_rng(seed)
    n_entities = n_entities or max(arity * 4, 10)
    ents = [Entity(f"e{i:04d}", f"entity {i}") for i in range(n_entities)]
    facts = []
    for i in range(n_facts):
        members = rng.choice(n_entities, size=arity, replace=False)
        args = tuple((f"r{j}", ents[int(m)].id) for j, m in enumerate(members))
        facts.append(NaryFact(f"f{i:05d}", f"fact {i}", args))
    return Hypergraph.build(ents, facts)


# -- planted-answer film QA --------------------------------------------------

_FIRST = ["Alice", "Bruno", "Carmen", "Dmitri", "Elena", "Farid", "Greta", "Hiro", "Ines", "Jonas",
          "Kira", "Luis", "Mara", "Nils", "Olga", "Pavel", "Quinn", "Rosa", "Sven", "Tara"]
_LAST = ["Marlow", "Okafor", "Lindqvist", "Tanaka", "Moreau", "Alvarez", "Novak", "Brennan",
         "Castillo", "Hale", "Ivers", "Kowalski", "Duarte", "Petrov", "Sato", "Whitfield"]
_ADJ = ["Silent", "Crimson", "Hidden", "Last", "Golden", "Broken", "Distant", "Frozen", "Hollow", "Wild"]
_NOUN = ["Harbor", "Garden", "Letter", "Orchard", "Mirror", "Voyage", "Winter", "Bridge", "Lantern", "Tide"]
_CITY = ["Avenport", "Belmora", "Castrel", "Dunholt", "Estervale", "Fairmoor", "Glenrick", "Havlund",
         "Iverton", "Jorvik", "Kelmsby", "Lorwen", "Marlton", "Norhaven", "Oakridge", "Pellham"]


@dataclass
class PlantedQA:
    graph: Hypergraph
    questions: list[Question]
    script: dict
    paths: dict  # question id -> list of (head, fact, tail)

    def write(self, directory) -> dict:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {k: d / f"{k}.jsonl" for k in ("facts", "entities", "chunks", "qa")}
        paths["facts"].write_text("".join(json.dumps(f.to_record()) + "\n" for f in self.graph.facts.values()))
        paths["entities"].write_text("".join(json.dumps(e.to_record()) + "\n" for e in self.graph.entities.values()))
        paths["chunks"].write_text("".join(json.dumps({"id": k, "text": v}) + "\n" for k, v in self.graph.chunks.items()))
        paths["qa"].write_text("".join(json.dumps(q.to_record()) + "\n" for q in self.questions))
        paths["script"] = d / "mock_script.json"
        paths["script"].write_text(json.dumps(self.script, indent=1, sort_keys=True))
        return paths


def _person(rng, used):
    while True:
        name = f"{_FIRST[rng.integers(len(_FIRST))]} {_LAST[rng.integers(len(_LAST))]}"
        if name not in used:
            used.add(name)
            return name


def _city(rng, used):
    while True:
        name = f"{_CITY[rng.integers(len(_CITY))]} {chr(65 + int(rng.integers(26)))}{int(rng.integers(10))}"
        if name not in used:
            used.add(name)
            return name


def planted_film_qa(n_questions=20, seed=0, two_hop_share=0.5, prefix="q") -> PlantedQA:
    """One disjoint film neighbourhood per question.

    One-hop questions ask for the director (candidates: people), two-hop
    questions ask where the director was born (candidates: cities). Every
    neighbourhood carries distractor facts sharing the same entity types.
    The returned mock script scores path facts/entities high, everything
    else low, says "yes" to sufficiency once the path is complete, and
    answers with the gold name.
    """
    rng = np.random.default_rng(seed)
    used: set[str] = set()
    entities, facts, chunks = [], [], {}
    questions, paths = [], {}
    script = {"topic": {}, "edge": {"*": 0.1}, "entity": {"*": 0.2}, "sufficiency": {"*": "No. The evidence is incomplete."}, "answer": {}}

    def ent(kind, name):
        eid = f"{prefix}{len(questions):03d}_{kind}"
        entities.append(Entity(eid, name, f"{kind} {name}"))
        return eid

    def fact(tag, desc, args):
        fid = f"{prefix}{len(questions):03d}_{tag}"
        cid = f"c_{fid}"
        chunks[cid] = desc + "."
        facts.append(NaryFact(fid, desc, tuple(args), (cid,)))
        return fid

    n_two = int(round(two_hop_share * n_questions))
    kinds = np.array([1] * (n_questions - n_two) + [2] * n_two)
    kinds = kinds[rng.permutation(n_questions)]
    for qi in range(n_questions):
        while True:
            title = f"The {_ADJ[rng.integers(len(_ADJ))]} {_NOUN[rng.integers(len(_NOUN))]} {int(rng.integers(2, 99))}"
            if title not in used:
                used.add(title)
                break
        names = {k: _person(rng, used) for k in ("director", "actor1", "actor2", "spouse")}
        cities = {k: _city(rng, used) for k in ("birth", "premiere", "campus")}
        film = ent("film", title)
        director = ent("director", names["director"])
        actor1 = ent("actor1", names["actor1"])
        actor2 = ent("actor2", names["actor2"])
        spouse = ent("spouse", names["spouse"])
        studio = ent("studio", f"{_NOUN[rng.integers(len(_NOUN))]} Pictures Studio")
        year = ent("year", str(int(rng.integers(1950, 2024))))
        birth = ent("birthcity", cities["birth"])
        premiere = ent("premierecity", cities["premiere"])
        campus = ent("campuscity", cities["campus"])
        univ = ent("university", f"University of {cities['campus']}")

        e = {x.id: x.name for x in entities[-11:]}
        f_dir = fact("directed", f"{e[director]} directed the film {title} for {e[studio]}",
                     [("director", director), ("film", film), ("studio", studio)])
        fact("released", f"{title} was released in {e[year]} with a premiere in {e[premiere]}",
             [("film", film), ("year", year), ("place", premiere)])
        fact("starred", f"{e[actor1]} and {e[actor2]} starred in the film {title}",
             [("actor", actor1), ("actor", actor2), ("film", film)])
        f_born = fact("born", f"{e[director]} was born in the city of {e[birth]}",
                      [("person", director), ("place", birth)])
        fact("studied", f"{e[director]} studied at {e[univ]} in {e[campus]}",
             [("student", director), ("school", univ), ("place", campus)])
        fact("married", f"{e[director]} is married to {e[spouse]}",
             [("spouse", director), ("spouse", spouse)])

        qid = f"{prefix}{qi:03d}"
        if kinds[qi] == 1:
            text = f"Who directed the film {title}?"
            gold, path = e[director], [(film, f_dir, director)]
            cands = [director, actor1, actor2, spouse]
        else:
            text = f"In which city was the director of the film {title} born?"
            gold, path = e[birth], [(film, f_dir, director), (director, f_born, birth)]
            cands = [birth, premiere, campus]
        cands = sorted(cands)
        questions.append(Question(qid, text, [gold], [film], cands))
        paths[qid] = path
        script["topic"][qid] = [title]
        for h, f, t in path:
            script["edge"][f"{qid}:{h}:{f}"] = 0.9
            script["entity"][f"{qid}:{f}:{t}"] = 1.0
        script["sufficiency"][f"{qid}:{len(path)}"] = "Yes. The retrieved chain names the answer."
        script["answer"][qid] = gold

    return PlantedQA(Hypergraph.build(entities, facts, chunks), questions, script, paths)


# -- separable planted-path toy ------------------------------------------------

_ON_PATH = "was founded by"
_OFF_PATH = ("once visited", "sits near")


def planted_path_toy(n_questions=40, seed=0, prefix="p") -> tuple[Hypergraph, list[Question]]:
    """Tiny typed chains that a linear model separates.

    Each question owns 8 entities: a topic, a 1- or 2-hop chain of
    "Company" entities joined by founding facts, and "Landmark" entities
    hanging off every chain head through 3 distractor facts.
    """
    rng = np.random.default_rng(seed)
    letters = list("abcdefghijklmnop")
    ents, facts, questions = [], [], []
    for qi in range(n_questions):
        p = f"{prefix}{qi:03d}"
        hops = int(rng.integers(1, 3))
        ids = [f"{p}_n{j}" for j in range(8)]
        names = [f"{'Company' if 1 <= j <= hops else 'Landmark'} {''.join(rng.choice(letters, 5))}" for j in range(8)]
        ents += [Entity(i, n) for i, n in zip(ids, names)]
        path = ids[: hops + 1]
        for j, (h, t) in enumerate(zip(path, path[1:])):
            facts.append(NaryFact(f"{p}_on{j}", _ON_PATH, (("source", h), ("target", t))))
        k = 0
        for h in path[:-1]:
            for _ in range(3):
                t = ids[int(rng.integers(hops + 1, 8))]
                desc = _OFF_PATH[int(rng.integers(len(_OFF_PATH)))]
                facts.append(NaryFact(f"{p}_off{k}", desc, (("source", h), ("target", t))))
                k += 1
        text = f"Which company was founded along the chain starting at {names[0]}?"
        questions.append(Question(p, text, [names[hops]], [ids[0]]))
    return Hypergraph.build(ents, facts), questions
