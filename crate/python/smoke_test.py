"""Smoke test for the activelabel_py extension module.

Build and install it first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install --force-reinstall dist/activelabel_py-*.whl
    python python/smoke_test.py
"""

import math
import os
import tempfile

import activelabel_py as al


def check_hash_embed():
    v = al.hash_embed("death penalty", 16)
    nonzero = {i: x for i, x in enumerate(v) if x != 0.0}
    assert nonzero == {6: 1 / math.sqrt(2), 13: -1 / math.sqrt(2)}, nonzero
    assert al.hash_embed("", 8) == [0.0] * 8


def check_training():
    p = al.softmax([1.0, 2.0, 3.0])
    assert abs(sum(p) - 1.0) < 1e-12 and p[2] > p[1] > p[0]
    x = [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]]
    head, losses = al.train(x, [0, 0, 1, 1], ["a", "b"], {"max_epochs": 200})
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert head.predict(x) == [0, 0, 1, 1]
    assert head.labels == ["a", "b"] and len(head.weights) == 2

    s = al.score([2.0, 1.0, 0.5])
    assert s["margin"] == 1.0
    picked = al.select_query_batch({"x": [3.0, 0.0], "y": [0.1, 0.0], "z": [1.0, 0.0]}, 2)
    assert picked == ["y", "z"], picked


def check_session():
    corpus = al.Corpus.synthetic(n_docs=200, seed=1)
    assert len(corpus) == 200 and corpus.dim == 16
    assert corpus.label_set == ["CrimePunishment", "Legality", "Political"]
    session = al.Session(corpus, {"n_seed": 20, "batch_size": 10, "max_rounds": 2, "strategy": "margin"})
    assert session.phase == "awaiting_seed_labels"
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "session.json")
        while session.phase != "done":
            batch = session.next_batch()
            labels = {item["id"]: corpus.gold_label(item["id"]) for item in batch["items"]}
            first = dict(list(labels.items())[:3])
            session.submit_labels(first)
            session.save(path)
            session = al.Session.load(path, corpus)
            rest = {k: v for k, v in labels.items() if k not in first}
            outcome = session.submit_labels(rest)
            assert outcome["completed"]["n_labeled"] == session.n_labeled
            session.check_invariants()
    history = session.history()
    assert [r["n_labeled"] for r in history] == [20, 30, 40]
    assert session.stop_reason == "max_rounds"
    csv = session.export_csv()
    assert csv.splitlines()[0].startswith("round,n_labeled,macro_f1,accuracy,f1_")
    assert len(csv.splitlines()) == 4

    try:
        session.submit_labels({"nope": "Legality"})
    except ValueError:
        pass
    else:
        raise AssertionError("labels after completion must be rejected")


def check_simulation():
    corpus = al.Corpus.synthetic(seed=0)
    reference = al.full_pool_metrics(corpus)
    assert 0.85 <= reference["macro_f1"] <= 0.95, reference["macro_f1"]
    config = {"n_seed": 160, "batch_size": 40, "max_rounds": 4}
    def untimed(h):
        return [{**r, "wall_time_ms": 0} for r in h]

    history = al.run_simulation(corpus, config)
    assert untimed(history) == untimed(al.run_simulation(corpus, config))
    assert history[-1]["n_labeled"] == 320


def check_jsonl():
    text = '{"id":"a","text":"death penalty","gold_label":"x"}\n{"id":"b","text":"appeal","gold_label":"y"}\n'
    corpus = al.Corpus.from_jsonl(text).with_hash_embeddings(16)
    assert corpus.embedding("a") == al.hash_embed("death penalty", 16)
    try:
        al.Corpus.from_jsonl('{"id":"a","text":""}\n{"id":"a","text":""}\n')
    except ValueError as e:
        assert "duplicate id a at line 2" in str(e)
    else:
        raise AssertionError("duplicate ids must be rejected")


if __name__ == "__main__":
    for check in (check_hash_embed, check_training, check_session, check_simulation, check_jsonl):
        check()
        print(f"ok  {check.__name__}")
