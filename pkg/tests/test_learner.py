from __future__ import annotations

import numpy as np
import pytest

from rhetsum.embedding import Impact, TrainConfig, core_vectors_by_text, embed_texts, train
from rhetsum.grammar import ContextSignature, Grammar, PrecedenceRecord, ProductionRule
from rhetsum.learner import (
    BudgetError,
    LabeledText,
    LearnerConfig,
    LearnerState,
    bootstrap,
    pick_near,
    run,
    train_far,
)
from rhetsum.teacher import ScriptedTeacher, default_oracle, generate

from conftest import make_corpus, make_text


def fake_impacts(vectors: dict[str, list[float]]) -> list[Impact]:
    return [
        Impact(text_id=tid, v=np.asarray(vec, dtype=float), n_cores=1)
        for tid, vec in vectors.items()
    ]


def teacher_setup(n_texts=60, seed=0, amb=0.25):
    corpus, truth = generate(default_oracle(ambiguous_weight=amb), n_texts,
                             seed=seed)
    table = train(corpus, TrainConfig(dim=6, epochs=4, seed=0, batch_size=64))
    impacts = embed_texts(corpus, table)
    cores = core_vectors_by_text(corpus, table)
    return corpus, truth, impacts, cores


# -- bootstrap -----------------------------------------------------------------


def test_bootstrap_counts_and_budget():
    corpus, truth, impacts, cores = teacher_setup(40)
    cfg = LearnerConfig(epsilon=1.0, k=5, budget=100, q=2, seed=0)
    grammar, state = bootstrap(corpus, impacts, cfg, ScriptedTeacher(truth),
                               cores_by_text=cores)
    assert state.bootstrap_size == state.budget_spent
    assert len(state.labeled) == state.bootstrap_size
    assert all(
        entry.source == "annotated" for entry in state.labeled.values()
    )
    assert grammar.stats()["production_rules"] > 0
    state.check_partition()


def test_bootstrap_fixed_q_arithmetic():
    # ten separated singleton groups of three collapse to 10 cubes of 3
    vectors = {}
    for cube in range(10):
        for member in range(3):
            vectors[f"t{cube}{member}"] = [cube * 10.0 + member * 0.1] * 4
    impacts = fake_impacts(vectors)
    corpus = make_corpus(
        *[make_text(tid, [("x", "a", "o", "s")]) for tid in vectors]
    )
    truth_events = {}

    def annotator(state):
        from rhetsum.parsing import AnnotationEvent

        return AnnotationEvent(kind="shift", author="teacher")

    cfg = LearnerConfig(epsilon=1.0, k=5, budget=100, q=3, seed=0,
                        divisions=(10, 1, 1, 1))
    grammar, state = bootstrap(corpus, impacts, cfg, annotator)
    assert state.bootstrap_size == 30


def test_bootstrap_percentage_mode():
    vectors = {f"a{i}": [0.0 + i * 0.01] * 4 for i in range(7)}
    vectors.update({f"b{i}": [100.0 + i * 0.01] * 4 for i in range(2)})
    impacts = fake_impacts(vectors)
    corpus = make_corpus(
        *[make_text(tid, [("x", "a", "o", "s")]) for tid in vectors]
    )

    def annotator(state):
        from rhetsum.parsing import AnnotationEvent

        return AnnotationEvent(kind="shift", author="teacher")

    cfg = LearnerConfig(epsilon=1.0, k=5, budget=100, q=3, seed=0,
                        selection_mode="percentage", divisions=(2, 1, 1, 1))
    grammar, state = bootstrap(corpus, impacts, cfg, annotator)
    assert state.bootstrap_size == 3 + 1


def test_bootstrap_budget_guard_before_annotation():
    corpus, truth, impacts, cores = teacher_setup(30)
    calls = []

    def counting(state):
        calls.append(state.text.id)
        return ScriptedTeacher(truth)(state)

    cfg = LearnerConfig(epsilon=1.0, k=5, budget=1, q=3, seed=0)
    with pytest.raises(BudgetError):
        bootstrap(corpus, impacts, cfg, counting, cores_by_text=cores)
    assert calls == []


def test_report_shape():
    corpus, truth, impacts, cores = teacher_setup(30)
    cfg = LearnerConfig(epsilon=1e9, k=5, budget=40, q=2, seed=0)
    grammar, state, report = run(corpus, impacts, cfg, ScriptedTeacher(truth),
                                 cores_by_text=cores)
    labels = [row["label"] for row in report.rows]
    assert labels[0] == "Initial"
    assert "The number of all labeled texts" in labels
    assert "Production rules" in labels
    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == "label,value"


# -- pick_near ------------------------------------------------------------------


def scripted_state(grammar: Grammar):
    """Two labeled texts with known fragments, three unlabeled impacts."""
    reason = ContextSignature(None, ("x", "y"), "$")
    r1 = grammar.merge_rule(
        ProductionRule(parent="P1", children=("x", "y"), roles=("N", "S"),
                       rhet_rel="r", reason=reason)
    )
    r2 = grammar.merge_rule(
        ProductionRule(parent="P2", children=("y", "z"), roles=("N", "N"),
                       rhet_rel="r", reason=ContextSignature(None, ("y", "z"), "$"))
    )
    grammar.merge_precedence(PrecedenceRecord(("x", "y", "$"), "reduce"))
    labeled = {
        "L1": LabeledText(
            text_id="L1", source="annotated", rule_keys=(r1.key(),),
            precedence_uses=(((("x", "y", "$")), "reduce"),),
        ),
        "L2": LabeledText(
            text_id="L2", source="annotated", rule_keys=(r2.key(),),
        ),
    }
    impacts = {
        "L1": Impact("L1", np.array([0.0, 0.0, 0.0, 0.0]), 1),
        "L2": Impact("L2", np.array([10.0, 0.0, 0.0, 0.0]), 1),
        "U1": Impact("U1", np.array([0.5, 0.0, 0.0, 0.0]), 1),
        "U2": Impact("U2", np.array([10.4, 0.0, 0.0, 0.0]), 1),
        "U3": Impact("U3", np.array([50.0, 0.0, 0.0, 0.0]), 1),
    }
    return LearnerState(
        labeled=labeled,
        unlabeled={"U1", "U2", "U3"},
        impacts=impacts,
        budget_limit=10,
        budget_spent=2,
        bootstrap_size=2,
    ), (r1, r2)


def u_corpus():
    return make_corpus(
        make_text("U1", [("p", "q", "r", "x"), ("p", "q", "r", "y")]),
        make_text("U2", [("p", "q", "r", "x"), ("p", "q", "r", "y")]),
        make_text("U3", [("p", "q", "r", "x"), ("p", "q", "r", "y")]),
    )


def test_pick_near_empty_when_epsilon_small():
    grammar = Grammar()
    state, _ = scripted_state(grammar)
    before = grammar.dumps()
    pairs = pick_near(state, grammar, u_corpus(), epsilon=0.1)
    assert pairs == []
    assert state.unlabeled == {"U1", "U2", "U3"}
    assert grammar.dumps() == before


def test_pick_near_moves_and_enhances():
    grammar = Grammar()
    state, (r1, r2) = scripted_state(grammar)
    pairs = pick_near(state, grammar, u_corpus(), epsilon=1.0)
    assert sorted(pairs) == [("U1", "L1"), ("U2", "L2")]
    # witness fragments enhanced once per pair
    assert r1.count == 2
    assert r2.count == 2
    assert grammar.precedence[("x", "y", "$")].n_reduce == 2
    # transferred texts joined the labeled set without budget cost
    assert state.budget_spent == 2
    assert state.unlabeled == {"U3"}
    assert state.labeled["U1"].source == "transfer"
    assert state.labeled["U1"].rule_keys  # parsed successfully


def test_pick_near_preserves_rule_type_key_set():
    grammar = Grammar()
    state, _ = scripted_state(grammar)
    keys_before = set(grammar.rules)
    pick_near(state, grammar, u_corpus(), epsilon=1.0)
    assert set(grammar.rules) == keys_before


def test_pick_near_weak_label_on_parse_failure():
    grammar = Grammar()
    state, _ = scripted_state(grammar)
    corpus = make_corpus(
        make_text("U1", [("p", "q", "r", "zzz")] * 3),
        make_text("U2", [("p", "q", "r", "x"), ("p", "q", "r", "y")]),
        make_text("U3", [("p", "q", "r", "x"), ("p", "q", "r", "y")]),
    )
    pick_near(state, grammar, corpus, epsilon=1.0)
    assert state.labeled["U1"].source == "weak"
    assert state.labeled["U1"].rule_keys == ()


# -- train_far ---------------------------------------------------------------


def test_train_far_zero_when_no_transfer():
    corpus, truth, impacts, cores = teacher_setup(30)
    cfg = LearnerConfig(epsilon=1e-6, k=5, budget=40, q=2, seed=0)
    grammar, state = bootstrap(corpus, impacts, cfg, ScriptedTeacher(truth),
                               cores_by_text=cores)
    state.last_picked = 0
    trained = train_far(state, grammar, corpus, cfg.k, ScriptedTeacher(truth))
    assert trained == 0


def test_train_far_selects_farthest_first():
    grammar = Grammar()
    state, _ = scripted_state(grammar)
    state.impacts["U1"] = Impact("U1", np.array([1.0, 0.0, 0.0, 0.0]), 1)
    state.impacts["U2"] = Impact("U2", np.array([5.0, 0.0, 0.0, 0.0]), 1)
    state.impacts["U3"] = Impact("U3", np.array([9.0, 0.0, 0.0, 0.0]), 1)
    # distances to {L1 at 0, L2 at 10}: U1 -> 1, U2 -> 5, U3 -> 1
    state.last_picked = 2
    annotated = []

    def annotator(ps):
        annotated.append(ps.text.id)
        from rhetsum.parsing import AnnotationEvent

        if ps.buffer_remaining:
            return AnnotationEvent(kind="shift", author="teacher")
        return AnnotationEvent(kind="reduce", parent="P1", roles=("N", "S"),
                               rhet_rel="r", author="teacher")

    trained = train_far(state, grammar, u_corpus(), k=2, annotator=annotator)
    assert trained == 2
    assert sorted(set(annotated)) == ["U1", "U2"]  # 5 and 1 beat the near U3?
    # order check: farthest (U2 at 5) first, then tie between U1 and U3 at 1
    assert annotated[0] == "U2"


def test_train_far_budget_exhausts_mid_batch():
    grammar = Grammar()
    state, _ = scripted_state(grammar)
    state.budget_limit = 3  # spent already 2, room for exactly 1
    state.last_picked = 5

    def annotator(ps):
        from rhetsum.parsing import AnnotationEvent

        if ps.buffer_remaining:
            return AnnotationEvent(kind="shift", author="teacher")
        return AnnotationEvent(kind="reduce", parent="P1", roles=("N", "S"),
                               rhet_rel="r", author="teacher")

    trained = train_far(state, grammar, u_corpus(), k=5, annotator=annotator)
    assert trained == 1
    assert state.budget_spent == 3


def test_train_far_novel_rule_extends_key_set():
    grammar = Grammar()
    state, _ = scripted_state(grammar)
    state.last_picked = 1
    keys_before = set(grammar.rules)

    def annotator(ps):
        from rhetsum.parsing import AnnotationEvent

        if ps.buffer_remaining:
            return AnnotationEvent(kind="shift", author="teacher")
        return AnnotationEvent(kind="reduce", parent="NOVEL", roles=("N", "N"),
                               rhet_rel="new", author="teacher")

    train_far(state, grammar, u_corpus(), k=1, annotator=annotator)
    assert len(set(grammar.rules) - keys_before) == 1


# -- run ------------------------------------------------------------------------


def test_run_budget_exact_bootstrap_only():
    corpus, truth, impacts, cores = teacher_setup(30)
    cfg = LearnerConfig(epsilon=5.0, k=5, budget=100, q=2, seed=0)
    grammar, state = bootstrap(corpus, impacts, cfg, ScriptedTeacher(truth),
                               cores_by_text=cores)
    exact_budget = state.bootstrap_size
    cfg2 = LearnerConfig(epsilon=5.0, k=5, budget=exact_budget, q=2, seed=0)
    grammar, state, report = run(corpus, impacts, cfg2, ScriptedTeacher(truth),
                                 cores_by_text=cores)
    assert state.budget_spent == exact_budget
    assert state.trained_total == 0


def test_run_epsilon_infinite_labels_everything_round_one():
    corpus, truth, impacts, cores = teacher_setup(30)
    cfg = LearnerConfig(epsilon=float("inf"), k=5, budget=40, q=2, seed=0,
                        divisions=(1, 1, 1, 1))
    grammar, state, report = run(corpus, impacts, cfg, ScriptedTeacher(truth),
                                 cores_by_text=cores)
    assert len(state.rounds) == 1
    assert state.rounds[0].picked_near == 30 - state.bootstrap_size
    assert state.unlabeled == set()


def test_run_monotone_labels_and_budget_identity():
    corpus, truth, impacts, cores = teacher_setup(200, seed=9)
    cfg = LearnerConfig(epsilon=12.0, k=10, budget=60, q=3, seed=0,
                        divisions=(1, 1, 1, 1))
    grammar, state, report = run(corpus, impacts, cfg, ScriptedTeacher(truth),
                                 cores_by_text=cores)
    totals = [r.labeled_total for r in state.rounds]
    assert totals == sorted(totals)
    assert state.budget_spent == state.bootstrap_size + state.trained_total
    transfer = [t for t in state.labeled.values() if t.source != "annotated"]
    annotated = [t for t in state.labeled.values() if t.source == "annotated"]
    assert len(annotated) == state.budget_spent
    assert state.budget_spent <= cfg.budget


def test_run_deterministic():
    corpus, truth, impacts, cores = teacher_setup(80, seed=3)
    cfg = LearnerConfig(epsilon=10.0, k=8, budget=30, q=3, seed=1,
                        divisions=(1, 1, 1, 1))
    g1, s1, _ = run(corpus, impacts, cfg, ScriptedTeacher(truth),
                    cores_by_text=cores)
    g2, s2, _ = run(corpus, impacts, cfg, ScriptedTeacher(truth),
                    cores_by_text=cores)
    assert g1.dumps() == g2.dumps()
    assert s1.s1_ids() == s2.s1_ids()
    assert s1.budget_spent == s2.budget_spent


def test_state_checkpoint_roundtrip(tmp_path):
    corpus, truth, impacts, cores = teacher_setup(40)
    cfg = LearnerConfig(epsilon=10.0, k=5, budget=25, q=3, seed=0,
                        divisions=(1, 1, 1, 1))
    grammar, state, _ = run(corpus, impacts, cfg, ScriptedTeacher(truth),
                            cores_by_text=cores)
    path = tmp_path / "state.json"
    state.save(path)
    loaded = LearnerState.load(path, state.impacts)
    assert loaded.s1_ids() == state.s1_ids()
    assert loaded.budget_spent == state.budget_spent
    assert loaded.labeled.keys() == state.labeled.keys()
    for tid in state.labeled:
        assert loaded.labeled[tid].rule_keys == state.labeled[tid].rule_keys


def test_resume_continues_from_checkpoint(tmp_path):
    from rhetsum.learner import resume

    corpus, truth, impacts, cores = teacher_setup(120, seed=9)
    small = LearnerConfig(epsilon=15.0, k=4, budget=8, q=4, seed=0,
                          divisions=(1, 1, 1, 1))
    grammar, state, _ = run(corpus, impacts, small, ScriptedTeacher(truth),
                            cores_by_text=cores)
    assert state.budget_spent == 8
    checkpoint = tmp_path / "ck.json"
    grammar_path = tmp_path / "g.json"
    state.save(checkpoint)
    grammar.save(grammar_path)

    from rhetsum.grammar import Grammar as G

    loaded_state = LearnerState.load(checkpoint, state.impacts)
    loaded_grammar = G.load(grammar_path)
    bigger = LearnerConfig(epsilon=15.0, k=4, budget=16, q=4, seed=0,
                           divisions=(1, 1, 1, 1))
    grammar2, state2, report = resume(
        corpus, bigger, ScriptedTeacher(truth), loaded_grammar, loaded_state
    )
    assert state2.budget_spent > 8
    assert state2.budget_spent <= 16
    assert state2.budget_spent == state2.bootstrap_size + state2.trained_total
    labels = [row["label"] for row in report.rows]
    assert labels[0] == "Initial"
