import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reasonforge.corpus import NormalizedAnswer
from reasonforge.evaluation import (
    DEFAULT_EVAL_TEMPERATURE,
    EVAL_PROTOCOLS,
    PROTOCOL_COT,
    PROTOCOL_COT_3SHOT,
    PROTOCOL_SAMPLES,
    PROTOCOL_SELF_CONSISTENCY,
    EvalConfig,
    evaluate,
    majority_answer,
    write_eval_outcome,
)
from reasonforge.prompts import exemplar_set
from reasonforge.transport import (
    FixtureMissingError,
    ReplayTransport,
    RetryableTransportError,
)

from ._fakes import GT_BASE, FailingTransport, ScriptedTransport, make_corpus


def _config(protocol=PROTOCOL_COT, **overrides) -> EvalConfig:
    defaults = dict(protocol=protocol, model="fake-model", run_seed=7)
    if protocol == PROTOCOL_COT_3SHOT:
        defaults["exemplars"] = exemplar_set("gsm8k")
    defaults.update(overrides)
    return EvalConfig(**defaults)


class TestEvalConfig:
    def test_samples_per_protocol(self):
        assert PROTOCOL_SAMPLES == {"cot": 1, "cot_3shot": 1, "self_consistency": 15}
        assert _config(PROTOCOL_COT).num_samples == 1
        assert _config(PROTOCOL_COT_3SHOT).num_samples == 1
        assert _config(PROTOCOL_SELF_CONSISTENCY).num_samples == 15

    def test_default_temperature(self):
        assert DEFAULT_EVAL_TEMPERATURE == 0.8
        assert _config().temperature == 0.8

    def test_unknown_protocol_rejected(self):
        with pytest.raises(ValueError, match="protocol"):
            EvalConfig(protocol="beam", model="m")

    def test_3shot_requires_enough_exemplars(self):
        with pytest.raises(ValueError, match="3"):
            EvalConfig(protocol=PROTOCOL_COT_3SHOT, model="m")
        with pytest.raises(ValueError, match="3"):
            EvalConfig(
                protocol=PROTOCOL_COT_3SHOT,
                model="m",
                exemplars=exemplar_set("gsm8k").take(2),
            )
        EvalConfig(protocol=PROTOCOL_COT_3SHOT, model="m", exemplars=exemplar_set("reclor"))

    def test_protocol_names(self):
        assert set(EVAL_PROTOCOLS) == {"cot", "cot_3shot", "self_consistency"}


def _n(canonical, kind="numeric"):
    return NormalizedAnswer(kind, canonical)


class TestMajorityAnswer:
    def test_empty_returns_none(self):
        assert majority_answer([]) is None

    def test_all_none_returns_none(self):
        assert majority_answer([None, None]) is None

    def test_modal_wins(self):
        assert majority_answer([_n("5"), _n("5"), _n("3")]) == _n("5")

    def test_tie_breaks_to_first_occurrence(self):
        assert majority_answer([_n("1"), _n("2")]) == _n("1")
        assert majority_answer([_n("2"), _n("1"), _n("1"), _n("2")]) == _n("2")

    def test_none_entries_do_not_vote(self):
        assert majority_answer([None, _n("4"), None]) == _n("4")
        assert majority_answer([None, _n("9"), _n("4"), _n("4")]) == _n("4")

    def test_votes_keyed_by_kind_and_canonical(self):
        answers = [_n("1", "numeric"), _n("1", "freeform"), _n("1", "freeform")]
        assert majority_answer(answers) == _n("1", "freeform")

    @given(st.text(min_size=1, max_size=6), st.integers(1, 15))
    def test_unanimous_vote_returns_that_answer(self, canonical, n):
        assert majority_answer([_n(canonical, "freeform")] * n) == _n(canonical, "freeform")

    @given(
        st.lists(
            st.one_of(st.none(), st.sampled_from([_n("1"), _n("2"), _n("3")])),
            max_size=12,
        )
    )
    def test_winner_has_maximal_count(self, answers):
        winner = majority_answer(answers)
        voted = [a for a in answers if a is not None]
        if not voted:
            assert winner is None
        else:
            counts = {a.canonical: voted.count(a) for a in voted}
            assert counts[winner.canonical] == max(counts.values())


class TestEvaluate:
    def test_cot_accuracy_hand_counted(self):
        corpus = make_corpus(10)
        outcome = evaluate(corpus, _config(PROTOCOL_COT), ScriptedTransport(), corpus_name="f10")
        assert outcome.report["total"] == 10
        assert outcome.report["correct"] == 5
        assert outcome.accuracy == 0.5
        for i, item in enumerate(outcome.items):
            assert item.instruction_id == f"q{i}"
            assert item.correct == (i % 2 == 0)
            assert item.expected == _n(str(GT_BASE + i))
            assert item.failed is False

    def test_self_consistency_majority_decides(self):
        corpus = make_corpus(10)
        transport = ScriptedTransport()
        outcome = evaluate(corpus, _config(PROTOCOL_SELF_CONSISTENCY), transport)
        # even ids get 8/15 correct samples, odd ids 7/15
        assert outcome.accuracy == 0.5
        assert all(call.num_samples == 15 for call in transport.calls)
        for i, item in enumerate(outcome.items):
            expected = _n(str(GT_BASE + i)) if i % 2 == 0 else _n(str(600 + i))
            assert item.predicted == expected

    def test_3shot_uses_first_three_exemplars(self):
        corpus = make_corpus(3)
        transport = ScriptedTransport()
        outcome = evaluate(corpus, _config(PROTOCOL_COT_3SHOT), transport)
        assert outcome.accuracy == pytest.approx(2 / 3)
        exemplars = exemplar_set("gsm8k").exemplars[:3]
        for call in transport.calls:
            assert call.prompt.stage == "fewshot_cot"
            assert call.prompt.text.count("Q: ") == 4
            for question, rationale in exemplars:
                assert question in call.prompt.text
                assert rationale in call.prompt.text

    def test_cot_prompt_is_the_zero_shot_template(self):
        corpus = make_corpus(1)
        transport = ScriptedTransport()
        evaluate(corpus, _config(PROTOCOL_COT), transport)
        call = transport.calls[0]
        assert call.prompt.stage == "cot_eval"
        assert call.prompt.text == (
            "Solve the following problem step-by-step. "
            f"Question: {corpus[0].question} Answer:"
        )

    def test_requests_carry_eval_settings_and_stable_seeds(self):
        corpus = make_corpus(4)
        transport = ScriptedTransport()
        evaluate(corpus, _config(PROTOCOL_COT), transport)
        seeds = [call.seed for call in transport.calls]
        assert len(set(seeds)) == 4
        assert all(call.temperature == 0.8 for call in transport.calls)
        transport2 = ScriptedTransport()
        evaluate(corpus, _config(PROTOCOL_COT), transport2)
        assert [c.seed for c in transport2.calls] == seeds

    def test_protocols_use_distinct_seeds(self):
        corpus = make_corpus(1)
        t1, t2 = ScriptedTransport(), ScriptedTransport()
        evaluate(corpus, _config(PROTOCOL_COT), t1)
        evaluate(corpus, _config(PROTOCOL_SELF_CONSISTENCY), t2)
        assert t1.calls[0].seed != t2.calls[0].seed

    def test_per_item_failures_counted_not_fatal(self):
        corpus = make_corpus(10)
        transport = FailingTransport(
            ScriptedTransport(), RetryableTransportError("backend gone"), match="[q4]"
        )
        outcome = evaluate(corpus, _config(PROTOCOL_COT), transport)
        assert outcome.report["total"] == 10
        assert outcome.report["failed_items"] == 1
        assert outcome.report["failures"] == [
            {"instruction_id": "q4", "error": "backend gone"}
        ]
        failed = outcome.items[4]
        assert failed.failed is True
        assert failed.correct is False
        assert failed.predicted is None
        # q4 would have been correct, so accuracy drops below the clean 0.5
        assert outcome.report["correct"] == 4

    def test_fixture_missing_propagates(self, tmp_path):
        with pytest.raises(FixtureMissingError):
            evaluate(make_corpus(2), _config(PROTOCOL_COT), ReplayTransport(tmp_path))

    def test_unextractable_prediction_is_incorrect(self):
        class BlankTransport:
            def complete(self, request):
                from reasonforge.transport import CompletionResponse

                return CompletionResponse(texts=("nothing of note",) * request.num_samples)

        outcome = evaluate(make_corpus(2), _config(PROTOCOL_COT), BlankTransport())
        assert outcome.accuracy == 0.0
        assert all(item.predicted is None for item in outcome.items)
        assert outcome.report["failed_items"] == 0

    def test_report_identity_fields(self):
        from reasonforge import __version__
        from reasonforge.pipeline import corpus_digest

        corpus = make_corpus(10)
        outcome = evaluate(corpus, _config(PROTOCOL_COT), ScriptedTransport(), corpus_name="f10")
        report = outcome.report
        assert report["protocol"] == "cot"
        assert report["model"] == "fake-model"
        assert report["corpus_name"] == "f10"
        assert report["corpus_digest"] == corpus_digest(corpus)
        assert report["tool_version"] == __version__
        assert report["num_samples"] == 1
        assert report["run_seed"] == 7
        assert len(report["run_id"]) == 12

    def test_deterministic(self):
        corpus = make_corpus(10)
        a = evaluate(corpus, _config(PROTOCOL_SELF_CONSISTENCY), ScriptedTransport())
        b = evaluate(corpus, _config(PROTOCOL_SELF_CONSISTENCY), ScriptedTransport())
        assert a.report == b.report
        assert a.items == b.items
        assert a.generations == b.generations

    def test_empty_corpus(self):
        outcome = evaluate([], _config(PROTOCOL_COT), ScriptedTransport())
        assert outcome.accuracy == 0.0
        assert outcome.report["total"] == 0


class TestWriteEvalOutcome:
    def test_writes_report_and_generations(self, tmp_path):
        corpus = make_corpus(4)
        outcome = evaluate(corpus, _config(PROTOCOL_COT), ScriptedTransport())
        out = write_eval_outcome(tmp_path / "eval", outcome)
        report = json.loads((out / "report.json").read_text())
        assert report == outcome.report
        lines = (out / "generations.jsonl").read_text().splitlines()
        assert len(lines) == 4
        first = json.loads(lines[0])
        assert first["instruction_id"] == "q0"
        assert first["correct"] is True
        assert first["texts"]

    def test_rewrite_is_byte_identical(self, tmp_path):
        corpus = make_corpus(3)
        outcome = evaluate(corpus, _config(PROTOCOL_COT), ScriptedTransport())
        a = write_eval_outcome(tmp_path / "a", outcome)
        b = write_eval_outcome(tmp_path / "b", outcome)
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        assert (a / "generations.jsonl").read_bytes() == (b / "generations.jsonl").read_bytes()
