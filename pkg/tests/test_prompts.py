import hashlib
import json
from importlib import resources
from pathlib import Path

import pytest

from reasonforge.prompts import (
    HINT_SUFFIX,
    STAGE_ADAPT,
    STAGE_COT_EVAL,
    STAGE_FEWSHOT_COT,
    STAGE_PATH,
    STAGE_STRUCTURE,
    FewShotExemplarSet,
    exemplar_set,
    render_adaptation,
    render_cot_eval,
    render_fewshot_cot,
    render_path,
    render_structure,
    seed_guidelines,
)

GOLDEN = json.loads(
    (Path(__file__).parent / "data" / "golden_prompts.json").read_text(encoding="utf-8")
)

GUIDELINES_SHA256 = "3cf1b8c8f095a00aba7e4e4e0f8f1d88535c001823c46df5341e50383092f4d6"


def _exemplars(pairs) -> FewShotExemplarSet:
    return FewShotExemplarSet("demo", tuple((q, a) for q, a in pairs), hint_variant=False)


class TestGoldenPrompts:
    def test_adaptation(self):
        case = GOLDEN["adaptation"]
        prompt = render_adaptation(case["question"], seed_guidelines()[20])
        assert prompt.text == case["expected"]
        assert prompt.stage == STAGE_ADAPT
        assert prompt.hint_present is False

    def test_adaptation_hint(self):
        case = GOLDEN["adaptation_hint"]
        prompt = render_adaptation(case["question"], seed_guidelines()[20], hint=case["hint"])
        assert prompt.text == case["expected"]
        assert prompt.hint_present is True

    def test_structure(self):
        case = GOLDEN["structure"]
        prompt = render_structure(case["question"], case["adapted"])
        assert prompt.text == case["expected"]
        assert prompt.stage == STAGE_STRUCTURE
        assert prompt.hint_present is False

    def test_structure_hint(self):
        case = GOLDEN["structure_hint"]
        prompt = render_structure(case["question"], case["adapted"], hint=case["hint"])
        assert prompt.text == case["expected"]
        assert prompt.hint_present is True

    def test_path(self):
        case = GOLDEN["path"]
        prompt = render_path(case["question"], case["structure"])
        assert prompt.text == case["expected"]
        assert prompt.stage == STAGE_PATH
        assert prompt.hint_present is False

    def test_path_hint_rides_in_question(self):
        # the path template has no hint slot; the ablation rewrites the question
        case = GOLDEN["path_hint"]
        task = case["question"] + HINT_SUFFIX.format(hint=case["hint"])
        prompt = render_path(task, case["structure"])
        assert prompt.text == case["expected"]
        assert prompt.hint_present is False

    def test_cot_eval(self):
        case = GOLDEN["cot_eval"]
        prompt = render_cot_eval(case["question"])
        assert prompt.text == case["expected"]
        assert prompt.stage == STAGE_COT_EVAL

    def test_fewshot(self):
        case = GOLDEN["fewshot"]
        prompt = render_fewshot_cot(case["question"], _exemplars(case["exemplars"]))
        assert prompt.text == case["expected"]
        assert prompt.stage == STAGE_FEWSHOT_COT
        assert prompt.hint_present is False

    def test_fewshot_hint(self):
        case = GOLDEN["fewshot_hint"]
        prompt = render_fewshot_cot(
            case["question"], _exemplars(case["exemplars"]), hint=case["hint"]
        )
        assert prompt.text == case["expected"]
        assert prompt.hint_present is True


class TestSeedGuidelines:
    def test_count_and_indices(self):
        gs = seed_guidelines()
        assert len(gs) == 25
        assert [g.index for g in gs] == list(range(1, 26))

    def test_data_file_digest(self):
        data = resources.files("reasonforge").joinpath("data/seed_guidelines.txt").read_bytes()
        assert hashlib.sha256(data).hexdigest() == GUIDELINES_SHA256

    def test_known_literals(self):
        gs = seed_guidelines()
        assert gs[20].text == "Let's think step by step."
        assert gs[1].text.startswith("Make a list of ideas for solving this problem")
        assert gs[0].text == "How could I devise an experiment to help solve that problem?"

    def test_apostrophe_forms_preserved(self):
        gs = seed_guidelines()
        assert "'" in gs[20].text
        assert "’" in gs[23].text

    def test_texts_unique_and_nonempty(self):
        texts = [g.text for g in seed_guidelines()]
        assert all(texts)
        assert len(set(texts)) == 25

    def test_cached_instance(self):
        assert seed_guidelines() is seed_guidelines()


class TestExemplarSets:
    @pytest.mark.parametrize(
        "name,count,hint_variant",
        [
            ("gsm8k", 8, False),
            ("arc_c", 4, False),
            ("strategyqa", 6, False),
            ("reclor", 3, False),
            ("numglue", 3, False),
            ("gsm8k_star", 3, False),
            ("gsm8k_star_hints", 3, True),
        ],
    )
    def test_committed_sets(self, name, count, hint_variant):
        es = exemplar_set(name)
        assert len(es.exemplars) == count
        assert es.hint_variant is hint_variant
        assert all(q and a for q, a in es.exemplars)

    def test_hint_variant_embeds_hints(self):
        es = exemplar_set("gsm8k_star_hints")
        assert all("(Hints:" in q for q, _ in es.exemplars)

    def test_plain_sets_have_no_hints(self):
        for name in ("gsm8k", "gsm8k_star"):
            es = exemplar_set(name)
            assert all("Hints" not in q for q, _ in es.exemplars)

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            exemplar_set("unheard_of")

    def test_take_preserves_prefix_order(self):
        es = exemplar_set("gsm8k")
        head = es.take(3)
        assert head.exemplars == es.exemplars[:3]
        assert head.dataset == es.dataset
        assert len(head.exemplars) == 3


class TestRenderingContracts:
    def test_pure(self):
        g = seed_guidelines()[4]
        assert render_adaptation("q?", g).text == render_adaptation("q?", g).text
        assert render_cot_eval("q?") == render_cot_eval("q?")

    def test_no_hint_means_no_hint_text(self):
        g = seed_guidelines()[0]
        gt = "990.00"
        for prompt in (
            render_adaptation("q?", g),
            render_structure("q?", "adapted"),
            render_path("q?", "structure"),
            render_cot_eval("q?"),
            render_fewshot_cot("q?", exemplar_set("gsm8k")),
        ):
            assert gt not in prompt.text
            assert prompt.hint_present is False

    def test_hint_text_lands_in_prompt(self):
        g = seed_guidelines()[0]
        assert render_adaptation("q?", g, hint="36").text.startswith(
            "Without working out the solution: 36, adapt"
        )
        assert render_structure("q?", "adapted", hint="36").text.startswith(
            "Without working out the solution: 36, create an actionable"
        )
        hinted = render_fewshot_cot("q?", exemplar_set("gsm8k"), hint="72")
        assert "Q: q? (Hints: 72)\nA:" in hinted.text

    def test_path_template_ends_fixed(self):
        assert render_path("q?", "s").text.endswith("based on the above reasoning structure.")

    def test_empty_question_rejected(self):
        g = seed_guidelines()[0]
        with pytest.raises(ValueError):
            render_adaptation("", g)
        with pytest.raises(ValueError):
            render_structure("", "adapted")

    def test_empty_structure_rejected(self):
        with pytest.raises(ValueError):
            render_path("q?", "")

    def test_cot_eval_accepts_empty_question(self):
        assert render_cot_eval("").text == "Solve the following problem step-by-step. Question:  Answer:"

    def test_empty_exemplar_set_rejected(self):
        with pytest.raises(ValueError):
            render_fewshot_cot("q?", FewShotExemplarSet("x", (), False))
