import pytest

from budgetagents.evaluators import LiteralEvaluator, NumericEvaluator, get_evaluator
from budgetagents.profile import TaskSpec


def test_numeric_extracts_final_number():
    ev = NumericEvaluator()
    assert ev.normalize("3 + 4 = 7, so the answer is 7") == "7.0"
    assert ev.normalize("first 5 then 12.5") == "12.5"
    assert ev.normalize("no digits at all") is None


def test_numeric_honors_answer_marker():
    ev = NumericEvaluator()
    assert ev.normalize("We add 40 and 2.\n#### 42") == "42.0"
    assert ev.normalize("step 1: 99\n#### 1,235") == "1235.0"


def test_numeric_grade():
    ev = NumericEvaluator()
    task = TaskSpec("t", "six by seven", answer="42")
    assert ev.grade("the result is 42", task) is True
    assert ev.grade("the result is 42.0", task) is True
    assert ev.grade("the result is 41", task) is False
    assert ev.grade("nothing numeric", task) is False


def test_numeric_ungraded_without_answer():
    ev = NumericEvaluator()
    assert ev.grade("42", TaskSpec("t", "q", answer=None)) is None


def test_numeric_rejects_non_numeric_expected():
    ev = NumericEvaluator()
    with pytest.raises(ValueError):
        ev.grade("42", TaskSpec("t", "q", answer="forty-two"))


def test_literal():
    ev = LiteralEvaluator()
    task = TaskSpec("t", "q", answer="hello world")
    assert ev.grade("  hello world\n", task) is True
    assert ev.grade("hello", task) is False
    assert ev.normalize("   ") is None


def test_get_evaluator():
    assert get_evaluator("numeric").name == "numeric"
    assert get_evaluator("literal").name == "literal"
    with pytest.raises(ValueError, match="unknown evaluator"):
        get_evaluator("code")
