import json

import pytest

from budgetagents.profile import TaskSpec, load_profile, profile_from_dict


def test_defaults():
    profile = profile_from_dict({"tasks": [{"id": "a", "text": "do it"}]})
    assert profile.t_in == 500
    assert profile.t_out == 500
    assert profile.evaluator_kind == "numeric"
    assert profile.max_tokens == {"planner": 384, "executor": 384, "critic": 384}
    assert profile.tasks == (TaskSpec("a", "do it", None),)


def test_t_out_from_samples():
    profile = profile_from_dict({"tasks": [], "output_token_samples": [120, 480, 333]})
    assert profile.t_out == 480


def test_explicit_t_out_wins():
    profile = profile_from_dict(
        {"tasks": [], "t_out": 1000, "output_token_samples": [120, 480]}
    )
    assert profile.t_out == 1000


def test_unknown_role_rejected():
    with pytest.raises(ValueError, match="unknown role"):
        profile_from_dict({"tasks": [], "max_tokens": {"oracle": 99}})


def test_task_without_text_rejected():
    with pytest.raises(ValueError, match="missing 'text'"):
        profile_from_dict({"tasks": [{"id": "a"}]})


def test_load_from_file(tmp_path):
    path = tmp_path / "profile.json"
    path.write_text(json.dumps({
        "tasks": [{"id": "a", "text": "q", "answer": "1"}],
        "evaluator": "literal",
        "max_tokens": {"executor": 1024},
    }))
    profile = load_profile(path)
    assert profile.evaluator_kind == "literal"
    assert profile.max_tokens["executor"] == 1024
    assert profile.max_tokens["critic"] == 384
    assert profile.tasks[0].answer == "1"
