import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgeir.ingest import InteractionLog, InteractionRecord, QMatrix
from kgeir.knowledge_graph import PathSet
from kgeir.skill_importance import (
    NOVELTY,
    POPULARITY,
    PreferenceWeights,
    SkillImportanceTable,
    combine,
    f1_level,
    f2_frequency,
    f3_connection,
    f4_similarity,
    f5_difficulty,
    importance_table,
    minmax_normalize,
    pi_difficulty,
    read_table,
    skill_importance,
    write_table,
)


def _single_skill_log(student_answers):
    """Each student answers exercise ``x`` (skill ``k``) with the given correctness sequence."""
    q = QMatrix(np.array([[1]]), ("x",), ("k",))
    recs = []
    for s, answers in student_answers.items():
        # repeated answers to the same exercise need distinct timestamps
        recs.extend(InteractionRecord(s, "x", c, t) for t, c in enumerate(answers))
    return InteractionLog(tuple(recs)), q


class TestPathFeatures:
    def test_level_single_path(self):
        assert f1_level(PathSet((("a", "b"),)), "b") == 1.0

    def test_level_two_paths(self):
        paths = PathSet((("a", "k"), ("a", "c", "d", "k")))
        levels = [p.index("k") for p in paths]
        assert f1_level(paths, "k") == np.mean(levels) == 2.0

    def test_level_absent(self):
        assert f1_level(PathSet((("a",),)), "z") == 0.0

    def test_frequency(self):
        paths = PathSet(tuple((f"p{i}", "k") if i < 3 else (f"p{i}",) for i in range(10)))
        assert f2_frequency(paths, "k") == pytest.approx(0.3)
        assert f2_frequency(paths, "zz") == 0.0
        assert f2_frequency(PathSet((("k",), ("a", "k"))), "k") == 1.0

    def test_frequency_empty(self):
        with pytest.raises(ValueError):
            f2_frequency(PathSet(()), "k")

    def test_frequency_times_n_is_integer(self):
        paths = PathSet((("a", "b"), ("a", "c"), ("b", "c", "d")))
        for kc in "abcd":
            v = f2_frequency(paths, kc) * len(paths)
            assert v == pytest.approx(round(v))

    def test_connection(self):
        assert f3_connection(PathSet((("A", "B", "C"),)), "A", 3) == pytest.approx(2 / 3)
        assert f3_connection(PathSet((("A", "B"),)), "Z", 3) == 0.0

    def test_connection_brute_force(self):
        paths = PathSet((("a", "b"), ("c", "a"), ("d", "a", "e")))
        expected = len({n for p in paths for n in p if "a" in p} - {"a"})
        assert f3_connection(paths, "a", 5) == expected / 5 == pytest.approx(4 / 5)


class TestSimilarity:
    def test_identical(self):
        assert f4_similarity(np.ones((3, 4)), 1) == pytest.approx(1.0)

    def test_orthogonal(self):
        emb = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]])
        assert f4_similarity(emb, 0) == pytest.approx(0.0)

    def test_hand_cosines(self):
        emb = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
        expected = (1 / math.sqrt(2) + 0.0) / 2
        assert f4_similarity(emb, 0) == pytest.approx(expected)

    def test_zero_norm(self):
        with pytest.raises(ValueError, match="zero-norm"):
            f4_similarity(np.array([[1.0, 0.0], [0.0, 0.0]]), 0)


class TestDifficulty:
    def test_few_attempts(self):
        log, q = _single_skill_log({"s": [1, 0, 1]})
        assert pi_difficulty(log, q, "s", "k", 10) == 5

    def test_half_wrong(self):
        log, q = _single_skill_log({"s": [1, 0, 1, 0, 1, 0, 1]})
        # window [0, 6) holds 6 attempts, 3 wrong
        assert pi_difficulty(log, q, "s", "k", 6) == math.floor(3 / 6 * 4) == 2

    def test_all_correct(self):
        log, q = _single_skill_log({"s": [1] * 8})
        assert pi_difficulty(log, q, "s", "k", 8) == 0

    def test_window_excludes_t(self):
        log, q = _single_skill_log({"s": [0] * 5})
        assert pi_difficulty(log, q, "s", "k", 4) == 5
        assert pi_difficulty(log, q, "s", "k", 5) == 4

    def test_non_increasing_in_correct_answers(self):
        for n_correct in range(7):
            answers = [1] * n_correct + [0] * (6 - n_correct)
            more = [1] * (n_correct + 1) + [0] * (5 - n_correct) if n_correct < 6 else answers
            a, qa = _single_skill_log({"s": answers})
            b, qb = _single_skill_log({"s": more})
            assert pi_difficulty(b, qb, "s", "k", 6) <= pi_difficulty(a, qa, "s", "k", 6)

    def test_mean_over_students(self):
        log, q = _single_skill_log({"a": [1, 0, 1, 0, 1, 0], "b": [0, 0, 0, 0, 0, 1]})
        assert f5_difficulty(log, q, "k", [6]) == pytest.approx((2 + 3) / 2)

    def test_grid_brute_force(self):
        log, q = _single_skill_log({"a": [1, 1, 1, 1, 1, 0, 0], "b": [0, 0, 1, 0, 0, 1, 1], "c": [1, 0]})
        checkpoints = [5, 7]
        grid = []
        for s in log.students:
            for t in checkpoints:
                window = [r.correct for r in log.for_student(s) if r.timestamp < t]
                grid.append(5 if len(window) < 5 else (len(window) - sum(window)) * 4 // len(window))
        assert f5_difficulty(log, q, "k", checkpoints) == pytest.approx(np.mean(grid))

    def test_default_checkpoint_is_after_last_record(self):
        log, q = _single_skill_log({"s": [0, 0, 1, 1, 1, 1]})
        assert f5_difficulty(log, q, "k") == pi_difficulty(log, q, "s", "k", 6) == 1

    def test_empty_checkpoints(self):
        log, q = _single_skill_log({"s": [1]})
        with pytest.raises(ValueError):
            f5_difficulty(log, q, "k", [])


class TestCombination:
    def test_novelty_preset(self):
        assert combine(np.array([1.0, 0, 0, 0, 1.0]), NOVELTY) == pytest.approx(1.0)

    def test_popularity_zero(self):
        assert combine(np.zeros(5), POPULARITY) == 0.0

    def test_popularity_frequency_only(self):
        assert combine(np.array([0, 1.0, 0, 0, 0]), POPULARITY) == pytest.approx(0.6)

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            PreferenceWeights()
        with pytest.raises(ValueError):
            PreferenceWeights(w1=-1.0, w2=1.0)

    def test_importance_values(self):
        assert skill_importance(0.0, 0.0) == 0.0
        e2 = math.e**2
        assert skill_importance(0.4, 0.6) == pytest.approx((e2 - 1) / (e2 + 1), abs=1e-12)
        assert skill_importance(0.4, 0.6) == pytest.approx(0.761594, abs=1e-6)
        assert skill_importance(1.0, 1.0) > skill_importance(0.5, 0.5)

    def test_minmax(self):
        np.testing.assert_allclose(minmax_normalize(np.array([2.0, 4.0, 3.0])), [0, 1, 0.5])
        np.testing.assert_allclose(minmax_normalize(np.array([7.0, 7.0])), [0.5, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.lists(st.floats(0, 10), min_size=5, max_size=5), min_size=1, max_size=8))
    def test_table_range_and_ranking(self, rows):
        table = SkillImportanceTable.from_features([f"k{i}" for i in range(len(rows))], np.array(rows))
        assert np.all(table.w_k >= 0) and np.all(table.w_k <= math.tanh(2) + 1e-12)
        np.testing.assert_array_equal(table.w_k, np.tanh(table.w_nov + table.w_pop))
        assert np.argmax(table.w_skill) == np.argmax(table.w_k)


def test_table_end_to_end(tmp_path, small_log, small_q):
    paths = PathSet((("k0", "k1", "k2"), ("k0", "k2")))
    emb = np.array([[1.0, 0.2], [0.3, 1.0], [0.5, 0.5]])
    table = importance_table(paths, emb, small_log, small_q)
    assert table.skill_ids == small_q.skill_ids
    np.testing.assert_allclose(table.raw[:, 0], [0.0, 1.0, 1.5])
    np.testing.assert_allclose(table.raw[:, 1], [1.0, 0.5, 1.0])
    np.testing.assert_allclose(table.raw[:, 2], [2 / 3, 2 / 3, 2 / 3])
    write_table(table, tmp_path / "t.csv")
    again = read_table(tmp_path / "t.csv")
    np.testing.assert_array_equal(again.w_k, table.w_k)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "skill_id,f1,f2,f3,f4,f5,w_nov,w_pop,w_k"
