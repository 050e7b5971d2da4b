import numpy as np
import pytest

from kgeir.ingest import (
    DataError,
    InteractionLog,
    InteractionRecord,
    QMatrix,
    load_interaction_log,
    load_q_matrix,
    split_holdout,
    summarize,
    write_interaction_log,
    write_q_matrix,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadInteractionLog:
    def test_three_rows(self, tmp_path):
        p = _write(tmp_path / "log.csv", "student_id,exercise_id,correct,timestamp\ns1,e1,1,3\ns1,e2,0,1\ns2,e1,1,2\n")
        log = load_interaction_log(p)
        assert log.n_records == 3
        assert log.n_students == 2
        assert [r.exercise_id for r in log.for_student("s1")] == ["e2", "e1"]

    def test_column_order_is_free(self, tmp_path):
        p = _write(tmp_path / "log.csv", "timestamp,correct,exercise_id,student_id\n5,1,e9,s4\n")
        assert load_interaction_log(p).records == (InteractionRecord("s4", "e9", 1, 5),)

    def test_bad_correct_names_the_line(self, tmp_path):
        p = _write(tmp_path / "log.csv", "student_id,exercise_id,correct,timestamp\ns1,e1,1,0\ns1,e2,2,1\n")
        with pytest.raises(DataError, match="line 3") as info:
            load_interaction_log(p)
        assert info.value.line == 3

    def test_duplicate_triple_rejected(self, tmp_path):
        p = _write(tmp_path / "log.csv", "student_id,exercise_id,correct,timestamp\ns1,e1,1,0\ns1,e1,0,0\n")
        with pytest.raises(DataError, match="duplicate"):
            load_interaction_log(p)

    def test_missing_column(self, tmp_path):
        p = _write(tmp_path / "log.csv", "student_id,exercise_id,correct\ns1,e1,1\n")
        with pytest.raises(DataError, match="timestamp"):
            load_interaction_log(p)

    def test_malformed_timestamp(self, tmp_path):
        p = _write(tmp_path / "log.csv", "student_id,exercise_id,correct,timestamp\ns1,e1,1,soon\n")
        with pytest.raises(DataError, match="line 2"):
            load_interaction_log(p)

    def test_round_trip(self, tmp_path, small_log):
        write_interaction_log(small_log, tmp_path / "out.csv")
        again = load_interaction_log(tmp_path / "out.csv")
        assert again.records == small_log.records
        assert again.digest() == small_log.digest()

    def test_ties_keep_file_order(self):
        log = InteractionLog((InteractionRecord("s", "b", 1, 0), InteractionRecord("s", "a", 0, 0)))
        assert [r.exercise_id for r in log.for_student("s")] == ["b", "a"]

    def test_unknown_student(self, small_log):
        with pytest.raises(KeyError):
            small_log.for_student("nobody")

    def test_validate_against_q(self, small_log, small_q):
        small_log.validate_against(small_q)
        bad = InteractionLog(small_log.records + (InteractionRecord("s9", "zz", 1, 0),))
        with pytest.raises(DataError, match="zz"):
            bad.validate_against(small_q)


class TestQMatrix:
    def test_row_from_pairs(self, tmp_path):
        pairs = _write(tmp_path / "q.csv", "exercise_id,skill_id\ne1,k2\ne1,k1\ne2,k3\n")
        vocab = _write(tmp_path / "skills.csv", "skill_id\nk1\nk2\nk3\n")
        q = load_q_matrix(pairs, vocab)
        assert q.skill_ids == ("k1", "k2", "k3")
        np.testing.assert_array_equal(q.row("e1"), [1, 1, 0])

    def test_exercise_without_skill(self, tmp_path):
        pairs = _write(tmp_path / "q.csv", "exercise_id,skill_id\ne1,k1\ne5,\n")
        with pytest.raises(DataError, match="exercise with no skill"):
            load_q_matrix(pairs)

    def test_unknown_skill_with_vocabulary(self, tmp_path):
        pairs = _write(tmp_path / "q.csv", "exercise_id,skill_id\ne1,k7\n")
        vocab = _write(tmp_path / "skills.csv", "skill_id\nk1\n")
        with pytest.raises(DataError, match="k7"):
            load_q_matrix(pairs, vocab)

    def test_ids_are_sorted(self, tmp_path):
        pairs = _write(tmp_path / "q.csv", "exercise_id,skill_id\nzeta,b\nalpha,a\n")
        q = load_q_matrix(pairs)
        assert q.exercise_ids == ("alpha", "zeta")
        assert q.skill_ids == ("a", "b")

    def test_direct_zero_row_rejected(self):
        with pytest.raises(DataError):
            QMatrix(np.array([[1, 0], [0, 0]]), ("a", "b"), ("k0", "k1"))

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            QMatrix(np.ones((2, 2)), ("a",), ("k0", "k1"))

    def test_round_trip_and_weighting(self, tmp_path, small_q):
        write_q_matrix(small_q, tmp_path / "q.csv")
        again = load_q_matrix(tmp_path / "q.csv")
        np.testing.assert_array_equal(again.entries, small_q.entries)
        w = np.array([0.5, 0.2, 0.9])
        np.testing.assert_allclose(small_q.weighted(w)[1], [0.5, 0.2, 0.0])
        assert (small_q.entries.sum(axis=1) >= 1).all()


class TestSplitHoldout:
    @staticmethod
    def _log(n):
        return InteractionLog(tuple(InteractionRecord("s", f"e{i}", i % 2, 10 - i) for i in range(n)))

    def test_half(self):
        split = split_holdout(self._log(10), "s", 0.5)
        assert len(split.observed) == 5 and len(split.heldout) == 5
        stamps = [r.timestamp for r in split.observed + split.heldout]
        assert stamps == sorted(stamps)

    def test_ceiling(self):
        split = split_holdout(self._log(7), "s", 0.4, seed=1)
        expected = min(k for k in range(8) if k >= 0.6 * 7)
        assert len(split.observed) == expected == 5
        assert len(split.heldout) == 2

    def test_exact_products_do_not_round_up(self):
        assert len(split_holdout(self._log(10), "s", 0.3).observed) == 7

    @pytest.mark.parametrize("fraction", [0.0, -0.1, 1.0])
    def test_invalid_fraction(self, fraction):
        with pytest.raises((ValueError, DataError)):
            split_holdout(self._log(10), "s", fraction)

    def test_needs_two_records(self):
        with pytest.raises(DataError):
            split_holdout(self._log(1), "s", 0.5)

    def test_partition_for_every_student(self, small_log):
        for s in small_log.students:
            split = split_holdout(small_log, s, 0.5, seed=3)
            assert split.observed + split.heldout == small_log.for_student(s)
            assert split.heldout

    def test_deterministic(self, small_log):
        assert split_holdout(small_log, "s0", 0.5, 4) == split_holdout(small_log, "s0", 0.5, 4)


def test_summary_counts(small_log, small_q):
    summary = summarize(small_log, small_q)
    assert summary["n_records"] == 14
    assert summary["n_students"] == 3
    assert summary["n_questions"] == 5
    assert summary["n_skills"] == 3
