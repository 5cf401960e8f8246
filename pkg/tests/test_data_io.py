# -*- coding: utf-8 -*-
import json

import numpy as np
import pytest

from cws_tools import data_io
from cws_tools.data_io import TEST, TRAIN, UNLABELED
from cws_tools.errors import CorpusParseError, ValidationError
from cws_tools.node_resources.bm25 import Bm25Params
from cws_tools.node_resources.confidence_targets import confidence_target_class
from cws_tools.node_resources.sentiment_lexicon import SentimentLexicon


@pytest.fixture
def ranking_files(tmp_path):
    (tmp_path / "docs.tsv").write_text(
        "d1\tApple banana\nd2\tapple cherry cherry\nd3\tbanana date\nd4\tapple date date\n", encoding="utf-8"
    )
    (tmp_path / "queries.tsv").write_text("q1\tapple\nq2\tbanana\ttrain\nq3\tdate\ttest\n", encoding="utf-8")
    (tmp_path / "qrels.txt").write_text("q2 0 d1 1\nq2 0 d2 0\nq2 0 d3 0\nq3 0 d4 2\n", encoding="utf-8")
    return tmp_path


def _load(directory, query_log=None):
    return data_io.load_ranking_corpus(
        str(directory / "docs.tsv"), str(directory / "queries.tsv"), str(directory / "qrels.txt"), query_log
    )


class TestRankingCorpus:
    def test_splits_from_column_and_judgments(self, ranking_files):
        corpus = _load(ranking_files)
        assert corpus.split_ids(UNLABELED) == ["q1"]
        assert corpus.split_ids(TRAIN) == ["q2"]
        assert corpus.split_ids(TEST) == ["q3"]
        assert corpus.documents["d1"] == ["apple", "banana"]
        assert "cherry" in corpus.vocabulary.term_to_id

    def test_query_log_adds_unlabeled_queries(self, ranking_files):
        log = ranking_files / "log.txt"
        log.write_text("Cheap flights\nwww.x.com\ncheap  flights\nbest pizza\n", encoding="utf-8")
        corpus = _load(ranking_files, str(log))
        assert corpus.split_ids(UNLABELED) == ["log-000001", "log-000002", "q1"]
        assert corpus.queries["log-000002"] == ["best", "pizza"]

    @pytest.mark.parametrize("name, content, line", [
        ("docs.tsv", "d1\tapple\nd2\n", 2),
        ("docs.tsv", "d1\tapple\nd1\tpear\n", 2),
        ("queries.tsv", "q1\tapple\tdev\n", 1),
        ("qrels.txt", "q2 0 d1 1\nq2 0 d2 -1\n", 2),
    ])
    def test_parse_errors_name_the_line(self, ranking_files, name, content, line):
        (ranking_files / name).write_text(content, encoding="utf-8")
        with pytest.raises(CorpusParseError) as err:
            _load(ranking_files)
        assert err.value.line_number == line

    def test_missing_file(self, ranking_files):
        (ranking_files / "docs.tsv").unlink()
        with pytest.raises(OSError):
            _load(ranking_files)

    def test_written_corpus_loads_back(self, ranking_files, tmp_path):
        corpus = _load(ranking_files)
        paths = data_io.write_ranking_corpus(corpus, str(tmp_path / "out"))
        again = data_io.load_ranking_corpus(paths["docs.tsv"], paths["queries.tsv"], paths["qrels.txt"])
        assert again.query_split == corpus.query_split
        assert again.qrels.judgments == corpus.qrels.judgments


class TestRankSets:
    def test_u_holds_every_candidate_pair(self, ranking_files):
        corpus = _load(ranking_files)
        sets = data_io.build_rank_sets(corpus, corpus.index(), Bm25Params(), depth=10, shuffle_orientation=False)
        # "apple" hits d1, d2 and d4
        assert len(sets.U) == 3
        assert all(item.weak_label[0] >= 0.5 for item in sets.U)

    def test_v_pairs_relevant_with_non_relevant(self, ranking_files):
        corpus = _load(ranking_files)
        sets = data_io.build_rank_sets(corpus, corpus.index(), Bm25Params(), depth=10, seed=4)
        assert len(sets.V) == 2
        for item in sets.V:
            assert item.true_label[0] in (0.0, 1.0)
            assert item.confidence_target == pytest.approx(1 - abs(item.true_label[0] - item.weak_label[0]))

    def test_judged_document_without_tokens_is_left_out(self, ranking_files):
        (ranking_files / "docs.tsv").write_text(
            "d1\tbanana split\nd2\tbanana bread\nd3\t!!!\nd4\tdate\n", encoding="utf-8"
        )
        corpus = _load(ranking_files)
        assert corpus.documents["d3"] == []
        sets = data_io.build_rank_sets(corpus, corpus.index(), Bm25Params(), depth=10, shuffle_orientation=False)
        # d1 is paired with d2 only
        assert len(sets.V) == 1

    def test_orientation_is_seeded(self, ranking_files):
        corpus = _load(ranking_files)
        index = corpus.index()
        a = data_io.build_rank_sets(corpus, index, Bm25Params(), depth=10, seed=2)
        b = data_io.build_rank_sets(corpus, index, Bm25Params(), depth=10, seed=2)
        assert [i.weak_label[0] for i in a.U] == [i.weak_label[0] for i in b.U]

    def test_flipped_pair_flips_the_label(self, ranking_files):
        corpus = _load(ranking_files)
        index = corpus.index()
        plain = data_io.harvest_weak_pairs(corpus, index, Bm25Params(), ["q1"], 10)
        shuffled = data_io.harvest_weak_pairs(corpus, index, Bm25Params(), ["q1"], 10, np.random.default_rng(0))
        for p, s in zip(plain, shuffled):
            if (p.doc_first, p.doc_second) == (s.doc_first, s.doc_second):
                assert p.weak_label == s.weak_label
            else:
                assert p.weak_label + s.weak_label == pytest.approx(1.0)

    def test_true_pair_label(self):
        assert data_io.true_pair_label(2, 0) == 1.0
        assert data_io.true_pair_label(1, 1) == 0.5
        assert data_io.true_pair_label(0, 1) == 0.0


@pytest.fixture
def sentence_file(tmp_path):
    rows = [
        {"id": "s1", "text": "Good movie"},
        {"id": "s2", "text": "bad plot", "label": "negative"},
        {"id": "s3", "text": "fine", "label": "Neutral", "split": "test"},
        {"id": "s4", "text": "!!!"},
    ]
    path = tmp_path / "sentences.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


class TestSentimentCorpus:
    def test_pools(self, sentence_file):
        corpus = data_io.load_sentiment_corpus(str(sentence_file))
        assert [r.record_id for r in corpus.unlabeled] == ["s1", "s4"]
        assert [r.record_id for r in corpus.labeled] == ["s2"]
        assert corpus.test[0].label == 2
        assert corpus.unlabeled[0].tokens == ("good", "movie")

    @pytest.mark.parametrize("line", [
        "{not json",
        '{"text": "no id"}',
        '{"id": "x", "text": "t", "label": "angry"}',
        '{"id": "x", "text": "t", "split": "test"}',
    ])
    def test_bad_lines(self, tmp_path, line):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "ok", "text": "fine"}\n' + line + "\n", encoding="utf-8")
        with pytest.raises(CorpusParseError) as err:
            data_io.load_sentiment_corpus(str(path))
        assert err.value.line_number == 2

    def test_sets_skip_empty_sentences(self, sentence_file):
        corpus = data_io.load_sentiment_corpus(str(sentence_file))
        lexicon = SentimentLexicon({"good": [0.8, 0.1, 0.1], "bad": [0.1, 0.8, 0.1]})
        sets = data_io.build_sentiment_sets(corpus, lexicon)
        assert len(sets.U) == 1 and len(sets.V) == 1
        item = sets.V[0]
        np.testing.assert_array_equal(item.true_label, [0.0, 1.0, 0.0])
        assert item.confidence_target == pytest.approx(confidence_target_class([0, 1, 0], [0.1, 0.8, 0.1]))

    def test_unlabeled_record_has_no_true_label(self, sentence_file):
        corpus = data_io.load_sentiment_corpus(str(sentence_file))
        with pytest.raises(ValidationError):
            corpus.unlabeled[0].true_label

    def test_written_corpus_loads_back(self, sentence_file, tmp_path):
        corpus = data_io.load_sentiment_corpus(str(sentence_file))
        out = tmp_path / "copy" / "sentences.jsonl"
        data_io.write_sentiment_corpus(corpus, str(out))
        again = data_io.load_sentiment_corpus(str(out))
        assert [r.label for r in again.labeled + again.test] == [1, 2]


class TestHoldOut:
    def test_deterministic_and_disjoint(self):
        records = list(range(10))
        kept, held = data_io.hold_out(records, 0.3, seed=5)
        assert len(held) == 3 and sorted(kept + held) == records
        assert data_io.hold_out(records, 0.3, seed=5) == (kept, held)
        assert kept == sorted(kept)

    def test_fraction_bounds(self):
        with pytest.raises(ValidationError):
            data_io.hold_out([1, 2], 0.0, seed=0)
