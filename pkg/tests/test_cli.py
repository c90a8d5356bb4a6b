import subprocess
import sys

import pytest

from topsig.cli import dispatch
from topsig.evaluation import parse_run
from topsig.sigstore import read_index


@pytest.fixture()
def built_index(toy_corpus_path, tmp_path):
    out = tmp_path / "toy.tsig"
    rc = dispatch(
        [
            "index",
            "--corpus", str(toy_corpus_path),
            "--out", str(out),
            "--bits", "256",
            "--sparsity", "12",
            "--weighting", "loglik",
            "--seed", "42",
        ]
    )
    assert rc == 0
    return out


class TestIndexCommand:
    def test_success_writes_file_and_metadata(self, toy_corpus_path, tmp_path, capsys):
        out = tmp_path / "c.tsig"
        rc = dispatch(
            ["index", "--corpus", str(toy_corpus_path), "--out", str(out),
             "--bits", "64", "--seed", "7"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert out.exists()
        assert "# phase stats_pass_ms" in captured.err
        assert "# phase project_pass_ms" in captured.err
        assert "# phase write_ms" in captured.err
        assert "# index: width_bits=64" in captured.err
        assert captured.out == ""

    def test_flags_echoed_verbatim(self, toy_corpus_path, tmp_path, capsys):
        out = tmp_path / "c.tsig"
        argv = ["index", "--corpus", str(toy_corpus_path), "--out", str(out)]
        dispatch(argv)
        assert "# args: " + " ".join(argv) in capsys.readouterr().err

    def test_malformed_corpus_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("no tab on this line\n")
        rc = dispatch(
            ["index", "--corpus", str(bad), "--out", str(tmp_path / "x.tsig")]
        )
        assert rc == 2
        assert "no TAB" in capsys.readouterr().err

    def test_bad_width_is_parameter_error(self, toy_corpus_path, tmp_path):
        rc = dispatch(
            ["index", "--corpus", str(toy_corpus_path),
             "--out", str(tmp_path / "x.tsig"), "--bits", "100"]
        )
        assert rc == 1

    def test_threads_do_not_change_bytes(self, random_corpus_path, tmp_path):
        a, b = tmp_path / "a.tsig", tmp_path / "b.tsig"
        base = ["index", "--corpus", str(random_corpus_path), "--bits", "128"]
        assert dispatch(base + ["--out", str(a), "--threads", "1"]) == 0
        assert dispatch(base + ["--out", str(b), "--threads", "4"]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestSearchCommand:
    def test_trec_output_shape(self, built_index, toy_corpus_path, capsys):
        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(toy_corpus_path),
             "--query", "space shuttle", "--top", "3", "--qid", "q7", "--tag", "run1"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        lines = captured.out.strip().splitlines()
        assert len(lines) == 3
        first = lines[0].split()
        assert first[0] == "q7" and first[1] == "Q0" and first[3] == "1"
        assert first[5] == "run1"
        scores = [int(line.split()[4]) for line in lines]
        assert scores == sorted(scores, reverse=True)
        assert lines[0].split()[2] == "d1"  # the space-shuttle document

    def test_score_is_mask_popcount_minus_distance(
        self, built_index, toy_corpus_path, capsys
    ):
        from topsig.corpus import build_stats, read_corpus, tokenize
        from topsig.search import build_query, rank

        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(toy_corpus_path),
             "--query", "space", "--top", "1"]
        )
        assert rc == 0
        line = capsys.readouterr().out.strip().splitlines()[0]
        index = read_index(built_index)
        stats = build_stats(read_corpus(toy_corpus_path))
        q = build_query(tokenize("space"), stats, index.header.config())
        (ordinal, distance), = rank(index, q, cutoff=1)
        assert int(line.split()[4]) == q.mask_popcount() - distance
        assert line.split()[2] == index.doc_ids[ordinal]

    def test_prefix_bits_beyond_width_is_parameter_error(
        self, built_index, toy_corpus_path, capsys
    ):
        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(toy_corpus_path),
             "--query", "space", "--prefix-bits", "512"]
        )
        assert rc == 1
        assert "parameter error" in capsys.readouterr().err

    def test_unknown_query_terms_is_data_error(
        self, built_index, toy_corpus_path, capsys
    ):
        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(toy_corpus_path),
             "--query", "zzz qqq"]
        )
        assert rc == 2

    def test_missing_index_file_is_data_error(self, toy_corpus_path, tmp_path):
        rc = dispatch(
            ["search", "--index", str(tmp_path / "nope.tsig"),
             "--corpus", str(toy_corpus_path), "--query", "space"]
        )
        assert rc == 2

    def test_wrong_corpus_detected(self, built_index, tmp_path):
        other = tmp_path / "other.tsv"
        other.write_text("x1\tsomething else\n", encoding="utf-8")
        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(other),
             "--query", "something"]
        )
        assert rc == 2

    def test_prf_flag_runs(self, built_index, toy_corpus_path, capsys):
        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(toy_corpus_path),
             "--query", "space telescope", "--top", "3", "--prf", "2",
             "--rerank-depth", "3"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert len(captured.out.strip().splitlines()) == 3

    def test_thread_count_invariant_output(self, built_index, toy_corpus_path, capsys):
        argv = ["search", "--index", str(built_index), "--corpus",
                str(toy_corpus_path), "--query", "space shuttle", "--top", "3"]
        assert dispatch(argv + ["--threads", "1"]) == 0
        out1 = capsys.readouterr().out
        assert dispatch(argv + ["--threads", "4"]) == 0
        out4 = capsys.readouterr().out
        assert out1 == out4

    def test_env_threads_fallback(self, built_index, toy_corpus_path, monkeypatch, capsys):
        monkeypatch.setenv("TOPSIG_THREADS", "2")
        rc = dispatch(
            ["search", "--index", str(built_index), "--corpus", str(toy_corpus_path),
             "--query", "space"]
        )
        assert rc == 0


class TestBatchSearch:
    def test_run_file_round_trips(self, built_index, toy_corpus_path, tmp_path, capsys):
        topics = tmp_path / "topics.tsv"
        topics.write_text("q1\tspace shuttle\nq2\tpasta sauce\n", encoding="utf-8")
        out = tmp_path / "run.txt"
        rc = dispatch(
            ["batch-search", "--index", str(built_index),
             "--corpus", str(toy_corpus_path), "--topics", str(topics),
             "--top", "3", "--out", str(out)]
        )
        captured = capsys.readouterr()
        assert rc == 0
        run = parse_run(out)
        assert set(run) == {"q1", "q2"}
        assert run["q1"][0] == "d1"
        assert run["q2"][0] == "d2"
        assert "# phase query:q1_ms" in captured.err
        assert "# phase scan_total_ms" in captured.err


class TestClusterCommand:
    def test_assignments_and_summary(self, built_index, tmp_path, capsys):
        out = tmp_path / "clusters.tsv"
        rc = dispatch(
            ["cluster", "--index", str(built_index), "--k", "2",
             "--max-iters", "10", "--seed", "3", "--out", str(out)]
        )
        captured = capsys.readouterr()
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3
        parsed = dict(line.split("\t") for line in lines)
        assert set(parsed) == {"d1", "d2", "d3"}
        assert set(parsed.values()) <= {"0", "1"}
        assert "# summary: k=2 iterations=" in captured.err

    def test_k_too_large_is_parameter_error(self, built_index):
        rc = dispatch(["cluster", "--index", str(built_index), "--k", "9"])
        assert rc == 1


class TestEvalCommands:
    @pytest.fixture()
    def run_and_qrels(self, tmp_path):
        run = tmp_path / "run.txt"
        run.write_text(
            "q1 Q0 d1 1 9 t\nq1 Q0 d2 2 8 t\nq1 Q0 d3 3 7 t\n"
            "q2 Q0 d2 1 9 t\n"
        )
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("q1 0 d1 1\nq1 0 d3 1\nq2 0 d9 1\n")
        return run, qrels

    def test_precision_at_n(self, run_and_qrels, capsys):
        run, qrels = run_and_qrels
        rc = dispatch(
            ["eval", "--run", str(run), "--qrels", str(qrels), "--metric", "p@2"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        rows = dict(
            line.split("\t") for line in captured.out.strip().splitlines()
        )
        assert rows["q1"] == "0.5000"
        assert rows["q2"] == "0.0000"
        assert rows["all"] == "0.2500"

    def test_map_metric(self, run_and_qrels, capsys):
        run, qrels = run_and_qrels
        rc = dispatch(
            ["eval", "--run", str(run), "--qrels", str(qrels), "--metric", "map"]
        )
        assert rc == 0
        rows = dict(
            line.split("\t") for line in capsys.readouterr().out.strip().splitlines()
        )
        # q1: relevant at ranks 1 and 3 -> (1 + 2/3) / 2
        assert float(rows["q1"]) == pytest.approx((1 + 2 / 3) / 2, abs=5e-5)

    def test_pr_metric_skips_zero_relevant(self, run_and_qrels, capsys):
        run, qrels = run_and_qrels
        rc = dispatch(
            ["eval", "--run", str(run), "--qrels", str(qrels), "--metric", "pr"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        lines = [l.split("\t") for l in captured.out.strip().splitlines()]
        q1_rows = [l for l in lines if l[0] == "q1"]
        assert len(q1_rows) == 11

    def test_unknown_metric_is_usage_error(self, run_and_qrels):
        run, qrels = run_and_qrels
        rc = dispatch(
            ["eval", "--run", str(run), "--qrels", str(qrels), "--metric", "ndcg"]
        )
        assert rc == 1

    def test_eval_cluster(self, tmp_path, capsys):
        assignments = tmp_path / "a.tsv"
        assignments.write_text("d1\t0\nd2\t0\nd3\t0\nd4\t1\n")
        labels = tmp_path / "l.tsv"
        labels.write_text("d1\tA\nd2\tA\nd3\tB\nd4\tB\n")
        qrels = tmp_path / "q.txt"
        qrels.write_text("q1 0 d1 1\nq1 0 d2 1\n")
        rc = dispatch(
            ["eval-cluster", "--assignments", str(assignments),
             "--labels", str(labels), "--qrels", str(qrels), "--topic", "q1"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        lines = captured.out.strip().splitlines()
        assert "micro_purity\t0.7500" in lines
        assert "nccg\tq1\t1.0000" in lines


class TestDistortCommand:
    def test_tsv_output(self, random_corpus_path, capsys):
        rc = dispatch(
            ["distort", "--corpus", str(random_corpus_path), "--sample", "40",
             "--dims", "64,128", "--bits", "float,1", "--seed", "5"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        lines = captured.out.strip().splitlines()
        assert lines[0] == "dims\tbits\trmse"
        assert len(lines) == 5
        assert lines[1].startswith("64\tfloat\t")


class TestDispatch:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        rc = dispatch(["frobnicate"])
        captured = capsys.readouterr()
        assert rc == 1
        assert "usage" in captured.err.lower()

    def test_no_arguments_is_usage_error(self):
        assert dispatch([]) == 1

    def test_console_script_entry_point(self):
        result = subprocess.run(
            [sys.executable, "-m", "topsig.cli", "--version"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert result.stdout.strip() == "0.1.0"
