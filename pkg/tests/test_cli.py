"""End-to-end command line behavior: every subcommand, every exit code."""

import csv
import io
import json

import pytest

from gwin import dbindex
from gwin.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from gwin.graph import AttributeTable, generate_random_dag
from gwin.io import write_attribute_table
from gwin.serialize import load_index, save_index

from conftest import DAG_EDGES, DAG_LABELS, DEMO_EDGES, DEMO_LABELS


@pytest.fixture
def demo_files(tmp_path):
    """Demo graph edge list + attribute CSV on disk."""
    graph = tmp_path / "demo.edges"
    graph.write_text(
        "# toy graph\n" + "\n".join(f"{u} {v}" for u, v in DEMO_EDGES) + "\n"
    )
    attrs = tmp_path / "demo_attrs.csv"
    values = {label: (i + 1) * 10 for i, label in enumerate(DEMO_LABELS)}
    attrs.write_text(
        "vertex,value\n" + "".join(f"{l},{v}\n" for l, v in values.items())
    )
    return graph, attrs, values


@pytest.fixture
def dag_files(tmp_path):
    graph = tmp_path / "dag.edges"
    graph.write_text("\n".join(f"{u} {v}" for u, v in DAG_EDGES) + "\n")
    attrs = tmp_path / "dag_attrs.csv"
    attrs.write_text(
        "vertex,value\n"
        + "".join(f"{l},{(i + 1) * 7}\n" for i, l in enumerate(DAG_LABELS))
    )
    return graph, attrs


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


# -- ingest --------------------------------------------------------------------


def test_ingest_reports_shape(demo_files, capsys):
    graph, _, _ = demo_files
    code, out, _ = run(capsys, "ingest", "--graph", graph)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["vertices"] == 6
    assert report["edges"] == 10
    assert report["directed"] is False
    assert report["max_degree"] == 5


def test_ingest_lists_attribute_names(demo_files, capsys):
    graph, attrs, _ = demo_files
    code, out, _ = run(capsys, "ingest", "--graph", graph, "--attrs", attrs)
    assert code == EXIT_OK
    assert json.loads(out)["attributes"] == ["value"]


def test_ingest_canonical_output_round_trips(demo_files, tmp_path, capsys):
    graph, _, _ = demo_files
    out_path = tmp_path / "canonical.edges"
    code, out, _ = run(capsys, "ingest", "--graph", graph, "--out", out_path)
    assert code == EXIT_OK
    code2, out2, _ = run(capsys, "ingest", "--graph", out_path)
    assert code2 == EXIT_OK
    assert json.loads(out2)["edges"] == 10


def test_ingest_missing_file_is_a_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "ingest", "--graph", tmp_path / "absent.edges")
    assert code == EXIT_DATA
    assert "error" in err


def test_ingest_malformed_file_names_the_line(tmp_path, capsys):
    bad = tmp_path / "bad.edges"
    bad.write_text("a b\na b c d\n")
    code, _, err = run(capsys, "ingest", "--graph", bad)
    assert code == EXIT_DATA
    assert "line 2" in err


# -- build ---------------------------------------------------------------------


def build_demo_index(demo_files, tmp_path, capsys, *extra):
    graph, attrs, _ = demo_files
    out = tmp_path / "demo.idx"
    code, stdout, _ = run(
        capsys, "build", "--graph", graph, "--window", "khop", "--k", "1",
        "--strategy", "mc", "--seed", "130", "--out", out, *extra,
    )
    assert code == EXIT_OK
    return out, json.loads(stdout)


def test_build_writes_index_and_reports_phases(demo_files, tmp_path, capsys):
    out, report = build_demo_index(demo_files, tmp_path, capsys)
    assert out.exists()
    assert report["vertices"] == 6
    assert report["blocks"] >= 3
    assert report["index_bytes"] == out.stat().st_size
    phases = report["phases"]
    for key in ("traversal_s", "hash_s", "identify_s", "total_s"):
        assert phases[key] >= 0.0
    assert (
        phases["traversal_s"] + phases["hash_s"] + phases["identify_s"]
        <= phases["total_s"] + 1e-6
    )
    assert report["index_ratio"] == pytest.approx(
        report["index_bytes"] / report["graph_bytes"]
    )


def test_build_iindex_on_dag(dag_files, tmp_path, capsys):
    graph, _ = dag_files
    out = tmp_path / "dag.idx"
    code, stdout, _ = run(
        capsys, "build", "--graph", graph, "--directed",
        "--window", "topological", "--strategy", "iindex", "--out", out,
    )
    assert code == EXIT_OK
    report = json.loads(stdout)
    assert report["inheritance_edges"] == 6  # all but the two sources
    assert out.exists()


@pytest.mark.parametrize(
    "argv",
    [
        # estimated clustering needs k >= 2
        ["--window", "khop", "--k", "1", "--strategy", "emc"],
        # k_cluster must stay below k
        ["--window", "khop", "--k", "2", "--k-cluster", "2", "--strategy", "emc"],
        # estimated clustering is khop-only
        ["--window", "topological", "--strategy", "emc"],
        # inheritance index is topological-only
        ["--window", "khop", "--k", "1", "--strategy", "iindex"],
        # khop needs --k
        ["--window", "khop", "--strategy", "mc"],
        # topological takes no --k
        ["--window", "topological", "--k", "2", "--strategy", "mc"],
    ],
)
def test_build_usage_errors_exit_1(demo_files, tmp_path, capsys, argv):
    graph, _, _ = demo_files
    with pytest.raises(SystemExit) as exc:
        main(
            ["build", "--graph", str(graph), "--out", str(tmp_path / "x.idx")]
            + argv
        )
    assert exc.value.code == EXIT_USAGE


def test_build_emc_records_strategy(demo_files, tmp_path, capsys):
    graph, _, _ = demo_files
    out = tmp_path / "emc.idx"
    code, stdout, _ = run(
        capsys, "build", "--graph", graph, "--window", "khop", "--k", "2",
        "--strategy", "emc", "--k-cluster", "1", "--out", out,
    )
    assert code == EXIT_OK
    assert json.loads(stdout)["strategy"] == "emc"
    assert load_index(out).params.strategy == "emc"


# -- query ---------------------------------------------------------------------


def expected_window_sums(values):
    """1-hop window sums on the demo graph, computed by hand from DEMO_EDGES."""
    neigh = {l: {l} for l in DEMO_LABELS}
    for u, v in DEMO_EDGES:
        neigh[u].add(v)
        neigh[v].add(u)
    return {l: sum(values[x] for x in members) for l, members in neigh.items()}


def test_query_csv_results(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, values = demo_files
    code, out, _ = run(
        capsys, "query", "--graph", graph, "--attrs", attrs,
        "--index", idx, "--agg", "sum:value",
    )
    assert code == EXIT_OK
    header, rows = parse_csv(out)
    assert header == ["vertex", "value"]
    got = {label: int(value) for label, value in rows}
    assert got == expected_window_sums(values)


def test_query_json_results(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, values = demo_files
    code, out, _ = run(
        capsys, "query", "--graph", graph, "--attrs", attrs,
        "--index", idx, "--agg", "count", "--format", "json",
    )
    assert code == EXIT_OK
    rows = json.loads(out)
    assert {r["vertex"]: r["value"] for r in rows} == {
        "A": 6, "B": 4, "C": 5, "D": 4, "E": 3, "F": 4,
    }


def test_query_verify_passes_on_intact_index(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    code, _, err = run(
        capsys, "query", "--graph", graph, "--attrs", attrs,
        "--index", idx, "--agg", "avg:value", "--verify",
    )
    assert code == EXIT_OK
    assert "verify: 0 mismatches" in err


def test_query_oracle_matches_indexed(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    base = ["query", "--graph", graph, "--attrs", attrs,
            "--index", idx, "--agg", "min:value"]
    code_a, out_a, _ = run(capsys, *base)
    code_b, out_b, _ = run(capsys, *base, "--oracle")
    assert code_a == code_b == EXIT_OK
    assert out_a == out_b


def test_query_stats_go_to_stderr(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    code, out, err = run(
        capsys, "query", "--graph", graph, "--attrs", attrs,
        "--index", idx, "--agg", "count", "--stats",
    )
    assert code == EXIT_OK
    assert "accumulates=" in err and "eval_s=" in err
    assert "accumulates=" not in out  # results stream stays clean


def test_query_out_file(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    dest = tmp_path / "result.csv"
    code, out, _ = run(
        capsys, "query", "--graph", graph, "--attrs", attrs,
        "--index", idx, "--agg", "count", "--out", dest,
    )
    assert code == EXIT_OK
    assert out == ""
    assert dest.read_text().startswith("vertex,value")


def test_query_stale_index_is_a_data_error(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    # same labels, one edge fewer: the fingerprint embedded in the index
    # no longer matches the graph file
    edited = tmp_path / "edited.edges"
    lines = graph.read_text().strip().splitlines()
    edited.write_text("\n".join(lines[:-1]) + "\n")
    code, _, err = run(
        capsys, "query", "--graph", edited, "--attrs", attrs,
        "--index", idx, "--agg", "count",
    )
    assert code == EXIT_DATA
    assert "different graph" in err


def test_query_corrupted_index_fails_verification(demo_files, tmp_path, capsys):
    """A structurally valid file whose blocks are semantically wrong must be
    caught by --verify (exit 3), not trusted."""
    idx_path, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    index = load_index(idx_path)
    victim = max(range(index.block_count), key=lambda b: len(index.blocks[b]))
    index.blocks[victim] = index.blocks[victim][:-1]
    index.rebuild_digests()
    save_index(index, idx_path)

    code, _, err = run(
        capsys, "query", "--graph", graph, "--attrs", attrs,
        "--index", idx_path, "--agg", "count", "--verify",
    )
    assert code == EXIT_VERIFY
    mismatches = int(err.split("verify: ")[1].split()[0])
    assert mismatches > 0


def test_query_bad_aggregate_is_usage_error(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    with pytest.raises(SystemExit) as exc:
        main(["query", "--graph", str(graph), "--attrs", str(attrs),
              "--index", str(idx), "--agg", "median:value"])
    assert exc.value.code == EXIT_USAGE


def test_query_iindex(dag_files, tmp_path, capsys):
    graph, attrs = dag_files
    idx = tmp_path / "dag.idx"
    run(capsys, "build", "--graph", graph, "--directed",
        "--window", "topological", "--strategy", "iindex", "--out", idx)
    code, out, err = run(
        capsys, "query", "--graph", graph, "--directed", "--attrs", attrs,
        "--index", idx, "--agg", "count", "--verify",
    )
    assert code == EXIT_OK
    assert "verify: 0 mismatches" in err
    got = {label: int(v) for label, v in parse_csv(out)[1]}
    assert got["A"] == 1 and got["F"] == 6  # source vs deepest sink


# -- diag ----------------------------------------------------------------------


def test_diag_validate_ok(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    code, out, _ = run(
        capsys, "diag", "--graph", graph, "--index", idx, "--validate",
    )
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["validate"]["ok"] is True
    assert doc["validate"]["vertices_checked"] == 6


def test_diag_validate_catches_corruption(demo_files, tmp_path, capsys):
    idx_path, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    index = load_index(idx_path)
    index.links[0] = index.links[0] + [index.links[0][0]]
    save_index(index, idx_path)
    code, out, _ = run(
        capsys, "diag", "--graph", graph, "--index", idx_path, "--validate",
    )
    assert code == EXIT_VERIFY
    doc = json.loads(out)
    assert doc["validate"]["ok"] is False
    assert doc["validate"]["violations"]


def test_diag_size_report(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    code, out, _ = run(
        capsys, "diag", "--graph", graph, "--index", idx, "--size",
    )
    assert code == EXIT_OK
    size = json.loads(out)["size"]
    assert size["index_bytes"] > 0
    assert size["index_ratio"] == pytest.approx(
        size["index_bytes"] / size["graph_bytes"]
    )


def test_diag_jaccard_profile(demo_files, capsys):
    graph, _, _ = demo_files
    code, out, _ = run(
        capsys, "diag", "--graph", graph, "--jaccard", "--kmax", "2",
    )
    assert code == EXIT_OK
    rows = json.loads(out)["jaccard"]
    assert [r["k"] for r in rows] == [1, 2]
    assert all(0.0 <= r["mean_jaccard"] <= 1.0 for r in rows)


def test_diag_without_work_is_usage_error(demo_files, capsys):
    graph, _, _ = demo_files
    with pytest.raises(SystemExit) as exc:
        main(["diag", "--graph", str(graph)])
    assert exc.value.code == EXIT_USAGE


# -- update --------------------------------------------------------------------


def test_update_iindex_stream(dag_files, tmp_path, capsys):
    graph, attrs = dag_files
    idx = tmp_path / "dag.idx"
    run(capsys, "build", "--graph", graph, "--directed",
        "--window", "topological", "--strategy", "iindex", "--out", idx)
    ops = tmp_path / "ops.txt"
    ops.write_text("# grow then shrink\n+ B G\n+ A H\n- B G\n")
    new_graph = tmp_path / "updated.edges"
    code, out, err = run(
        capsys, "update", "--graph", graph, "--directed", "--index", idx,
        "--ops", ops, "--verify-each", "--save-graph", new_graph,
    )
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["applied"] == 3
    assert report["inserts"] == 2 and report["deletes"] == 1
    assert report["mismatches"] == 0
    assert [e["line"] for e in report["per_update"]] == [2, 3, 4]
    assert all(e["seconds"] >= 0 for e in report["per_update"])
    assert "verify: 0 mismatches" in err

    # the saved graph + saved index answer queries consistently
    code, _, err = run(
        capsys, "query", "--graph", new_graph, "--directed", "--attrs", attrs,
        "--index", idx, "--agg", "sum:value", "--verify",
    )
    assert code == EXIT_OK
    assert "verify: 0 mismatches" in err


def test_update_dbindex_insert_then_delete(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, attrs, _ = demo_files
    ops = tmp_path / "ops.txt"
    ops.write_text("+ B E\n- A C\n")  # the delete forces a reorganize
    new_graph = tmp_path / "updated.edges"
    out_idx = tmp_path / "updated.idx"
    code, out, err = run(
        capsys, "update", "--graph", graph, "--index", idx, "--ops", ops,
        "--verify-each", "--out", out_idx, "--save-graph", new_graph,
    )
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["applied"] == 2
    assert report["reorganizes"] == 1
    assert report["updates_logged"] == 0  # reorganize resets the log
    assert report["per_update"][0]["reorganized"] is False
    assert report["per_update"][1]["reorganized"] is True
    assert report["mismatches"] == 0
    # original index file untouched when --out is given
    assert load_index(idx).update_log.updates == 0

    code, _, err = run(
        capsys, "query", "--graph", new_graph, "--attrs", attrs,
        "--index", out_idx, "--agg", "max:value", "--verify",
    )
    assert code == EXIT_OK
    assert "verify: 0 mismatches" in err


def test_update_reorganize_threshold_triggers(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    ops = tmp_path / "ops.txt"
    ops.write_text("+ B E\n+ D F\n")
    code, out, _ = run(
        capsys, "update", "--graph", graph, "--index", idx, "--ops", ops,
        "--reorganize-threshold", "1",
    )
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["reorganizes"] == 2  # every insert hits the threshold
    assert report["updates_logged"] == 0


def test_update_stdin_stream(demo_files, tmp_path, capsys, monkeypatch):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    monkeypatch.setattr("sys.stdin", io.StringIO("+ E F\n"))
    code, out, _ = run(
        capsys, "update", "--graph", graph, "--index", idx, "--ops", "-",
    )
    assert code == EXIT_OK
    assert json.loads(out)["applied"] == 1
    assert load_index(idx).update_log.updates == 1  # overwrote --index


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("plus A B", "line 1"),        # malformed operation
        ("+ A", "line 1"),             # missing endpoint
        ("+ A Z", "line 1"),           # unknown label
        ("+ A B", "line 1"),           # edge already exists
        ("- B C", "line 1"),           # edge never existed
    ],
)
def test_update_bad_lines_name_the_line(
    demo_files, tmp_path, capsys, line, fragment
):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    ops = tmp_path / "ops.txt"
    ops.write_text(line + "\n")
    code, _, err = run(
        capsys, "update", "--graph", graph, "--index", idx, "--ops", ops,
    )
    assert code == EXIT_DATA
    assert fragment in err


def test_update_cycle_insert_is_a_data_error(dag_files, tmp_path, capsys):
    graph, _ = dag_files
    idx = tmp_path / "dag.idx"
    run(capsys, "build", "--graph", graph, "--directed",
        "--window", "topological", "--strategy", "iindex", "--out", idx)
    ops = tmp_path / "ops.txt"
    ops.write_text("+ F A\n")
    code, _, err = run(
        capsys, "update", "--graph", graph, "--directed",
        "--index", idx, "--ops", ops,
    )
    assert code == EXIT_DATA
    assert "cycle" in err and "line 1" in err


# -- bench ---------------------------------------------------------------------


def test_bench_single_graph_table(demo_files, capsys):
    graph, attrs, _ = demo_files
    code, out, _ = run(
        capsys, "bench", "--graph", graph, "--attrs", attrs, "--k", "1",
        "--strategies", "nonindexed,mc", "--reps", "2", "--agg", "sum:value",
        "--verify",
    )
    assert code == EXIT_OK
    assert "nonindexed" in out and "mc" in out
    assert "speedup" in out


def test_bench_single_graph_json(demo_files, capsys):
    graph, attrs, _ = demo_files
    code, out, _ = run(
        capsys, "bench", "--graph", graph, "--attrs", attrs, "--k", "1",
        "--strategies", "nonindexed,mc,emc", "--reps", "1", "--format", "json",
        "--k-cluster", "1",
    )
    # emc on k=1 is invalid; single-cell mode surfaces it as a data error
    assert code == EXIT_DATA

    code, out, _ = run(
        capsys, "bench", "--graph", graph, "--attrs", attrs, "--k", "2",
        "--strategies", "nonindexed,mc,emc", "--reps", "1", "--format", "json",
        "--k-cluster", "1", "--verify",
    )
    assert code == EXIT_OK
    report = json.loads(out)
    names = {row["evaluator"] for row in report["rows"]}
    assert names == {"nonindexed", "mc", "emc"}
    for row in report["rows"]:
        assert row["mismatches"] == 0


def test_bench_sweep_csv(capsys):
    code, out, _ = run(
        capsys, "bench", "--n", "60,90", "--d", "3", "--k", "1,2",
        "--strategies", "nonindexed,emc", "--reps", "1", "--seed", "4",
    )
    assert code == EXIT_OK
    header, rows = parse_csv(out)
    assert header[:5] == ["n", "d", "k", "window", "strategy"]
    # emc rows exist only for k=2; nonindexed covers both k values
    combos = {(r[0], r[2], r[4]) for r in rows}
    assert ("60", "1", "nonindexed") in combos
    assert ("60", "2", "emc") in combos
    assert ("60", "1", "emc") not in combos
    assert len(rows) == 2 * 2 + 2  # 2 graphs x (2 nonindexed + 1 emc)
    speedup_col = header.index("speedup")
    for r in rows:
        if r[4] == "emc":
            assert float(r[speedup_col]) > 0


def test_bench_sweep_topological(capsys):
    code, out, _ = run(
        capsys, "bench", "--n", "50", "--d", "3", "--window", "topological",
        "--strategies", "nonindexed,mc,iindex", "--reps", "1", "--agg", "count",
        "--verify",
    )
    assert code == EXIT_OK
    header, rows = parse_csv(out)
    strategies = {r[4] for r in rows}
    assert strategies == {"nonindexed", "mc", "iindex"}
    mism = header.index("mismatches")
    assert all(r[mism] == "0" for r in rows)


def test_bench_requires_graph_or_sweep_lists(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--n", "50"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["bench"])
    assert exc.value.code == EXIT_USAGE


# -- top-level parsing -----------------------------------------------------------


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["ingest", "--graph", "x", "--frobnicate"])
    assert exc.value.code == EXIT_USAGE


def test_attrs_not_matching_graph_is_a_data_error(demo_files, tmp_path, capsys):
    idx, _ = build_demo_index(demo_files, tmp_path, capsys)
    graph, _, _ = demo_files
    bad_attrs = tmp_path / "bad.csv"
    bad_attrs.write_text("vertex,value\nA,1\nZZZ,2\n")
    code, _, err = run(
        capsys, "query", "--graph", graph, "--attrs", bad_attrs,
        "--index", idx, "--agg", "sum:value",
    )
    assert code == EXIT_DATA
    assert "ZZZ" in err
