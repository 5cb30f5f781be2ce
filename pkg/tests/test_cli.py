import json
import subprocess
import sys

import numpy as np
import pytest

from pprsr.cli import RunReport, main
from pprsr.graph import GraphSpec, dump_edge_list

from suite import random_ergodic

SWAP_TSV = "nodes\t2\n0\t1\t1.0\n1\t0\t1.0\n"


@pytest.fixture
def swap(tmp_path):
    path = tmp_path / "swap.tsv"
    path.write_text(SWAP_TSV)
    return str(path)


@pytest.fixture
def random50(tmp_path):
    P = random_ergodic(50, np.random.default_rng(50)).dense()
    edges = tuple((i, j, P[i, j]) for i in range(50) for j in range(50) if P[i, j] > 0)
    path = tmp_path / "rand50.tsv"
    path.write_text(dump_edge_list(GraphSpec(50, edges)))
    return str(path)


@pytest.fixture
def hop_csv(tmp_path):
    path = tmp_path / "items.csv"
    path.write_text("A,0.8,0.6,0\nB,0,0.6,0.8\nC,0.6,-0.8,0\n")
    q = tmp_path / "q.txt"
    q.write_text("1 0 0\n")
    return str(path), str(q)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def report(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


# --- ppr --------------------------------------------------------------------


def test_ppr_swap(capsys, swap):
    code, rep = report(capsys, "ppr", swap, "--alpha", "0.5", "--restart-node", "0")
    assert code == 0 and rep["command"] == "ppr"
    np.testing.assert_allclose(rep["outputs"]["pi"], [2 / 3, 1 / 3], atol=1e-10)
    assert rep["outputs"]["converged"] and len(rep["inputs"]["graph"]["sha256"]) == 64


def test_ppr_alpha_zero_returns_restart(capsys, swap, tmp_path):
    r = tmp_path / "restart.txt"
    r.write_text("0.3\n0.7\n")
    code, rep = report(capsys, "ppr", swap, "--alpha", "0", "--restart-file", str(r))
    assert code == 0
    np.testing.assert_allclose(rep["outputs"]["pi"], [0.3, 0.7], atol=1e-15)
    assert "restart" in rep["inputs"]


def test_ppr_exact_and_power_agree(capsys, random50):
    _, a = report(capsys, "ppr", random50, "--alpha", "0.85", "--restart-node", "3")
    _, b = report(capsys, "ppr", random50, "--alpha", "0.85", "--restart-node", "3", "--exact")
    assert b["outputs"]["iterations"] == 0
    assert np.abs(np.subtract(a["outputs"]["pi"], b["outputs"]["pi"])).sum() <= 10 * 1e-10


def test_ppr_non_convergence_exit_3(capsys, random50):
    code, rep = report(capsys, "ppr", random50, "--alpha", "0.99", "--max-iters", "2")
    assert code == 3 and rep["outputs"]["converged"] is False


def test_ppr_csv(capsys, swap):
    code, out = run(capsys, "ppr", swap, "--alpha", "0.5", "--restart-node", "0", "--exact", "--csv")
    rows = [line.split(",") for line in out.splitlines()]
    assert code == 0 and [int(i) for i, _ in rows] == [0, 1]
    np.testing.assert_allclose([float(v) for _, v in rows], [2 / 3, 1 / 3], atol=1e-15)


def test_ppr_dangling_teleport(capsys, tmp_path):
    g = tmp_path / "g.tsv"
    g.write_text("nodes\t3\n0\t1\t1\n1\t0\t1\n")
    code, rep = report(capsys, "ppr", str(g), "--restart-node", "2", "--dangling", "teleport", "--exact")
    assert code == 0 and abs(sum(rep["outputs"]["pi"]) - 1) <= 1e-12


def test_output_file(capsys, swap, tmp_path):
    out = tmp_path / "report.json"
    code, printed = run(capsys, "ppr", swap, "--alpha", "0.5", "-o", str(out))
    assert code == 0 and printed == ""
    assert json.loads(out.read_text())["command"] == "ppr"


# --- errors -----------------------------------------------------------------


def test_parse_error_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("nodes\t2\n0\t1\n")
    assert main(["ppr", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path):
    assert main(["ppr", str(tmp_path / "nope.tsv")]) == 1


def test_usage_error_exit_1(swap):
    with pytest.raises(SystemExit) as exc:
        main(["ppr", swap, "--alpha", "abc"])
    assert exc.value.code == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["ppr", "{g}", "--alpha", "1.0"],
        ["ppr", "{g}", "--restart-node", "7"],
        ["sr", "{g}", "--gamma", "1.2"],
        ["sr", "{g}", "--gamma", "0.5", "--method", "td", "--eta", "0"],
    ],
)
def test_invariant_violation_exit_2(swap, argv):
    assert main([a.format(g=swap) for a in argv]) == 2


def test_bad_restart_mass_exit_2(swap, tmp_path):
    r = tmp_path / "r.txt"
    r.write_text("0.5 0.6")
    assert main(["ppr", swap, "--restart-file", str(r)]) == 2


# --- sr ---------------------------------------------------------------------


def test_sr_gamma_zero_identity(capsys, swap):
    _, rep = report(capsys, "sr", swap, "--gamma", "0")
    assert rep["outputs"]["M"] == [[1.0, 0.0], [0.0, 1.0]]


def test_sr_invert_swap(capsys, swap, tmp_path):
    r = tmp_path / "r.txt"
    r.write_text("1\n0\n")
    code, rep = report(capsys, "sr", swap, "--gamma", "0.5", "--reward-file", str(r))
    assert code == 0
    np.testing.assert_allclose(rep["outputs"]["M"], [[4 / 3, 2 / 3], [2 / 3, 4 / 3]], atol=1e-15)
    np.testing.assert_allclose(rep["outputs"]["V"], [4 / 3, 2 / 3], atol=1e-15)


def test_sr_series_tail_bound(capsys, random50):
    K, g = 30, 0.7
    _, s = report(capsys, "sr", random50, "--gamma", str(g), "--method", "series", "--horizon", str(K))
    _, m = report(capsys, "sr", random50, "--gamma", str(g))
    assert np.abs(np.subtract(s["outputs"]["M"], m["outputs"]["M"])).max() <= g ** (K + 1) / (1 - g)


def test_sr_td_echoes_config(capsys, swap):
    _, rep = report(capsys, "sr", swap, "--gamma", "0.5", "--method", "td", "--steps", "100", "--seed", "3")
    assert rep["config"] == {"gamma": 0.5, "method": "td", "eta": 0.05, "steps": 100, "seed": 3}


def test_sr_csv_without_reward_is_usage_error(swap):
    assert main(["sr", swap, "--gamma", "0.5", "--csv"]) == 1


# --- verify -----------------------------------------------------------------


def test_verify_swap(capsys, swap):
    code, rep = report(capsys, "verify", swap, "--alpha", "0.5", "--restart-node", "0")
    out = rep["outputs"]
    assert code == 0 and out["passed"] and out["residual_l1"] <= 1e-10
    assert set(out) == {
        "n", "alpha", "residual_l1", "residual_linf", "iterative_residual_l1", "tolerance", "passed",
    }


def test_verify_alpha_zero(capsys, swap):
    _, rep = report(capsys, "verify", swap, "--alpha", "0", "--restart-node", "1")
    assert rep["outputs"]["residual_l1"] <= 1e-15 and rep["outputs"]["residual_linf"] <= 1e-15


def test_verify_random50(capsys, random50):
    code, rep = report(capsys, "verify", random50, "--alpha", "0.9", "--restart-node", "0", "--tol", "1e-8")
    assert code == 0 and rep["outputs"]["passed"]


def test_verify_failure_exit_2(capsys, random50):
    code, rep = report(capsys, "verify", random50, "--alpha", "0.99", "--tol", "0")
    assert rep["outputs"]["passed"] == (rep["outputs"]["residual_l1"] <= 0)
    assert code == (0 if rep["outputs"]["passed"] else 2)


# --- gridworld --------------------------------------------------------------


def test_gridworld_1x3(capsys):
    _, rep = report(capsys, "gridworld", "--width", "3", "--height", "1")
    assert rep["outputs"]["P"] == [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]]
    assert rep["outputs"]["cells"] == [[0, 0], [0, 1], [0, 2]]


def test_gridworld_1x1(capsys):
    _, rep = report(capsys, "gridworld", "--width", "1", "--height", "1")
    assert rep["outputs"]["P"] == [[1.0]]


def test_gridworld_2x2(capsys):
    _, rep = report(capsys, "gridworld", "--width", "2", "--height", "2")
    for row in rep["outputs"]["P"]:
        assert sorted(row) == [0, 0, 0.5, 0.5]


def test_gridworld_obstacles_and_emit(capsys, tmp_path):
    obs = tmp_path / "obs.txt"
    obs.write_text("# centre\n1 1\n")
    _, g = report(capsys, "gridworld", "--width", "3", "--height", "3", "--obstacles-file", str(obs))
    assert len(g["outputs"]["cells"]) == 8 and [1, 1] not in g["outputs"]["cells"]
    _, s = report(capsys, "gridworld", "--width", "3", "--height", "3", "--emit", "sr", "--gamma", "0.5")
    np.testing.assert_allclose(np.sum(s["outputs"]["M"], axis=1), 2.0, atol=1e-12)
    _, p = report(
        capsys, "gridworld", "--width", "4", "--height", "4", "--emit", "ppr",
        "--alpha", "0.9", "--restart-node", "0",
    )
    assert abs(sum(p["outputs"]["pi"]) - 1) <= 1e-12


def test_gridworld_disconnected_exit_2(tmp_path):
    obs = tmp_path / "obs.txt"
    obs.write_text("0 1\n")
    assert main(["gridworld", "--width", "3", "--height", "1", "--obstacles-file", str(obs)]) == 2


# --- retrieve ---------------------------------------------------------------


def test_retrieve_two_hop_compare(capsys, hop_csv):
    items, q = hop_csv
    code, rep = report(
        capsys, "retrieve", items, "--labels", "--query-file", q,
        "--alpha", "0.5", "--k-graph", "2", "--k", "2", "--compare",
    )
    out = rep["outputs"]
    assert code == 0
    assert [r["label"] for r in out["ppr"]] == ["A", "B"]
    assert [r["label"] for r in out["cosine"]] == ["A", "C"]
    assert out["rank_improvements"] == [1]


def test_retrieve_alpha_zero_no_improvement_among_positive(capsys, hop_csv):
    items, q = hop_csv
    _, rep = report(capsys, "retrieve", items, "--labels", "--query-file", q, "--alpha", "0", "--k-graph", "2", "--compare")
    positive = {r["index"] for r in rep["outputs"]["cosine"] if r["score"] > 0}
    assert not positive & set(rep["outputs"]["rank_improvements"])


def test_retrieve_single_item(capsys, tmp_path):
    f = tmp_path / "one.csv"
    f.write_text("1,2\n")
    code, rep = report(capsys, "retrieve", str(f), "--query-index", "0", "--k-graph", "1", "--compare")
    assert code == 0 and rep["outputs"]["ppr"] == [{"index": 0, "score": 1.0}]
    assert rep["outputs"]["rank_improvements"] == []


def test_retrieve_needs_query(hop_csv):
    assert main(["retrieve", hop_csv[0], "--labels"]) == 1


# --- report -----------------------------------------------------------------


def test_report_round_trip(capsys, swap):
    _, out = run(capsys, "verify", swap, "--alpha", "0.5")
    rep = RunReport.from_json(out)
    assert rep.to_json() == out


def test_console_script_entry_point(swap):
    proc = subprocess.run(
        [sys.executable, "-m", "pprsr.cli", "ppr", swap, "--alpha", "0.5", "--restart-node", "0", "--exact"],
        capture_output=True, text=True, check=True,
    )
    np.testing.assert_allclose(json.loads(proc.stdout)["outputs"]["pi"], [2 / 3, 1 / 3], atol=1e-15)
