import pytest

from nsbenders import harness
from nsbenders.formulations import FpVariant
from nsbenders.harness import (
    AGGREGATE_COLUMNS,
    INSTANCE_COLUMNS,
    ExperimentConfig,
    ExperimentError,
    aggregate,
    aggregate_gaps,
    config_from_dict,
    load_config,
    parse_algorithm,
    read_table,
    run_experiment,
)

TINY = dict(nodes=6, clouds=3, chain_length=[1, 2], function_pool=3, functions_per_cloud=2,
            cloud_capacity=[10, 40], link_capacity=[5, 30], rates=[1, 10], radius=0.6, removal_prob=0.3)


def tiny_config(**kw) -> ExperimentConfig:
    data = dict(name="t", services=[1, 2], seeds=3, generator=TINY,
                algorithms=["cbd-fp", "cbd-fp2@2", "direct", "lpor", "lpdr"], gap=True)
    data.update(kw)
    return config_from_dict(data)


def test_parse_algorithm():
    assert parse_algorithm("cbd-fp2@5") == ("cbd", FpVariant.FP_II, 5)
    assert parse_algorithm("cbd-fp")[2] >= 10**9
    assert parse_algorithm("lpdr") == ("lpdr", None, 0)
    for bad in ("cbd-fp3", "cbd-fp@0", "simplex"):
        with pytest.raises(ExperimentError):
            parse_algorithm(bad)


@pytest.mark.parametrize(
    "data, fragment",
    [
        (dict(algorithms=[]), "no algorithms selected"),
        (dict(backend="gurobi"), "unknown backend"),
        (dict(colour="red"), "unknown experiment settings"),
        (dict(generator={"nodez": 3}), "unknown generator settings"),
        (dict(generator={"rates": [5, 1]}), "empty range"),
        (dict(workers=0), "workers"),
    ],
)
def test_bad_configs(data, fragment):
    with pytest.raises(ExperimentError, match=fragment):
        config_from_dict(data)


def test_load_config_errors(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{oops")
    with pytest.raises(ExperimentError, match="invalid JSON"):
        load_config(path)
    path.write_text('{"services": [3], "seeds": 2}')
    cfg = load_config(path)
    assert cfg.instances() == [(3, 0), (3, 1)]


def test_outputs_and_reaggregation(tmp_path):
    out = run_experiment(tiny_config(), tmp_path)
    rows = read_table(tmp_path / "instances.csv")
    assert list(rows[0]) == INSTANCE_COLUMNS
    assert len(rows) == 2 * 3 * 5
    agg_file = read_table(tmp_path / "aggregate.csv")
    assert list(agg_file[0]) == AGGREGATE_COLUMNS
    recomputed = [{k: str(v) for k, v in r.items()} for r in aggregate(rows)]
    assert recomputed == agg_file
    gaps = [{k: str(v) for k, v in r.items()} for r in aggregate_gaps(read_table(tmp_path / "gap.csv"))]
    assert gaps == read_table(tmp_path / "gap_aggregate.csv")
    assert all(r["error"] == "" for r in rows)
    # exact algorithms agree wherever both report an optimum
    by = {}
    for r in out.rows:
        by.setdefault((r["services"], r["seed"]), {})[r["algorithm"]] = r
    for algs in by.values():
        assert int(algs["direct"]["feasible"]) == int(algs["cbd-fp"]["feasible"])
        if int(algs["direct"]["feasible"]):
            assert float(algs["cbd-fp"]["objective"]) == pytest.approx(float(algs["direct"]["objective"]))


def test_common_feasible_average():
    rows = [
        dict(experiment="e", services="1", seed=str(s), algorithm=a, status="x", feasible=f, objective=o,
             iterations="", cuts="", seconds="1", error="")
        for s, a, f, o in [(0, "a", "1", "4"), (0, "b", "1", "6"), (1, "a", "1", "10"), (1, "b", "0", "")]
    ]
    agg = {r["algorithm"]: r for r in aggregate(rows)}
    assert agg["a"]["common_feasible"] == 1 and agg["a"]["avg_objective_common"] == "4"
    assert agg["b"]["feasible"] == 1 and agg["b"]["avg_objective_common"] == "6"


def test_errors_become_rows(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("solver exploded\nbadly")

    monkeypatch.setattr(harness, "solve_cbd", boom)
    out = run_experiment(tiny_config(services=[1], seeds=2, algorithms=["cbd-fp1", "direct"], gap=False), tmp_path)
    errs = [r for r in out.rows if r["algorithm"] == "cbd-fp1"]
    assert all(r["status"] == "error" and r["error"] == "RuntimeError: solver exploded badly" for r in errs)
    agg = {r["algorithm"]: r for r in out.aggregate}
    assert agg["cbd-fp1"]["errors"] == 2 and agg["direct"]["errors"] == 0
    assert not (tmp_path / "gap.csv").exists()


def test_parallel_run_matches_serial(tmp_path):
    cfg = tiny_config(algorithms=["cbd-fp1", "lpdr"], gap=False)
    serial = run_experiment(cfg, tmp_path / "a")
    parallel = run_experiment(config_from_dict({**cfg.__dict__, "workers": 2}), tmp_path / "b")
    strip = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]
    assert strip(serial.rows) == strip(parallel.rows)


def test_unlimited_links_batch_needs_one_iteration(tmp_path):
    cfg = tiny_config(seeds=6, algorithms=["cbd-fp1", "cbd-fp2"], gap=True,
                      generator={**TINY, "link_capacity": None})
    out = run_experiment(cfg, tmp_path)
    assert {r["iterations"] for r in out.rows} == {"1"}
    for r in out.gap_rows:
        if r["gap_fp1"]:
            assert 0.0 <= float(r["gap_fp1"]) <= float(r["gap_fp2"]) + 1e-9


def test_gap_rows_are_ordered(tmp_path):
    out = run_experiment(tiny_config(seeds=8, algorithms=["cbd-fp2"]), tmp_path)
    for r in out.gap_rows:
        if r["gap_fp1"]:
            assert 0.0 <= float(r["gap_fp1"]) <= float(r["gap_fp2"]) + 1e-9


def test_sparse_directed_batch_gap_averages(tmp_path):
    """One-way links make reachability bind, so both strengthenings close part of the gap."""
    cfg = ExperimentConfig(name="sparse", services=(5,), seeds=10, algorithms=("cbd-fp2",), gap=True,
                           backend="highs", generator={"radius": 0.3, "removal_prob": 0.4})
    out = run_experiment(cfg, tmp_path)
    (agg,) = out.gap_aggregate
    assert int(agg["defined"]) >= 1
    assert 0.0 < float(agg["avg_gap_fp1"]) <= float(agg["avg_gap_fp2"]) <= 1.0
