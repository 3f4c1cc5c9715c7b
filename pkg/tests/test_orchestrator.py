import numpy as np
import pytest

from pvtsizing.agent import AgentConfig
from pvtsizing.config import SyntheticSpec
from pvtsizing.orchestrator import (
    CheckpointError,
    MultiTaskRun,
    RunConfig,
    build_summary,
    load_checkpoint,
    run_robustanalog,
    save_checkpoint,
)
from pvtsizing.trace import PHASES, reconcile


# needs a couple of re-prunings within the first 200 episodes
HARDER = SyntheticSpec(seed=0, n_params=6, n_metrics=4, difficulty=1.0)


@pytest.fixture(scope="module")
def harder():
    return HARDER.build()


def records(result, kind):
    return [r for r in result.trace.records if r["kind"] == kind]


def test_first_task_set_is_nominal_only(easy_benchmark):
    run = MultiTaskRun(easy_benchmark, "robustanalog", RunConfig(seed=0))
    assert run.agent.active_tasks == [easy_benchmark.nominal_index]
    first = run.trace.records[0]
    assert first["kind"] == "iteration" and first["tasks"] == [easy_benchmark.nominal_index]


def test_noprune_starts_on_every_corner(easy_benchmark):
    run = MultiTaskRun(easy_benchmark, "mtl-noprune", RunConfig(seed=0))
    assert run.agent.active_tasks == list(range(easy_benchmark.n_corners))


def test_corner_invariant_benchmark_needs_no_pruning():
    bench = SyntheticSpec(seed=1, difficulty=0.0).build()
    result = run_robustanalog(bench, RunConfig(seed=0))
    assert result.passed
    assert [r["iteration"] for r in records(result, "iteration")] == [0]
    checks = records(result, "full_check")
    assert len(checks) == 1 and checks[0]["passed"]


def test_easy_benchmark_solved_within_fifteen_thousand_sims(easy_runs):
    sims = [r.trace.sims for r in easy_runs.values()]
    ok = [r.passed and r.trace.sims <= 15_000 for r in easy_runs.values()]
    assert sum(ok) >= 4, sims


def test_passing_sizing_really_passes_every_corner(easy_runs, easy_benchmark):
    for result in easy_runs.values():
        if result.passed:
            _, _, big_r = easy_benchmark.rewards(result.sizing)
            assert np.all(big_r == 0.2)


def test_full_checks_follow_subset_passes_only(easy_runs):
    for result in easy_runs.values():
        recs = result.trace.records
        for i, rec in enumerate(recs):
            if rec["kind"] != "full_check":
                continue
            if rec["reason"] == "subset_pass":
                prev = recs[i - 1]
                assert prev["kind"] == "eval" and prev["passed"]
            else:
                assert rec["reason"] == "stall"


def test_simulation_counts_reconcile(easy_runs):
    for result in easy_runs.values():
        counts = reconcile(result.trace.records)
        assert counts["total"] == result.trace.sims == sum(result.trace.phase_counts.values())
        assert all(counts[p] == result.trace.phase_counts[p] for p in PHASES)
        sims = [r["sims"] for r in result.trace.records]
        assert sims == sorted(sims)


def test_full_check_costs_exactly_the_full_set(harder):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=0))
    run.run(200)
    for rec in records(run.result(), "full_check"):
        assert rec["n_corners"] == harder.n_corners


def test_weights_survive_retasking(harder):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=0))
    agent = run.agent
    trained = {}
    original = agent.train_step

    def tracked(batch):
        out = original(batch)
        trained["actor"] = agent.actor.flatten().copy()
        trained["critic"] = agent.critic.flatten().copy()
        return out

    agent.train_step = tracked
    seen_iterations = {0}
    for _ in range(300):
        if run.done:
            break
        trained.clear()
        before = agent.actor.flatten().copy()
        run.step()
        assert run.agent is agent
        expected = trained.get("actor", before)
        assert np.array_equal(agent.actor.flatten(), expected)
        if "critic" in trained:
            assert np.array_equal(agent.critic.flatten(), trained["critic"])
        seen_iterations.add(run.iteration)
    assert len(seen_iterations) >= 2


def test_retasking_keeps_buffers_of_retained_tasks(harder):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=0))
    nominal = harder.nominal_index
    while run.iteration == 0 and not run.done:
        nominal_buf = run.agent.buffers[nominal]
        run.step()
    assert run.agent.buffers[nominal] is nominal_buf
    rec = records(run.result(), "iteration")[-1]
    assert rec["tasks"][0] == nominal
    if rec["fresh"]:
        assert run.agent.warmup_until == run.episode + run.config.agent.retask_warmup


def test_budget_exhaustion_is_a_result_not_an_exception(harder):
    result = run_robustanalog(harder, RunConfig(seed=0, budget=150))
    assert not result.passed and result.stop_reason == "budget"
    assert result.trace.sims <= 150
    assert result.trace.records[-1]["kind"] == "end"


def test_max_iterations_stop(harder):
    cfg = RunConfig(seed=0, max_iterations=1, episode_cap=60)
    result = run_robustanalog(harder, cfg)
    assert result.stop_reason in ("max_iterations", "passed")
    assert all(r["iteration"] == 0 for r in records(result, "iteration"))


def test_stall_forces_a_full_check(harder):
    cfg = RunConfig(seed=0, episode_cap=60, agent=AgentConfig(eval_every=10_000))
    run = MultiTaskRun(harder, "robustanalog", cfg)
    run.run(61)
    checks = records(run.result(), "full_check")
    assert checks and checks[0]["reason"] == "stall"


def test_same_seed_same_trace(easy_benchmark):
    a = MultiTaskRun(easy_benchmark, "robustanalog", RunConfig(seed=3)).run(150)
    b = MultiTaskRun(easy_benchmark, "robustanalog", RunConfig(seed=3)).run(150)
    assert a.trace.records == b.trace.records


def test_summary_fields(easy_runs, easy_benchmark):
    summary = build_summary(easy_runs[0], easy_benchmark)
    assert summary["total_sims"] == easy_runs[0].trace.sims
    assert summary["task_sets"][0] == [easy_benchmark.nominal_index]
    if summary["passed"]:
        assert set(summary["sizing"]) == set(easy_benchmark.space.names)


def test_unknown_method_rejected(easy_benchmark):
    with pytest.raises(ValueError, match="unknown method"):
        MultiTaskRun(easy_benchmark, "simulated-annealing")


# -- checkpoints ---------------------------------------------------------------------

def test_checkpoint_save_load_save_is_byte_identical(harder, tmp_path):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=2))
    run.run(120)
    save_checkpoint(run, tmp_path / "a.ckpt")
    again = load_checkpoint(tmp_path / "a.ckpt", harder)
    save_checkpoint(again, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    assert np.array_equal(again.agent.actor.flatten(), run.agent.actor.flatten())
    assert np.array_equal(again.agent.adapters, run.agent.adapters)


def test_resume_replays_identically(harder, tmp_path):
    straight = MultiTaskRun(harder, "robustanalog", RunConfig(seed=1))
    straight.run(200)

    first = MultiTaskRun(harder, "robustanalog", RunConfig(seed=1))
    first.run(100)
    save_checkpoint(first, tmp_path / "mid.ckpt")
    resumed = load_checkpoint(tmp_path / "mid.ckpt", harder)
    resumed.run(100)

    assert straight.iteration >= 1
    assert resumed.trace.records == straight.trace.records
    assert np.array_equal(resumed.agent.actor.flatten(), straight.agent.actor.flatten())


def test_corrupted_checkpoint_rejected(harder, tmp_path):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=0))
    run.run(60)
    path = tmp_path / "c.ckpt"
    save_checkpoint(run, path)
    blob = bytearray(path.read_bytes())
    blob[-10] ^= 0x01
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(path, harder)


def test_truncated_checkpoint_rejected(harder, tmp_path):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=0))
    run.run(60)
    path = tmp_path / "t.ckpt"
    save_checkpoint(run, path)
    path.write_bytes(path.read_bytes()[:-100])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path, harder)


def test_checkpoint_for_other_benchmark_rejected(harder, easy_benchmark, tmp_path):
    run = MultiTaskRun(harder, "robustanalog", RunConfig(seed=0))
    run.run(5)
    save_checkpoint(run, tmp_path / "x.ckpt")
    with pytest.raises(CheckpointError, match="benchmark"):
        load_checkpoint(tmp_path / "x.ckpt", easy_benchmark)


def test_checkpoint_schema_mismatch(harder, tmp_path):
    path = tmp_path / "v.ckpt"
    path.write_bytes(b'{"format": "pvtsizing-checkpoint", "schema": 99}\n{}')
    with pytest.raises(CheckpointError, match="schema"):
        load_checkpoint(path, harder)
