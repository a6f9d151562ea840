from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from avdse.design_space import Constraints, DesignPoint, DesignSpace, enumerate_space, hardware_cost
from avdse.memory import MemoryRecord
from avdse.search import (
    ExhaustedSpaceError,
    ExhaustiveStrategy,
    GAParams,
    GeneticStrategy,
    GuidedStrategy,
    LLMStrategy,
    RandomStrategy,
    ScriptedBackend,
    UnparseableResponseError,
    assemble_prompts,
    genetic_step,
    guided_rules,
    make_strategy,
    parse_llm_proposal,
)
from avdse.search.genetic import crossover, mutate
from avdse.search.guided import estimate_nav_time, predicted_dominated
from avdse.search.llm import FORMAT_REMINDER, REFERENCE_HEADER, REQUEST_SENTENCE, BackendError, render_point

from records import make_record
from transcripts import AGENT_OUTPUT

C = Constraints()


def truth_record(it: int, p: DesignPoint, metrics, rationale: str = "") -> MemoryRecord:
    status = "navigation_completed" if metrics.goal_reached else "timeout"
    return MemoryRecord(it, p, metrics, frozenset(), {"status": status}, rationale)


def strictly_dominates(a, b) -> bool:
    """a dominates b on cost and every recorded metric (lower is better; control rate higher is better)."""
    ka = (a.hw_cost, a.nav_time_s, -a.ctrl_rate_hz, a.deviation_score if a.deviation_score is not None else np.inf)
    kb = (b.hw_cost, b.nav_time_s, -b.ctrl_rate_hz, b.deviation_score if b.deviation_score is not None else np.inf)
    return all(x <= y for x, y in zip(ka, kb)) and any(x < y for x, y in zip(ka, kb))


# ---------------------------------------------------------------- GA


def test_crossover_example(space):
    child = crossover((2, 1, 0), (27, 4, 1), 1)
    assert child == (2, 4, 1)
    assert space.point_at(child) == DesignPoint(3, 2.1, 14)


def test_crossover_rejects_bad_cut():
    with pytest.raises(ValueError):
        crossover((0, 0, 0), (1, 1, 1), 4)


def test_mutation_on_single_value_axes_is_identity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert mutate((0, 0, 0), (1, 1, 1), 1.0, rng) == (0, 0, 0)


def test_mutation_with_p_one_changes_every_multi_valued_gene():
    rng = np.random.default_rng(0)
    for _ in range(200):
        g = (int(rng.integers(28)), int(rng.integers(5)), int(rng.integers(2)))
        m = mutate(g, (28, 5, 2), 1.0, rng)
        assert all(a != b for a, b in zip(g, m))
        assert all(0 <= x < n for x, n in zip(m, (28, 5, 2)))


def test_genetic_step_degenerate_space_reproduces_the_only_point():
    space = DesignSpace((4,), (1.2,), (14,))
    p = DesignPoint(4, 1.2, 14)
    nxt = genetic_step([(p, -10.0)] * 3, GAParams(p_mut=1.0), np.random.default_rng(3), space)
    assert nxt == [p] * 5


def test_genetic_step_elitism_keeps_best(space):
    rng = np.random.default_rng(11)
    for _ in range(50):
        pts = [space.point_at((int(rng.integers(28)), int(rng.integers(5)), int(rng.integers(2)))) for _ in range(5)]
        pop = [(p, float(-rng.uniform(100, 2000))) for p in pts]
        best = max(pop, key=lambda t: t[1])[0]
        nxt = genetic_step(pop, GAParams(), rng, space)
        assert len(nxt) == 5 and nxt[0] == best


def test_genetic_step_identical_parents_without_mutation(space):
    p = DesignPoint(12, 1.5, 7)
    nxt = genetic_step([(p, -300.0), (p, -300.0)], GAParams(p_mut=0.0), np.random.default_rng(5), space)
    assert nxt == [p] * 5


def test_genetic_step_rejects_bad_input(space):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        genetic_step([], GAParams(), rng, space)
    with pytest.raises(ValueError):
        genetic_step([(DesignPoint(1, 1.0, 7), float("nan"))], GAParams(), rng, space)


def test_ga_params_validation():
    with pytest.raises(ValueError):
        GAParams(p_mut=1.5)
    with pytest.raises(ValueError):
        GAParams(population=2, elitism=3)


# ---------------------------------------------------------------- shared properties


def _drive(strategy, space, metrics_of, seed: int, n: int) -> list[DesignPoint]:
    """Propose up to ``n`` points, feeding back the ground-truth metrics."""
    history: list[MemoryRecord] = []
    out = []
    for it in range(1, n + 1):
        try:
            prop = strategy.propose(history, None, space, seed)
        except ExhaustedSpaceError:
            break
        out.append(prop.point)
        if prop.terminate:
            break
        history.append(truth_record(it, prop.point, metrics_of[prop.point], prop.rationale))
    return out


@pytest.mark.parametrize("name", ["exhaustive", "random", "ga", "guided"])
def test_thousand_seeded_proposals_are_valid(name, space, truth):
    metrics_of = dict(truth[0])
    members = set(enumerate_space(space))
    proposals: list[DesignPoint] = []
    seed = 0
    while len(proposals) < 1000:
        seed += 1
        strat = make_strategy(name, constraints=C)
        proposals += _drive(strat, space, metrics_of, seed, min(60, 1000 - len(proposals)))
    assert len(proposals) == 1000
    assert all(p in members for p in proposals)


def test_thousand_llm_proposals_are_clamped_into_space(space):
    rng = np.random.default_rng(2)
    texts = [
        f"Next design point: ({rng.uniform(0, 40):.0f} cores, {rng.uniform(0.5, 3):.2f} GHz, {rng.uniform(1, 30):.0f} Hz LiDAR frequency)"
        for _ in range(1000)
    ]
    members = set(enumerate_space(space))
    strat = LLMStrategy(ScriptedBackend(texts), timeout_s=None)
    history: list[MemoryRecord] = []
    for _ in range(1000):
        assert strat.propose(history, None, space, 1).point in members


def test_no_repeat_proposals_for_non_llm_strategies(space, truth):
    metrics_of = dict(truth[0])
    for name in ("exhaustive", "random", "ga", "guided"):
        pts = _drive(make_strategy(name, constraints=C), space, metrics_of, 4, 100)
        body = pts[:-1] if name == "guided" else pts  # guided's terminating proposal repeats a known point
        assert len(set(body)) == len(body), name


# ---------------------------------------------------------------- baselines


def test_exhaustive_starts_at_first_point(space):
    assert ExhaustiveStrategy().propose([], None, space, 1).point == DesignPoint(1, 1.0, 7)


def test_exhaustive_raises_when_exhausted():
    space = DesignSpace((1,), (1.0,), (7,))
    hist = [make_record(1, (1, 1.0, 7), 300.0, 2.0)]
    with pytest.raises(ExhaustedSpaceError):
        ExhaustiveStrategy().propose(hist, None, space, 1)
    with pytest.raises(ExhaustedSpaceError):
        RandomStrategy().propose(hist, None, space, 1)
    with pytest.raises(ExhaustedSpaceError):
        GeneticStrategy().propose(hist, None, space, 1)


def test_random_is_reproducible(space, truth):
    metrics_of = dict(truth[0])
    a = _drive(RandomStrategy(), space, metrics_of, 7, 30)
    b = _drive(RandomStrategy(), space, metrics_of, 7, 30)
    c = _drive(RandomStrategy(), space, metrics_of, 8, 30)
    assert a == b
    assert a != c


def test_ga_is_reproducible(space, truth):
    metrics_of = dict(truth[0])
    assert _drive(GeneticStrategy(), space, metrics_of, 3, 40) == _drive(GeneticStrategy(), space, metrics_of, 3, 40)


# ---------------------------------------------------------------- guided


def test_guided_cpu_bound_increases_cores(space):
    last = make_record(1, (4, 1.2, 14), 1248.49, 0.911, flags=("cpu_bound",), reached=False, rationale="[init]")
    d = guided_rules(last, [last], space, C)
    assert d.point == DesignPoint(8, 1.2, 14)
    assert d.rule == "R1" and not d.terminate
    assert "cpu_bound" in d.rationale


def test_guided_second_firing_raises_frequency(space):
    first = make_record(1, (4, 1.2, 14), 1248.49, 0.911, flags=("cpu_bound",), reached=False, rationale="[init]")
    second = make_record(2, (8, 1.2, 14), 1200.0, 0.95, flags=("cpu_bound",), reached=False, rationale="[R1] more cores")
    d = guided_rules(second, [first, second], space, C)
    assert d.point == DesignPoint(8, 1.5, 14)


def test_guided_descends_from_dearer_feasible_point(space):
    cheap = make_record(1, (18, 1.8, 7), 165.04, 7.838, dev=0.002615)
    dear = make_record(2, (23, 1.5, 7), 171.13, 7.11, dev=0.002677)
    d = guided_rules(dear, [cheap, dear], space, C)
    assert d.rule == "R3"
    assert d.point not in {cheap.point, dear.point}
    # below the dearer point's cost, and also below the known cheaper point: anything between
    # 32.4 and 34.5 is predicted no faster than (18, 1.8, 7) and so would add nothing
    assert hardware_cost(d.point) < 32.4
    assert not predicted_dominated(d.point, [cheap, dear], C)


def test_guided_terminates_when_nothing_is_admissible():
    space = DesignSpace((1, 2), (1.0,), (7,))
    low = make_record(1, (1, 1.0, 7), 0.0, 0.5, reached=False)
    top = make_record(2, (2, 1.0, 7), 350.0, 1.5)
    d = guided_rules(top, [low, top], space, C)
    assert d.terminate and d.rule == "R4"
    assert d.point == DesignPoint(2, 1.0, 7)
    s = GuidedStrategy(constraints=C)
    assert s.propose([low, top], None, space, 1).terminate


def test_guided_frequency_bound_lowers_lidar(space):
    last = make_record(1, (16, 1.8, 14), 1800.0, 0.8, flags=("frequency_bound",), reached=False)
    # infeasible -> R1 first; R2 applies to a feasible flagged point
    feasible = make_record(1, (16, 1.8, 14), 190.0, 5.6, flags=("frequency_bound",))
    d = guided_rules(feasible, [feasible], space, C)
    assert d.rule == "R2" and d.point == DesignPoint(16, 1.8, 7)
    assert guided_rules(last, [last], space, C).rule == "R1"


def test_guided_initial_point_and_random_start(space):
    s = GuidedStrategy()
    s.params = s.params.__class__(initial_point=(4, 1.2, 14))
    assert s.propose([], None, space, 1).point == DesignPoint(4, 1.2, 14)
    a = GuidedStrategy().propose([], None, space, 9).point
    assert a == GuidedStrategy().propose([], None, space, 9).point


def test_estimate_nav_time_interpolates_in_inverse_cost():
    lo = make_record(1, (10, 1.0, 7), 400.0, 3.0)
    hi = make_record(2, (20, 1.0, 7), 200.0, 6.0)
    assert estimate_nav_time(DesignPoint(10, 1.0, 7), [lo, hi]) == pytest.approx(400.0)
    # 1/c is halfway between 1/10 and 1/20 at c = 40/3
    q = DesignPoint(8, 1.5, 7)  # cost 12
    w = (1 / 12 - 1 / 20) / (1 / 10 - 1 / 20)
    assert estimate_nav_time(q, [lo, hi]) == pytest.approx(w * 400 + (1 - w) * 200)
    assert estimate_nav_time(DesignPoint(5, 1.0, 7), [lo]) == pytest.approx(800.0)
    assert estimate_nav_time(DesignPoint(5, 1.0, 7), []) is None


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(data=st.data())
def test_guided_never_proposes_a_dominated_point(data, space, truth):
    """A known point re-proposed is dominated by no feasible record on any recorded metric;
    a new point is not matched or beaten by a feasible record on cost and its estimated time."""
    metrics_of = dict(truth[0])
    pts = data.draw(st.lists(st.sampled_from(enumerate_space(space)), min_size=1, max_size=12, unique=True))
    rules = data.draw(st.lists(st.sampled_from(["[init]", "[R1] x", "[R3] x"]), min_size=len(pts), max_size=len(pts)))
    flags = data.draw(st.lists(st.sampled_from([(), ("cpu_bound",), ("frequency_bound",)]), min_size=len(pts), max_size=len(pts)))
    history = [
        MemoryRecord(i + 1, p, metrics_of[p], frozenset(f), {"status": "navigation_completed" if metrics_of[p].goal_reached else "timeout"}, r)
        for i, (p, r, f) in enumerate(zip(pts, rules, flags))
    ]
    d = guided_rules(history[-1], history, space, C)
    assert d.point in space
    feasible = [r for r in history if r.feasible(C)]
    known = {r.point: r for r in history}
    if d.point in known:
        assert d.terminate
        assert not any(strictly_dominates(r.metrics, known[d.point].metrics) for r in feasible)
    else:
        assert not predicted_dominated(d.point, history, C)


# ---------------------------------------------------------------- LLM parsing and prompts

def test_parse_output_text_with_distractor_parentheses(space):
    p = parse_llm_proposal(AGENT_OUTPUT, space)
    assert p.point == DesignPoint(16, 1.8, 14)
    assert p.rationale == AGENT_OUTPUT


def test_parse_labeled_fields(space):
    text = "number_of_cores = 23, core_frequency = 1.5, lidar_frequency = 7"
    assert parse_llm_proposal(text, space).point == DesignPoint(23, 1.5, 7)


def test_parse_clamps_to_nearest_member(space):
    assert parse_llm_proposal("(16 cores, 1.75 GHz, 14 Hz)", space).point == DesignPoint(16, 1.8, 14)
    assert parse_llm_proposal("(40 cores, 3.0 GHz, 30 Hz)", space).point == DesignPoint(28, 2.1, 14)


def test_parse_other_surface_forms(space):
    assert parse_llm_proposal("try (1.5 GHz, 7 Hz, 12 cores) next", space).point == DesignPoint(12, 1.5, 7)
    assert parse_llm_proposal("Next: (12, 1.5, 14)", space).point == DesignPoint(12, 1.5, 14)


@pytest.mark.parametrize("text", ["", "more cores please", "(16 cores, 1.8 GHz)", "(1.8 GHz, 14 Hz)"])
def test_parse_unparseable(text, space):
    with pytest.raises(UnparseableResponseError):
        parse_llm_proposal(text, space)


@given(st.sampled_from(enumerate_space(DesignSpace())))
def test_render_round_trip(p):
    space = DesignSpace()
    assert parse_llm_proposal(f"Next design point: {render_point(p)}", space).point == p


def test_prompt_with_empty_history(space, scenario):
    system, instruction = assemble_prompts(scenario, space, [], None)
    assert instruction == f"{REFERENCE_HEADER}\n{REQUEST_SENTENCE}"
    assert system.count("Output format:") == 1
    for text in ("1 .. 28", "1, 1.2, 1.5, 1.8, 2.1", "{7, 14}", "navigation time", "control command issue rate"):
        assert text in system


def test_prompt_reference_blocks_and_flags(space, scenario):
    recs = [
        make_record(1, (6, 1.5, 7), 505.43, 2.021, dev=0.002868),
        make_record(2, (23, 1.5, 7), 171.13, 7.11, dev=0.002677),
        make_record(3, (18, 1.8, 7), 165.04, 7.838, dev=0.002615),
    ]
    last = make_record(4, (4, 1.2, 14), 1248.49, 0.911, flags=("cpu_bound",), reached=False)
    _, instruction = assemble_prompts(scenario, space, recs, last, analysis="callbacks are cpu bound")
    assert instruction.count("# Reference design point") == 3
    ref_lines = [line for line in instruction.splitlines() if line.startswith("number_of_cores =")]
    assert len(ref_lines) == 3
    for line in ref_lines:
        for key in ("navigation_time", "normalized_score", "control_command_issue_rates", "hardware_cost"):
            assert key in line
    assert "navigation_time = 165.04" in ref_lines[2] and "hardware_cost = 32.4" in ref_lines[2]
    assert "['cpu_bound']" in instruction
    assert "callbacks are cpu bound" in instruction
    assert "number_of_cores: 4" in instruction


# ---------------------------------------------------------------- LLM strategy


def test_llm_retry_then_success(space):
    backend = ScriptedBackend(["I am not sure.", "Next design point: (16 cores, 1.8 GHz, 14 Hz LiDAR frequency)"])
    s = LLMStrategy(backend, timeout_s=None)
    p = s.propose([], None, space, 1)
    assert p.point == DesignPoint(16, 1.8, 14)
    assert [e.outcome for e in s.events] == ["unparseable", "parsed"]
    assert backend.prompts[1].endswith(FORMAT_REMINDER)
    assert not backend.prompts[0].endswith(FORMAT_REMINDER)


def test_llm_falls_back_to_guided_rules(space):
    last = make_record(1, (4, 1.2, 14), 1248.49, 0.911, flags=("cpu_bound",), reached=False, rationale="[init]")
    s = LLMStrategy(ScriptedBackend(["no idea", "still no idea"]), timeout_s=None)
    p = s.propose([last], None, space, 1)
    assert [e.outcome for e in s.events] == ["unparseable", "unparseable", "fallback"]
    assert p.point == DesignPoint(8, 1.2, 14)
    assert p.rationale.startswith("[fallback]")


def test_llm_backend_failure_and_timeout(space):
    def broken(prompt: str) -> str:
        raise BackendError("connection refused")

    s = LLMStrategy(broken, timeout_s=None)
    s.propose([], None, space, 1)
    assert [e.outcome for e in s.events] == ["backend_error", "backend_error", "fallback"]

    def slow(prompt: str) -> str:
        time.sleep(0.5)
        return "(16 cores, 1.8 GHz, 14 Hz)"

    s = LLMStrategy(slow, timeout_s=0.02)
    s.propose([], None, space, 1)
    assert [e.outcome for e in s.events][:2] == ["backend_error", "backend_error"]


def test_scripted_backend_transcript():
    b = ScriptedBackend.from_transcript("first\n---\nsecond\n---\n")
    assert b("a") == "first" and b("b") == "second"
    with pytest.raises(BackendError):
        b("c")


def test_make_strategy_errors():
    with pytest.raises(ValueError, match="unknown strategy"):
        make_strategy("annealing")
    with pytest.raises(ValueError):
        make_strategy("llm")
    assert isinstance(make_strategy("guided", {"initial_point": [4, 1.2, 14]}), GuidedStrategy)
    assert isinstance(make_strategy("ga", {"population": 6}), GeneticStrategy)
