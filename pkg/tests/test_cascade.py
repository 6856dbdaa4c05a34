import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from threshold_market import stats
from threshold_market.cascade import (
    FieldGenerator,
    ThresholdField,
    UnsupportedMappingError,
    cascade_to_queue,
    generate_field,
    run_cascade,
    sample_cascades,
)
from threshold_market.distributions import ServiceDist
from threshold_market.queue_sim import sample_busy_periods

KAPPA, W = 0.1, 1000.0
JUMP = 2 * KAPPA / W


def field(offsets, states=None, weights=None):
    n = len(offsets)
    states = np.ones(n, int) if states is None else states
    weights = np.ones(n) if weights is None else weights
    return ThresholdField(np.asarray(offsets, float), states, weights, KAPPA, W)


def test_isolated_initiator():
    out = run_cascade(field([3 * JUMP]), 1.0)
    assert out.total_drop == pytest.approx(JUMP)
    assert out.num_switches == 1
    assert out.switches == [(-1, -JUMP)]


def test_empty_field():
    out = run_cascade(field([]), 2.0)
    assert out.total_drop == pytest.approx(2 * JUMP) and out.num_switches == 1


def test_chain_of_two():
    out = run_cascade(field([0.5 * JUMP]), 1.0)
    assert out.num_switches == 2
    assert out.total_drop == pytest.approx(2 * JUMP)


def test_threshold_exactly_at_front_is_included():
    out = run_cascade(field([JUMP]), 1.0)
    assert out.num_switches == 2


def test_anti_agent_pulls_back_with_bounce():
    # +1 at 0.5 pushes the front to 2J; a heavy -1 at 1.5J can only undo 0.5J of it
    out = run_cascade(field([0.5 * JUMP, 1.5 * JUMP], states=np.array([1, -1]), weights=np.array([1.0, 3.0])), 1.0)
    assert out.total_drop == pytest.approx(1.5 * JUMP)
    assert out.terminal_bounce == pytest.approx(2.5 * JUMP)
    assert out.num_switches == 3


def test_ties_processed_in_input_order():
    f = ThresholdField.sorted_from([0.2 * JUMP, 0.2 * JUMP], [-1, 1], [0.5, 1.0], KAPPA, W)
    assert list(f.states) == [-1, 1]
    out = run_cascade(f, 1.0)
    assert [s[0] for s in out.switches] == [-1, 0, 1]


def test_truncation():
    f = field(np.arange(50) * 0.1 * JUMP)
    out = run_cascade(f, 1.0, max_switches=10)
    assert out.truncated and out.num_switches == 10


@pytest.mark.parametrize(
    "kw",
    [
        dict(offsets=[0.2, 0.1], states=[1, 1], weights=[1, 1]),
        dict(offsets=[-0.1], states=[1], weights=[1]),
        dict(offsets=[0.1], states=[0], weights=[1]),
        dict(offsets=[0.1], states=[1], weights=[0]),
        dict(offsets=[0.1, 0.2], states=[1], weights=[1]),
    ],
)
def test_field_validation(kw):
    with pytest.raises(ValueError):
        ThresholdField(np.asarray(kw["offsets"], float), kw["states"], kw["weights"], KAPPA, W)


offsets_st = st.lists(st.floats(0, 20 * JUMP), max_size=30)


def _mixed(draw_offsets, signs, weights):
    n = min(len(draw_offsets), len(signs), len(weights))
    return ThresholdField.sorted_from(draw_offsets[:n], signs[:n], weights[:n], KAPPA, W)


@settings(max_examples=200)
@given(offsets_st, st.floats(0.1, 5.0))
def test_drop_at_least_initiator_jump_without_anti(offsets, w0):
    out = run_cascade(field(sorted(offsets)), w0)
    assert out.total_drop >= 2 * KAPPA * w0 / W - 1e-15


@settings(max_examples=200)
@given(offsets_st, st.lists(st.sampled_from([-1, 1]), min_size=30, max_size=30), st.lists(st.floats(0.1, 5.0), min_size=30, max_size=30))
def test_accounting_identity(offsets, signs, weights):
    f = _mixed(offsets, signs, weights)
    out = run_cascade(f, 1.0)
    net = -sum(move for _, move in out.switches)
    assert out.total_drop == pytest.approx(net + out.terminal_bounce, abs=1e-12)
    assert out.total_drop >= 0 and out.terminal_bounce >= 0 and out.num_switches >= 1


@settings(max_examples=300)
@given(
    offsets_st,
    st.lists(st.sampled_from([-1, 1]), min_size=30, max_size=30),
    st.lists(st.floats(0.1, 5.0), min_size=30, max_size=30),
    st.floats(0, 20 * JUMP),
    st.floats(0.1, 5.0),
    st.sampled_from([-1, 1]),
)
def test_monotone_coupling(offsets, signs, weights, x, w, s):
    n = min(len(offsets), len(signs), len(weights))
    base = _mixed(offsets, signs, weights)
    more = ThresholdField.sorted_from(list(offsets[:n]) + [x], list(signs[:n]) + [s], list(weights[:n]) + [w], KAPPA, W)
    d0 = run_cascade(base, 1.0).total_drop
    d1 = run_cascade(more, 1.0).total_drop
    if s == 1:
        assert d1 >= d0 - 1e-12
    else:
        assert d1 <= d0 + 1e-12


def test_generator_validation():
    with pytest.raises(ValueError):
        FieldGenerator(0.0, ServiceDist.deterministic(1.0))
    with pytest.raises(ValueError):
        FieldGenerator(1.0, ServiceDist.deterministic(1.0), anti_fraction=1.0)


def test_mapping_md1():
    gen = FieldGenerator(2500.0, ServiceDist.deterministic(1.0))
    q = cascade_to_queue(gen)
    assert q.is_plain_mg1 and q.service.kind == "deterministic"
    assert q.service.p1 == pytest.approx(JUMP)
    assert q.rho == pytest.approx(0.5)


def test_mapping_mm1_rate():
    gen = FieldGenerator(2000.0, ServiceDist.exponential(1 / 2.0))
    q = cascade_to_queue(gen)
    assert q.service.kind == "exponential"
    assert q.service.p1 == pytest.approx(W / (2 * KAPPA * 2.0))


def test_mapping_with_anti_agents():
    gen = FieldGenerator(2500.0, ServiceDist.deterministic(1.0), anti_fraction=0.1)
    q = cascade_to_queue(gen)
    assert q.arrival_table.max_rate == pytest.approx(2250.0)
    assert q.anti.rate == pytest.approx(250.0)
    assert q.anti.size.p1 == pytest.approx(JUMP)


def test_mapping_rejects_explicit_field():
    with pytest.raises(UnsupportedMappingError):
        cascade_to_queue(field([0.1]))


def test_mean_drop_md1():
    gen = FieldGenerator(2500.0, ServiceDist.deterministic(1.0))
    d = sample_cascades(gen, 200_000, 3).drops
    se = d.std(ddof=1) / np.sqrt(d.size)
    assert abs(d.mean() - JUMP / (1 - 0.5)) < 3 * se


def test_anti_cascades_match_anti_queue():
    gen = FieldGenerator(2500.0, ServiceDist.exponential(1.0), anti_fraction=0.1)
    c = sample_cascades(gen, 100_000, 1).drops
    q = sample_busy_periods(cascade_to_queue(gen), 100_000, 2).durations
    assert stats.ks_distance(c, q) < 0.01


def test_anti_agents_make_cascades_smaller():
    plain = sample_cascades(FieldGenerator(2500.0, ServiceDist.deterministic(1.0)), 100_000, 1).drops
    anti = sample_cascades(FieldGenerator(2500.0, ServiceDist.deterministic(1.0), anti_fraction=0.1), 100_000, 2).drops
    grid = np.quantile(plain, np.linspace(0.05, 0.99, 30))
    assert stats.dominates(anti, plain, grid, tol=0.007)
    assert anti.mean() < plain.mean()


def test_explicit_fields_match_lazy_kernel():
    gen = FieldGenerator(2500.0, ServiceDist.exponential(1.0), anti_fraction=0.2)
    rng = np.random.default_rng(5)
    explicit = []
    for _ in range(20_000):
        w0 = gen.weights.sample(rng, 1)[0]
        explicit.append(run_cascade(generate_field(gen, 0.05, rng), w0).total_drop)
    lazy = sample_cascades(gen, 20_000, 6).drops
    assert stats.ks_distance(explicit, lazy) < 0.03


def test_backends_and_buffers():
    gen = FieldGenerator(2500.0, ServiceDist.exponential(1.0), anti_fraction=0.1)
    a = sample_cascades(gen, 5000, 7, use_numba=True)
    b = sample_cascades(gen, 5000, 7, use_numba=False, buffer_size=100)
    np.testing.assert_array_equal(a.drops, b.drops)
    np.testing.assert_array_equal(a.bounces, b.bounces)


def test_supercritical_truncates():
    gen = FieldGenerator(10_000.0, ServiceDist.deterministic(1.0))
    s = sample_cascades(gen, 50, 1, max_switches=1000)
    assert s.truncated.mean() > 0.5
