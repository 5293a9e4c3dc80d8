"""Acceptance criteria at desk scale.

Desk configuration: 30 devices on a 1000 m disc, 15 packets/hour, 2000
simulated hours, default PHY constants, medians over seeds 1..10.  Every
simulation is run once per session and shared between criteria.  Each test
records a ``CRITERION n: PASS|FAIL`` line that is echoed in the terminal
summary.
"""
import math
import statistics
import time

import numpy as np
import pytest

from oracles import brute_force_decoded, random_group, reference_airtime_ms

from mixmab.bandit import MixMabState, arm_history, compute_learning_rate, make_policy, select_action, update
from mixmab.cli import execute, main
from mixmab.config import parse_config, scenario_config
from mixmab.engine import MS_PER_HOUR, SimConfig, run
from mixmab.metrics import cumulative_pdr, convergence_time, energy_per_packet, pdr
from mixmab.phy import LinkTables, RadioConfig, resolve_reception, time_on_air

pytestmark = pytest.mark.slow

SEEDS = range(1, 11)
DESK = dict(n_devices=30, cell_radius_m=1000.0, packet_rate_per_hour=15.0, horizon_ms=2000 * MS_PER_HOUR)
RUN_LIMIT_S = 300.0


class DeskRuns:
    """Lazily computed per-run summaries keyed by (scenario, policy, rate, seed)."""

    def __init__(self):
        self.cache = {}
        self.conservation_failures = []

    def get(self, scenario, policy="mixmab", seed=1, rate=None):
        key = (scenario, policy, rate, seed)
        if key not in self.cache:
            overrides = dict(DESK, policy=policy, seed=seed)
            if scenario == 5:
                overrides["packet_rate_per_hour"] = rate
            cfg = scenario_config(scenario, **overrides)
            t0 = time.perf_counter()
            series = run(cfg).series
            elapsed = time.perf_counter() - t0
            if np.any(series.conservation_gaps() != 0):
                self.conservation_failures.append(key)
            self.cache[key] = dict(
                pdr=pdr(series),
                ec=energy_per_packet(series),
                conv=convergence_time(cumulative_pdr(series), bucket_ms=series.bucket_ms),
                seconds=elapsed,
            )
        return self.cache[key]

    def median(self, field, scenario, policy="mixmab", rate=None):
        values = [self.get(scenario, policy, s, rate)[field] for s in SEEDS]
        # a run that never settles counts as converging after the horizon
        values = [math.inf if v is None else v for v in values]
        return statistics.median(values)


@pytest.fixture(scope="module")
def desk():
    return DeskRuns()


def verdict(verdicts, n, ok, detail):
    verdicts.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    print(verdicts[-1])
    return ok


def test_criterion_01_policy_ordering(desk, verdicts):
    mix = desk.median("pdr", 1, "mixmab")
    exp3 = desk.median("pdr", 1, "loramab")
    legacy = desk.median("pdr", 1, "legacy")
    slowest = max(desk.get(1, p, s)["seconds"] for p in ("mixmab", "loramab", "legacy") for s in SEEDS)
    ok = mix > exp3 > legacy and mix - legacy >= 0.05 and slowest < RUN_LIMIT_S
    assert verdict(verdicts, 1, ok, f"PDR mix={mix:.4f} loramab={exp3:.4f} legacy={legacy:.4f}, "
                   f"slowest run {slowest:.1f}s")


def test_criterion_02_convergence_speedup(desk, verdicts):
    mix = desk.median("conv", 1, "mixmab")
    exp3 = desk.median("conv", 1, "loramab")
    ok = math.isfinite(mix) and mix <= 0.6 * exp3
    assert verdict(verdicts, 2, ok, f"median convergence mix={mix / MS_PER_HOUR:.0f}h "
                   f"loramab={exp3 / MS_PER_HOUR:.0f}h (need ratio <= 0.6)")


def test_criterion_03_channel_gain(desk, verdicts):
    s1 = desk.median("pdr", 1)
    s2 = desk.median("pdr", 2)
    ok = s2 - s1 >= 0.03
    assert verdict(verdicts, 3, ok, f"PDR scenario2={s2:.4f} scenario1={s1:.4f} gain={100 * (s2 - s1):.2f}pp")


def test_criterion_04_power_tradeoff(desk, verdicts):
    ec1, ec3 = desk.median("ec", 1), desk.median("ec", 3)
    p1, p3 = desk.median("pdr", 1), desk.median("pdr", 3)
    ok = ec3 < ec1 and p3 < p1
    assert verdict(verdicts, 4, ok, f"EC s3={ec3:.2f} s1={ec1:.2f} mJ, PDR s3={p3:.4f} s1={p1:.4f}")


def test_criterion_05_full_freedom(desk, verdicts):
    ec1, ec4 = desk.median("ec", 1), desk.median("ec", 4)
    p1, p4 = desk.median("pdr", 1), desk.median("pdr", 4)
    ok = p4 > p1 and ec4 < ec1
    assert verdict(verdicts, 5, ok, f"PDR s4={p4:.4f} s1={p1:.4f}, EC s4={ec4:.2f} s1={ec1:.2f} mJ")


def test_criterion_06_rate_effect(desk, verdicts):
    hourly, weekly = 1.0, 1.0 / 168.0
    p_h, p_w = desk.median("pdr", 5, rate=hourly), desk.median("pdr", 5, rate=weekly)
    ec_h, ec_w = desk.median("ec", 5, rate=hourly), desk.median("ec", 5, rate=weekly)
    # lower energy per packet is the better one
    ok = p_h > p_w and ec_h < ec_w
    assert verdict(verdicts, 6, ok, f"1/hour PDR={p_h:.4f} EC={ec_h:.2f} mJ; 1/week PDR={p_w:.4f} EC={ec_w:.2f} mJ")


def test_criterion_07_stationary_bandit(verdicts):
    t0 = time.perf_counter()
    hits = 0
    for seed in range(40):
        policy = make_policy("mixmab", 6, 20_000)
        chosen = arm_history(policy, [0.9, 0.5, 0.5, 0.5, 0.5, 0.5], 20_000, np.random.default_rng(seed))
        hits += (chosen[-1000:] == 0).mean() > 0.8
    elapsed = time.perf_counter() - t0
    ok = hits >= 0.95 * 40 and elapsed < 30.0
    assert verdict(verdicts, 7, ok, f"{hits}/40 seeds above 80% best-arm share in {elapsed:.1f}s")


def _micro_examples():
    tol = 1e-9
    checks = {}
    checks["gamma K=1"] = compute_learning_rate(1, 500) == 0.0
    checks["gamma clamp"] = compute_learning_rate(6, 1) == 1.0
    checks["gamma K=6 T=1e5"] = abs(compute_learning_rate(6, 100_000) - 0.00792898185811063285) <= tol

    rng = np.random.default_rng(0)
    state = MixMabState.new(6, 0.1)
    checks["round robin"] = [select_action(state, rng) for _ in range(7)] == [0, 1, 2, 3, 4, 5, 0]

    state = MixMabState.new(6, 0.1)
    state.counts = [6] * 6
    state.probabilities = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]
    checks["degenerate pick"] = {select_action(state, rng) for _ in range(200)} == {1}

    state = MixMabState.new(6, 0.5)
    update(state, 2, 0)
    checks["uniform R=0"] = (max(abs(p - 1 / 6) for p in state.probabilities) <= tol
                             and state.weights == [1.0] * 6)

    state = MixMabState.new(2, 0.1)
    update(state, 0, 1)
    checks["two-arm update"] = (max(abs(p - 0.5) for p in state.probabilities) <= tol
                                and abs(state.weights[0] - 1.10517091807564762481) <= tol)

    state = MixMabState.new(4, 0.0)
    state.weights = [4.0, 1.5, 2.5, 2.0]
    state.counts = [6, 5, 6, 6]
    update(state, 1, 0)
    checks["elimination"] = state.probabilities[1] == 0.0 and abs(state.probabilities[0] - 0.4) <= tol

    state = MixMabState.new(6, 0.05, l_exp=5, l_ee=100)
    state.counts = [100, 40, 40, 40, 40, 40]
    weights = [3.0, 1.0, 1.2, 1.0, 1.0, 1.1]
    state.weights = list(weights)
    update(state, 0, 0)
    checks["reset"] = (state.counts == [0] * 6 and state.alpha == 2 and state.weights == weights
                       and [select_action(state, rng) for _ in range(6)] == list(range(6)))
    return checks


def test_criterion_08_micro_examples(verdicts):
    checks = _micro_examples()
    failed = [name for name, ok in checks.items() if not ok]
    assert verdict(verdicts, 8, not failed, f"{len(checks) - len(failed)}/{len(checks)} worked examples"
                   + (f", failed: {failed}" if failed else ""))


def test_criterion_09_phy_oracles(verdicts):
    worst = 0.0
    for sf in range(7, 13):
        for payload in (1, 50, 255):
            for cr in (1, 4):
                got = time_on_air(sf, payload, RadioConfig(coding_rate_num=cr))
                worst = max(worst, abs(got - reference_airtime_ms(sf, payload, cr=cr)))
    tables = LinkTables()
    sens = dict(tables.sensitivity_dbm)
    inter = dict(tables.inter_sf_threshold_db)
    rng = np.random.default_rng(9)
    mismatches = 0
    for _ in range(10_000):
        group = random_group(rng, int(rng.integers(1, 5)))
        if resolve_reception(group, tables) != brute_force_decoded(group, sens, tables.co_sf_capture_db, inter):
            mismatches += 1
    ok = worst <= 1e-6 and mismatches == 0
    assert verdict(verdicts, 9, ok, f"max airtime error {worst:.2e} ms over 36 cases, "
                   f"{mismatches} reception mismatches in 10^4 groups")


def test_criterion_10_determinism_and_conservation(desk, verdicts, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    cfg = scenario_config(1, **DESK, seed=3)
    execute(cfg, first)
    main(["run", "--config", str(first / "manifest.ini"), "--out", str(second)])
    same_files = all((first / f).read_bytes() == (second / f).read_bytes()
                     for f in ("manifest.ini", "metrics.csv", "summary.json"))
    same_config = parse_config(first / "manifest.ini") == cfg

    short = cfg.replace(horizon_ms=100 * MS_PER_HOUR)
    same_log = run(short, record=True).event_log_text() == run(short, record=True).event_log_text()

    # every desk run used by the other criteria
    for scenario, policies, rates in ((1, ("mixmab", "loramab", "legacy"), (None,)), (2, ("mixmab",), (None,)),
                                      (3, ("mixmab",), (None,)), (4, ("mixmab",), (None,)),
                                      (5, ("mixmab",), (1.0, 1.0 / 168.0))):
        for policy in policies:
            for rate in rates:
                for seed in SEEDS:
                    desk.get(scenario, policy, seed, rate)
    conserved = not desk.conservation_failures
    ok = same_files and same_config and same_log and conserved
    assert verdict(verdicts, 10, ok, f"rerun identical={same_files and same_config and same_log}, "
                   f"conservation held in {len(desk.cache) - len(desk.conservation_failures)}/{len(desk.cache)} runs")
