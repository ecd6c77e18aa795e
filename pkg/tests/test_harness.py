import math

import numpy as np
import pytest

from privsense import acproto as ap
from privsense import harness as hs
from privsense import metrology as mt
from privsense import qcore as qc
from privsense.errors import InvariantError


def general_pair(rho, enc, partition=None):
    partition = partition or ap.PartyPartition.last_dishonest(enc.n)
    real = ap.build_system(ap.SystemSpec.real(partition, general=True), enc, rho)
    sim = ap.build_system(ap.SystemSpec.simulated(partition, general=True), enc, rho)
    return real, sim


def mean_pair(n=3, rounds=1):
    enc = mt.mean_encoding(n)
    part = ap.PartyPartition.last_dishonest(n)
    return (ap.build_system(ap.SystemSpec.real(part), enc, rounds=rounds),
            ap.build_system(ap.SystemSpec.simulated(part), enc, rounds=rounds))


class TestExactAdvantage:
    def test_ghz_mean_zero(self, rng):
        real, sim = mean_pair()
        for _ in range(4):
            inputs = {1: float(rng.uniform(0, 2 * math.pi)), 2: float(rng.uniform(0, 2 * math.pi)), 3: 1}
            est = hs.exact_advantage(real, sim, inputs)
            assert est.mode == "exact" and est.ci_low == est.d_hat == est.ci_high
            assert est.d_hat <= 1e-9

    def test_identical_and_symmetric(self, rng):
        rho = qc.random_density_matrix(8, rng)
        real, sim = general_pair(rho, mt.phase_encoding(3))
        inputs = {1: 0.3, 2: 5.0, 3: 0}
        assert hs.exact_advantage(real, real, inputs).d_hat == pytest.approx(0, abs=1e-15)
        ab = hs.exact_advantage(real, sim, inputs).d_hat
        ba = hs.exact_advantage(sim, real, inputs).d_hat
        assert ab == pytest.approx(ba, abs=1e-12)

    def test_distinguishable_by_hand(self):
        """Two honest parties on |+++>: the simulator substitutes angles.

        The dishonest qubit is a product state, so only the honest outcome
        bits can differ, and their law depends on the individual angles.
        """
        enc = mt.phase_encoding(3)
        rho = qc.plus_state(3)
        real, sim = general_pair(rho, enc)
        inputs = {1: math.pi, 2: 0.0, 3: 0}
        # real: o1 = 1 and o2 = 0 with certainty; the simulator uses angles (pi/2, pi/2)
        # and sees each honest bit uniform: advantage 1 - 1/4 = 3/4
        assert hs.exact_advantage(real, sim, inputs).d_hat == pytest.approx(0.75, abs=1e-12)

    def test_restricting_observables_never_helps(self, rng):
        for _ in range(10):
            rho = qc.random_density_matrix(8, rng, rank=int(rng.integers(1, 4)))
            real, sim = general_pair(rho, mt.phase_encoding(3))
            inputs = {1: float(rng.uniform(0, 6)), 2: float(rng.uniform(0, 6)), 3: int(rng.integers(2))}
            full = hs.exact_advantage(real, sim, inputs).d_hat
            classical = hs.exact_advantage(real, sim, inputs, quantum=False).d_hat
            assert classical <= full + 1e-12

    def test_requires_single_round(self):
        real, sim = mean_pair(rounds=2)
        with pytest.raises(InvariantError):
            hs.exact_advantage(real, sim, {1: 0.1, 2: 0.1, 3: 0})


class TestIntervals:
    def test_hoeffding_width(self):
        lo, hi = hs.hoeffding_interval(500, 1000)
        assert hi - lo == pytest.approx(2 * math.sqrt(math.log(200) / 2000))

    def test_clopper_pearson_against_direct_tail(self):
        from scipy.stats import binom

        lo, hi = hs.clopper_pearson_interval(30, 100)
        assert binom.sf(29, 100, lo) == pytest.approx(0.005, rel=1e-6)
        assert binom.cdf(30, 100, hi) == pytest.approx(0.005, rel=1e-6)

    def test_fold(self):
        e = hs.advantage_from_counts(50, 100)
        assert e.d_hat == 0 and e.ci_low == 0
        e = hs.advantage_from_counts(10, 100)
        assert e.d_hat == 0 and e.ci_high == 0
        e = hs.advantage_from_counts(90, 100)
        assert e.d_hat == pytest.approx(0.8)
        assert e.ci_low <= e.d_hat <= e.ci_high
        e = hs.advantage_from_counts(100, 100, exact_ci=True)
        assert e.d_hat == 1 and e.ci_high == 1


class TestEstimateAdvantage:
    def test_constant_systems(self):
        est = hs.estimate_advantage(hs.BernoulliSystem(0.0), hs.BernoulliSystem(1.0),
                                    hs.Distinguisher(lambda rng: None, hs.read_bit), 1000, seed=1)
        assert est.d_hat == 1

    def test_identical_systems(self):
        s = hs.BernoulliSystem(0.3)
        est = hs.estimate_advantage(s, s, hs.Distinguisher(lambda rng: None, hs.read_bit), 20000, seed=2)
        assert est.ci_low <= 0 + 1e-15

    def test_calibration_coverage(self):
        a, b = hs.BernoulliSystem(0.25), hs.BernoulliSystem(0.75)
        exact = hs.bernoulli_advantage(a, b)
        assert exact == 0.5
        strat = hs.Distinguisher(lambda rng: None, hs.read_bit)
        hits = 0
        for rep in range(40):
            est = hs.estimate_advantage(a, b, strat, 2000, seed=rep)
            hits += est.ci_low <= exact <= est.ci_high
            assert est.d_hat <= exact + est.half_width
        assert hits >= 38

    def test_reproducible(self):
        a, b = hs.BernoulliSystem(0.4), hs.BernoulliSystem(0.6)
        strat = hs.Distinguisher(lambda rng: None, hs.read_bit)
        assert hs.estimate_advantage(a, b, strat, 500, 7) == hs.estimate_advantage(a, b, strat, 500, 7)

    def test_ghz_real_vs_simulated(self):
        real, sim = mean_pair()

        class Measure(ap.Strategy):
            def __init__(self, rng):
                self.angles = {1: float(rng.uniform(0, 6)), 2: float(rng.uniform(0, 6))}
                self.bit = 0

            def observe(self, party, message, view):
                if message.payload_type == "qubit":
                    self.bit = view.measure(message.payload, "x")

            def respond(self, request, view):
                return self.angles[request.party] if request.payload_type == "angle" else self.bit

        def decide(t):
            # guess "simulated" when the honest output disagrees with the broadcast parity
            return int(t.final_bits(1)[0] != mt.parity(t.final_bits(3)))

        est = hs.estimate_advantage(real, sim, hs.Distinguisher(Measure, decide), 2000, seed=3)
        assert est.ci_low == 0

    def test_abort_counts_as_wrong(self):
        real, sim = mean_pair()
        est = hs.estimate_advantage(real, sim, hs.Distinguisher(lambda rng: {1: 9.0, 2: 0.0, 3: 0},
                                                                lambda t: 0), 200, seed=0)
        assert est.d_hat == 0 and est.ci_high == 0  # every trial aborts and counts as a wrong guess

    def test_minimum_trials(self):
        s = hs.BernoulliSystem(0.5)
        with pytest.raises(InvariantError):
            hs.estimate_advantage(s, s, hs.Distinguisher(lambda r: None, hs.read_bit), 10, 0)


class TestAudit:
    def test_ghz_mean(self):
        a = hs.audit(qc.ghz_state(3), mt.mean_encoding(3))
        assert a.measured == pytest.approx(0, abs=1e-6)
        assert a.privacy_bound >= 0 and a.alignment_bound_stated >= 0
        assert set(a.relations.values()) == {"<="}
        assert a.exact_advantage == pytest.approx(0, abs=1e-9)

    def test_plus_plus(self):
        a = hs.audit(qc.plus_state(2), mt.phase_encoding(2))
        assert a.measured == pytest.approx(1, abs=1e-6)
        assert a.privacy_bound == pytest.approx(0.86603, abs=1e-5)
        assert a.relations["measured_vs_privacy_bound"] == ">"
        assert a.relations == a.recompute_relations()

    def test_depolarized_ghz(self):
        a = hs.audit(qc.depolarized(qc.ghz_state(3), 0.05), mt.mean_encoding(3))
        rec = a.record()
        assert all(rec[k] is not None for k in ("measured", "exact_advantage", "multi_round_bound", "privacy_bound",
                                                "alignment_bound_stated", "alignment_bound_chain"))
        assert a.exact_advantage <= a.measured + 1e-9

    def test_private_product_like_state(self, rng):
        """A random state: the exact advantage never beats the class distance."""
        rho = qc.random_pure_state(8, rng)
        a = hs.audit(rho, mt.phase_encoding(3), budget=mt.SearchBudget(directions=8, grid=32))
        assert a.exact_advantage <= a.measured + 1e-9
        assert a.relations["exact_vs_multi_round_bound"] == "<="

    def test_signalling_guard_noted(self):
        enc = mt.phase_encoding(3, a=np.array([1, 1, -1]) / math.sqrt(3))
        part = ap.PartyPartition(3, {1}, {2, 3})
        a = hs.audit(qc.ghz_state(3), enc, part, budget=mt.SearchBudget(directions=4, grid=16))
        assert a.exact_advantage is None and a.notes

    def test_needs_adversary(self):
        with pytest.raises(InvariantError):
            hs.audit(qc.ghz_state(2), mt.mean_encoding(2), ap.PartyPartition(2, {1, 2}, set()))
