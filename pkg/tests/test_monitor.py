"""Offline monitor: sampled STL margins, Until semantics, and tree
occupancy checks against closed-loop trajectories."""

import numpy as np
import pytest

from helpers import (
    nested_disk_predicates,
    random_formula_text,
    simulate_integrator,
    until_margin_reference,
)
from stlt.controller import RunConfig, run_closed_loop
from stlt.dynamics import single_integrator
from stlt.formula import FormulaError, horizon, parse, to_desired_form
from stlt.monitor import path_satisfied, stl_satisfied, tree_satisfied
from stlt.reach import ReachEngine
from stlt.regions import Disk, region_value
from stlt.tree import build_tree


class TestStlSatisfied:
    """Hand-sized trajectories with margins worked out on paper."""

    TIMES = np.array([0.0, 1.0, 2.0])
    STATES = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 0.0]])
    PREDS = {"a": Disk((0.0, 0.0), 1.0)}

    def test_eventually_margin_and_witness(self):
        v = stl_satisfied(self.TIMES, self.STATES, parse("F[0,2] a"), self.PREDS)
        assert v.satisfied
        assert v.margin == pytest.approx(1.0, abs=1e-12)
        assert v.witnesses == {"F[0,2]": 0.0}
        # The margin signal drops from 1 to -2 over one second, so the
        # sampling tolerance is half that slope times the gap.
        assert v.tolerance == pytest.approx(1.5, abs=1e-12)

    def test_always_margin(self):
        v = stl_satisfied(self.TIMES, self.STATES, parse("G[0,2] a"), self.PREDS)
        assert not v.satisfied
        assert v.margin == pytest.approx(-2.0, abs=1e-12)

    def test_negation_flips_sign(self):
        v = stl_satisfied(self.TIMES, self.STATES, parse("!a"), self.PREDS)
        assert v.margin == pytest.approx(-1.0, abs=1e-12)

    def test_boolean_connectives(self):
        preds = {"a": Disk((0.0, 0.0), 1.0), "b": Disk((3.0, 0.0), 1.0)}
        v_and = stl_satisfied(self.TIMES, self.STATES, parse("a & b"), preds)
        v_or = stl_satisfied(self.TIMES, self.STATES, parse("a | b"), preds)
        # At t=0 the margins are (1, -2); conjunction takes the min,
        # disjunction the max.
        assert v_and.margin == pytest.approx(-2.0, abs=1e-12)
        assert v_or.margin == pytest.approx(1.0, abs=1e-12)

    def test_t0_offset(self):
        v = stl_satisfied(self.TIMES, self.STATES, parse("F[0,1] a"), self.PREDS,
                          t0=1.0)
        assert not v.satisfied
        assert v.margin == pytest.approx(-2.0, abs=1e-12)

    def test_interpolates_between_samples(self):
        # Crossing happens between samples; the monitor interpolates the
        # margin signal linearly, so G over [0, 0.5] sees -0.5 at the
        # right endpoint even though 0.5 is not a sample time.
        v = stl_satisfied(self.TIMES, self.STATES, parse("G[0,0.5] a"), self.PREDS)
        assert v.margin == pytest.approx(-0.5, abs=1e-12)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError, match="matching leading length"):
            stl_satisfied(self.TIMES, self.STATES[:2], parse("a"), self.PREDS)

    def test_short_trajectory_raises(self):
        with pytest.raises(ValueError, match="but the formula needs t=5"):
            stl_satisfied(self.TIMES, self.STATES, parse("F[0,5] a"), self.PREDS)


class TestUntil:
    def test_until_beats_its_rewrite(self):
        # Trajectory that leaves mu2 right after touching mu3 at t=6:
        # the until formula is met with margin 0.5, while the rewritten
        # conjunction demands staying in mu2 until t=10 and fails badly.
        preds = {"mu2": Disk((0.0, 0.0), 2.0), "mu3": Disk((1.5, 0.0), 0.5)}
        times = np.linspace(0.0, 10.0, 201)
        states = np.zeros((201, 2))
        for i, t in enumerate(times):
            if t <= 5.0:
                states[i, 0] = 0.0
            elif t <= 6.0:
                states[i, 0] = 1.5 * (t - 5.0)
            else:
                states[i, 0] = 1.5 + 3.0 * (t - 6.0)
        phi = parse("mu2 U[5,10] mu3")
        hat = to_desired_form(phi)
        assert str(hat) == "G[0,10] mu2 & F[5,10] mu3"

        v = stl_satisfied(times, states, phi, preds)
        assert v.satisfied
        assert v.margin == pytest.approx(0.5, abs=1e-9)
        assert v.witnesses == {"U[5,10]": 6.0}

        v_hat = stl_satisfied(times, states, hat, preds)
        assert not v_hat.satisfied
        assert v_hat.margin == pytest.approx(-11.5, abs=1e-9)
        # The rewrite only strengthens the formula.
        assert v.margin >= v_hat.margin

    def test_until_matches_reference(self, rng):
        preds = nested_disk_predicates()
        for _ in range(60):
            _, states = simulate_integrator(rng, 8.0, 0.1, rng.uniform(-4, 4, 2), 1.0)
            times = np.arange(states.shape[0]) * 0.1
            lo = float(rng.integers(0, 3))
            hi = lo + float(rng.integers(1, 4))
            left, right = rng.choice(["p", "q", "r"], 2, replace=False)
            phi = parse("%s U[%g,%g] %s" % (left, lo, hi, right))
            ref = until_margin_reference(
                times,
                region_value(preds[left], states),
                region_value(preds[right], states),
                lo,
                hi,
            )
            v = stl_satisfied(times, states, phi, preds)
            assert v.margin == pytest.approx(ref, abs=1e-9)
            assert v.satisfied == (v.margin >= 0.0)


@pytest.fixture(scope="module")
def e1_run(e1_int, e1_int_engine):
    from stlt.cbf import build_cbfs

    tree = build_tree(e1_int.phi_desired, e1_int.predicates, e1_int_engine)
    cbfs = build_cbfs(tree, e1_int_engine)
    res = run_closed_loop(tree, cbfs, e1_int.dyn, np.array([-6.0, 2.0]),
                          RunConfig(dt=0.05, t_end=25.0, branch=0))
    assert res.status == "completed"
    fresh = build_tree(e1_int.phi_desired, e1_int.predicates, e1_int_engine)
    return e1_int, fresh, res


class TestTreeVerdicts:
    def test_closed_loop_run_satisfies_tree(self, e1_run):
        _, tree, res = e1_run
        assert tree_satisfied(tree, res.times, res.states)

    def test_closed_loop_run_satisfies_formula(self, e1_run):
        sc, _, res = e1_run
        v = stl_satisfied(res.times, res.states, sc.phi, sc.predicates)
        v_hat = stl_satisfied(res.times, res.states, sc.phi_desired, sc.predicates)
        assert v.satisfied and v_hat.satisfied
        assert min(v.margin, v_hat.margin) > 0.9
        assert v.margin >= v_hat.margin - 1e-9
        assert v.tolerance < 0.1

    def test_path_verdicts(self, e1_run):
        _, tree, res = e1_run
        verdicts = [path_satisfied(tree, path, res.times, res.states)
                    for path in tree.complete_paths()]
        # Branch 0 steers through the first disjunct only.
        assert verdicts == [True, False, False]

    def test_distant_trajectory_fails(self, e1_run):
        _, tree, res = e1_run
        still = np.tile(np.array([60.0, 0.0]), (len(res.times), 1))
        assert not tree_satisfied(tree, res.times, still)
        assert all(not path_satisfied(tree, p, res.times, still)
                   for p in tree.complete_paths())


class TestTreeAgainstSemantics:
    """Tree verdicts against sampled STL margins on a random corpus.

    With margins bounded away from zero (beyond sampling error) the
    tree check and the rewritten formula must agree in both directions,
    and the rewrite may only lower the margin of the original formula.
    """

    def test_corpus_agreement(self):
        preds = nested_disk_predicates()
        engine = ReachEngine("analytic", single_integrator(1.0))
        rng = np.random.default_rng(11)
        checked = tree_sat = conf_sat = conf_unsat = 0
        while checked < 220:
            text = random_formula_text(rng)
            try:
                phi = parse(text)
                hat = to_desired_form(phi)
            except FormulaError:
                continue
            hz = horizon(hat)
            if hz <= 0 or hz > 10:
                continue
            tree = build_tree(hat, preds, engine)
            x0 = rng.uniform(-4, 4, 2)
            times, states = simulate_integrator(rng, hz, 0.1, x0, 1.0)
            v_hat = stl_satisfied(times, states, hat, preds)
            v_phi = stl_satisfied(times, states, phi, preds)
            sat = tree_satisfied(tree, times, states)
            checked += 1
            tree_sat += sat
            if v_hat.margin > 0.3:
                conf_sat += 1
                assert sat, "confidently satisfied run rejected: %s" % text
            if v_hat.margin < -0.3:
                conf_unsat += 1
                assert not sat, "confidently violated run accepted: %s" % text
            assert v_phi.margin >= v_hat.margin - 1e-9, text
        assert checked == 220
        # The corpus exercises both verdicts.
        assert 30 <= tree_sat <= 190
        assert conf_sat >= 40 and conf_unsat >= 40
