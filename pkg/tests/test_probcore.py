import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coordsim import probcore as pc
from coordsim.probcore import CondPmf, JointPmf

# 1 - h(0.1) from scipy.stats.entropy with base 2
ONE_MINUS_H01 = 0.5310044064107189


def random_joint(rng, sizes, names=None, alpha=1.0):
    names = names or [f"A{i}" for i in range(len(sizes))]
    w = rng.dirichlet(np.full(math.prod(sizes), alpha)).reshape(sizes)
    return JointPmf(list(zip(names, sizes)), w)


def random_kernel(rng, from_axes, to_axes, alpha=1.0):
    nf = math.prod(s for _, s in from_axes)
    nt = math.prod(s for _, s in to_axes)
    rows = rng.dirichlet(np.full(nt, alpha), size=nf)
    return CondPmf(from_axes, to_axes, rows.reshape([s for _, s in from_axes] + [s for _, s in to_axes]))


class TestJointPmf:
    def test_axes_are_canonical(self):
        p = JointPmf([("Y", 2), ("X", 3)], np.arange(6).reshape(2, 3) / 15)
        assert p.names == ("X", "Y")
        assert p.array(["Y", "X"])[1, 2] == pytest.approx(5 / 15)

    def test_rejects_bad_mass(self):
        with pytest.raises(ValueError):
            JointPmf([("X", 2)], [0.5, 0.6])
        with pytest.raises(ValueError):
            JointPmf([("X", 2)], [1.5, -0.5])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(pc.StructuralError):
            JointPmf([("X", 2)], [0.2, 0.3, 0.5])

    def test_duplicate_axis(self):
        with pytest.raises(pc.StructuralError):
            JointPmf([("X", 2), ("X", 2)], np.full((2, 2), 0.25))

    def test_immutable(self):
        p = JointPmf.uniform([("X", 2)])
        with pytest.raises(AttributeError):
            p.weights = np.array([1.0, 0.0])
        with pytest.raises(ValueError):
            p.weights[0] = 1.0

    def test_json_round_trip(self):
        rng = np.random.default_rng(1)
        p = random_joint(rng, (2, 3), ["S", "X"])
        q = JointPmf.from_json(p.to_json())
        assert q.names == p.names
        assert np.array_equal(q.weights, p.weights)
        assert json.loads(p.to_json())["axes"][0] == {"name": "S", "size": 2}

    def test_point_and_uniform(self):
        p = JointPmf.point([("X", 3), ("Y", 2)], (2, 1))
        assert p.array(["X", "Y"])[2, 1] == 1.0
        assert pc.entropy(p) == 0.0
        assert pc.entropy(JointPmf.uniform([("X", 8)])) == pytest.approx(3.0, abs=1e-12)


class TestKernels:
    def test_rows_must_be_stochastic(self):
        with pytest.raises(ValueError):
            CondPmf([("X", 2)], [("Y", 2)], [[0.5, 0.6], [0.5, 0.5]])

    def test_deterministic(self):
        k = CondPmf.deterministic([("X", 3)], [("Y", 3)], lambda x: (x + 1) % 3)
        assert np.array_equal(k.matrix(), np.roll(np.eye(3), 1, axis=1))

    def test_chain_compose_matches_einsum(self):
        rng = np.random.default_rng(2)
        p = random_joint(rng, (2, 3), ["A", "B"])
        k = random_kernel(rng, [("B", 3)], [("C", 4)])
        joint = pc.chain_compose(p, k)
        ref = np.einsum("ab,bc->abc", p.array(["A", "B"]), k.matrix())
        assert np.allclose(joint.array(["A", "B", "C"]), ref, atol=1e-15)

    def test_chain_compose_output_collision(self):
        p = JointPmf.uniform([("A", 2)])
        with pytest.raises(pc.StructuralError):
            pc.chain_compose(p, CondPmf([("A", 2)], [("A", 2)], np.eye(2)))

    def test_conditional_inverts_compose(self):
        rng = np.random.default_rng(3)
        p = random_joint(rng, (3,), ["A"])
        k = random_kernel(rng, [("A", 3)], [("B", 2)])
        back = pc.conditional(pc.chain_compose(p, k), "B", "A")
        assert np.allclose(back.matrix(), k.matrix(), atol=1e-12)

    def test_conditional_zero_rows_uniform(self):
        p = JointPmf([("A", 2), ("B", 2)], [[0.5, 0.5], [0.0, 0.0]])
        assert np.allclose(pc.conditional(p, "B", "A").matrix()[1], [0.5, 0.5])

    def test_iid_kernel(self):
        bsc = CondPmf([("X", 2)], [("Y", 2)], [[0.9, 0.1], [0.1, 0.9]])
        k2 = pc.iid_kernel(bsc, 2)
        assert set(k2.from_names) == {"X_00", "X_01"}
        m = k2.kernel  # dims: X_00, X_01, Y_00, Y_01
        assert m[0, 1, 0, 0] == pytest.approx(0.9 * 0.1)
        assert m[1, 1, 1, 1] == pytest.approx(0.81)


class TestInformation:
    def test_uniform_four(self):
        assert pc.entropy(JointPmf.uniform([("X", 4)])) == pytest.approx(2.0, abs=1e-12)

    def test_independence(self):
        p = pc.product(JointPmf.single("X", [0.2, 0.8]), JointPmf.single("Y", [0.6, 0.3, 0.1]))
        assert abs(pc.mutual_info(p, "X", "Y")) < 1e-12

    def test_bsc_capacity_point(self):
        x = JointPmf.single("X", [0.5, 0.5])
        p = pc.chain_compose(x, CondPmf([("X", 2)], [("Y", 2)], [[0.9, 0.1], [0.1, 0.9]]))
        assert pc.mutual_info(p, "X", "Y") == pytest.approx(ONE_MINUS_H01, abs=1e-12)

    def test_cond_mi_markov_zero(self):
        rng = np.random.default_rng(4)
        p = random_joint(rng, (3,), ["A"])
        p = pc.chain_compose(p, random_kernel(rng, [("A", 3)], [("B", 2)]))
        p = pc.chain_compose(p, random_kernel(rng, [("B", 2)], [("C", 3)]))
        assert pc.cond_mutual_info(p, "A", "C", "B") < 1e-12

    def test_overlapping_groups_rejected(self):
        p = JointPmf.uniform([("A", 2), ("B", 2)])
        with pytest.raises(pc.StructuralError):
            pc.cond_mutual_info(p, ["A"], ["A", "B"])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31), st.sampled_from([0.2, 1.0, 5.0]))
    def test_chain_rule(self, seed, alpha):
        p = random_joint(np.random.default_rng(seed), (2, 3, 2), ["A", "B", "C"], alpha)
        lhs = pc.mutual_info(p, "A", ["B", "C"])
        rhs = pc.mutual_info(p, "A", "B") + pc.cond_mutual_info(p, "A", "C", "B")
        assert lhs == pytest.approx(rhs, abs=1e-10)
        assert pc.entropy(p) == pytest.approx(
            pc.entropy(p, "A") + pc.cond_entropy(p, "B", "A") + pc.cond_entropy(p, "C", ["A", "B"]), abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_mi_bounds(self, seed):
        p = random_joint(np.random.default_rng(seed), (3, 4), ["A", "B"], 0.5)
        i = pc.mutual_info(p, "A", "B")
        assert -1e-12 <= i <= min(pc.entropy(p, "A"), pc.entropy(p, "B")) + 1e-12


class TestTotalVariation:
    def test_range_and_identity(self):
        p = JointPmf.point([("X", 2)], (0,))
        q = JointPmf.point([("X", 2)], (1,))
        assert pc.tv_distance(p, q) == 1.0
        assert pc.tv_distance(p, p) == 0.0

    def test_axis_mismatch(self):
        with pytest.raises(pc.StructuralError):
            pc.tv_distance(JointPmf.uniform([("X", 2)]), JointPmf.uniform([("Y", 2)]))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_marginal_contraction_and_shared_kernel(self, seed):
        rng = np.random.default_rng(seed)
        p = random_joint(rng, (2, 3), ["A", "B"])
        q = random_joint(rng, (2, 3), ["A", "B"])
        k = random_kernel(rng, [("B", 3)], [("C", 2)])
        full = pc.tv_distance(p, q)
        assert pc.tv_distance(pc.marginalize(p, ["A"]), pc.marginalize(q, ["A"])) <= full + 1e-12
        assert pc.tv_distance(pc.chain_compose(p, k), pc.chain_compose(q, k)) == pytest.approx(full, abs=1e-12)


class TestBudget:
    def test_iid_power_over_budget(self):
        with pytest.raises(pc.CapacityError) as err:
            pc.iid_power(JointPmf.uniform([("X", 4)]), 13)
        assert err.value.required == 4 ** 13
        assert err.value.budget == pc.DEFAULT_BUDGET

    def test_iid_power_names(self):
        p = pc.iid_power(JointPmf.single("S", [0.3, 0.7]), 3)
        assert p.names == ("S_00", "S_01", "S_02")
        assert p.array(p.names)[1, 1, 0] == pytest.approx(0.7 * 0.7 * 0.3)
