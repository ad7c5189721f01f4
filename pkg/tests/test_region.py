import numpy as np
import pytest

from coordsim import region as rg
from coordsim.probcore import JointPmf, StructuralError

from oracles import h2

H03 = 0.8812908992306927  # h(0.3)
EYE = np.eye(2)
P_S = [0.7, 0.3]
SHAT_IS_Y = np.broadcast_to(EYE[None, None], (2, 2, 2, 2))


def shat_is_s():
    h = np.zeros((2, 2, 2, 2))
    h[0, ..., 0] = 1.0
    h[1, ..., 1] = 1.0
    return h


def identity_query(R0=0.5):
    return rg.query_from_kernels(P_S, EYE, EYE, shat_is_s(), R0)


def padded_query(R0=0.9):
    # X independent of S and uniform: the channel has capacity to spare
    return rg.query_from_kernels(P_S, np.full((2, 2), 0.5), EYE, shat_is_s(), R0)


def test_oracle_constant():
    assert h2(0.3) == pytest.approx(H03, abs=1e-15)


class TestDecomposition:
    def test_composed_target(self):
        q = rg.query_from_kernels(P_S, [[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.2, 0.8]], SHAT_IS_Y, 0.1)
        assert rg.validate_decomposition(q) < 1e-15

    def test_y_depends_on_s(self):
        t = np.zeros((2, 2, 2, 2))
        for s in range(2):
            t[s, 0, s, s] = P_S[s]  # X constant, Y = S
        q = rg.RegionQuery(JointPmf([("S", 2), ("X", 2), ("Y", 2), ("Shat", 2)], t),
                           identity_query().channel, identity_query().source, 0.1)
        assert rg.validate_decomposition(q) > 0.1
        with pytest.raises(rg.DecompositionError):
            rg.check_inner(q)

    def test_perturbation_residual_range(self):
        q = rg.query_from_kernels(P_S, [[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.2, 0.8]], SHAT_IS_Y, 0.1)
        t = q.tensor.copy()
        t[0, 0, 0, 0] += 1e-3
        t /= t.sum()
        bad = rg.RegionQuery(JointPmf([("S", 2), ("X", 2), ("Y", 2), ("Shat", 2)], t), q.channel, q.source, 0.1)
        assert 1e-4 <= rg.validate_decomposition(bad) <= 1e-2

    def test_alphabet_mismatch(self):
        q = identity_query()
        t = np.full((2, 3, 2, 2), 1 / 24)
        with pytest.raises(StructuralError):
            rg.validate_decomposition(rg.RegionQuery(JointPmf([("S", 2), ("X", 3), ("Y", 2), ("Shat", 2)], t),
                                                     q.channel, q.source, 0.1))

    def test_cardinality_bound(self):
        q = identity_query()
        with pytest.raises(ValueError):
            rg.RegionQuery(q.target, q.channel, q.source, 0.1, u_card=18)

    def test_dict_round_trip(self):
        q = padded_query()
        back = rg.RegionQuery.from_dict(q.to_dict())
        assert np.array_equal(back.tensor, q.tensor) and back.R0 == q.R0 and back.u_card == q.u_card


class TestEvaluate:
    def test_constant_u(self):
        q = rg.query_from_kernels(P_S, [[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.2, 0.8]], SHAT_IS_Y, 0.1)
        w = rg.RegionWitness(np.ones((2, 1)), np.array([[[0.8, 0.2], [0.3, 0.7]]]), EYE[None])
        i_us, i_uy, i_c, res = rg.evaluate_witness(q, w)
        assert (i_us, i_uy, i_c) == (0.0, 0.0, 0.0)
        assert res < 1e-15

    def test_u_equals_s_identity(self):
        q = identity_query()
        x_us = np.stack([EYE[[0, 0]], EYE[[1, 1]]])
        h_uy = np.stack([EYE[[0, 0]], EYE[[1, 1]]])
        i_us, i_uy, i_c, res = rg.evaluate_witness(q, rg.RegionWitness(EYE, x_us, h_uy))
        assert i_us == pytest.approx(H03, abs=1e-12)
        assert i_uy == pytest.approx(H03, abs=1e-12)
        assert i_c == pytest.approx(0.0, abs=1e-12)
        assert res < 1e-15
        assert not rg.inner_holds(q, rg.RegionWitness(EYE, x_us, h_uy))
        assert rg.outer_holds(q, rg.RegionWitness(EYE, x_us, h_uy))

    def test_mismatched_witness(self):
        q = identity_query()
        w = rg.RegionWitness(np.ones((2, 1)), np.full((1, 2, 2), 0.5), np.full((1, 2, 2), 0.5))
        assert rg.evaluate_witness(q, w)[3] > 0.1

    def test_shape_check(self):
        with pytest.raises(StructuralError):
            rg.evaluate_witness(identity_query(), rg.RegionWitness(EYE, np.ones((2, 2, 3)) / 3, np.ones((2, 2, 2)) / 2))


def test_simplex_grid():
    pts = rg.simplex_grid(3, 8)
    assert pts.shape == (45, 3)
    assert np.allclose(pts.sum(axis=1), 1.0)
    assert len({tuple(p) for p in pts}) == 45


class TestMembership:
    def test_zero_rate_never_inner(self):
        q = rg.query_from_kernels(P_S, EYE, [[0.9, 0.1], [0.1, 0.9]],
                                  np.broadcast_to(np.array([[0.8, 0.2], [0.2, 0.8]])[:, None, None, :], (2, 2, 2, 2)),
                                  0.0)
        assert rg.check_inner(q).member == rg.NOT_FOUND

    def test_identity_boundary(self):
        q = identity_query()
        assert rg.check_inner(q).member == rg.NOT_FOUND
        outer = rg.check_outer(q)
        assert outer.member == rg.MEMBER
        assert rg.outer_holds(q, outer.witness)

    @pytest.mark.parametrize("R0,expected", [(0.85, rg.NOT_FOUND), (0.9, rg.MEMBER)])
    def test_padded_target(self, R0, expected):
        res = rg.check_inner(padded_query(R0))
        assert res.member == expected
        if expected == rg.MEMBER:
            assert res.value == pytest.approx(H03, abs=1e-6)

    def test_independent_shat_small_rate(self):
        # X independent of S through an identity channel; Shat independent of everything
        q = rg.query_from_kernels(P_S, np.full((2, 2), 0.5), EYE, np.full((2, 2, 2, 2), 0.5), 0.01)
        res = rg.check_inner(q)
        assert res.member == rg.MEMBER
        assert rg.inner_holds(q, res.witness)

    def test_constant_u_outer_at_zero_rate(self):
        q = rg.query_from_kernels(P_S, [[0.8, 0.2], [0.3, 0.7]], [[0.9, 0.1], [0.2, 0.8]], SHAT_IS_Y, 0.0)
        res = rg.check_outer(q)
        assert res.member == rg.MEMBER

    def test_witness_soundness_and_monotone_rate(self):
        q = padded_query(0.9)
        res = rg.check_inner(q)
        w = res.witness
        i_us, i_uy, i_c, resid = rg.evaluate_witness(q, w)
        assert (i_us, i_uy, i_c) == pytest.approx((w.i_us, w.i_uy, w.i_cond), abs=1e-12)
        assert i_us < i_uy - 1e-9 and q.R0 > i_c + 1e-9 and resid < 1e-6
        for r in (0.95, 1.5):
            assert rg.inner_holds(q.with_rate(r), w)


class TestMinCommonRandomness:
    def test_copy_chain_needs_no_common_randomness(self):
        # X independent of S, identity channel, Shat = X: U = X is a function of Y
        h = np.zeros((2, 2, 2, 2))
        h[:, 0, :, 0] = 1.0
        h[:, 1, :, 1] = 1.0
        q = rg.query_from_kernels(P_S, np.full((2, 2), 0.5), EYE, h, 0.0)
        res = rg.min_common_randomness(q)
        assert res.member == rg.MEMBER
        assert res.value < 1e-9

    def test_result_is_upper_bound_with_witness(self):
        res = rg.min_common_randomness(padded_query())
        i_c = rg.evaluate_witness(padded_query(), res.witness)[2]
        assert res.value == pytest.approx(i_c, abs=1e-12)
        assert res.log and "grid resolution" in res.log[0]

    def test_infeasible_reports_not_found(self):
        res = rg.min_common_randomness(identity_query())
        assert res.member == rg.NOT_FOUND and res.witness is None and res.value == float("inf")
