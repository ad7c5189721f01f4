import numpy as np
import pytest

from coordsim import channel as chm
from coordsim.channel import C, S, SHAT, X, Y, Code, DMChannel, Source
from coordsim.probcore import (
    CapacityError,
    CondPmf,
    JointPmf,
    StructuralError,
    chain_compose,
    conditional,
    entropy,
    iid_power,
    letters,
    marginalize,
    product,
    tv_distance,
)
from coordsim.seqarray import kron_power

# 4 h(0.3) by direct summation
FOUR_H03 = 3.525163596922771


def copy_code(n, R0=0.0, size=2):
    return Code.letterwise(n, R0, chm.identity_kernel(size, S, X), chm.identity_kernel(size, Y, SHAT))


def ideal_copy_target(p):
    """S = X = Y = Shat."""
    src = Source(chm.bern(p))
    return chm.target_from_kernels(src, chm.identity_kernel(2, S, X), DMChannel(chm.identity_kernel(2)),
                                   CondPmf.deterministic([(S, 2), (X, 2), (Y, 2)], [(SHAT, 2)], lambda s, x, y: y))


@pytest.mark.parametrize("n,rate,size", [(4, 0.0, 1), (4, 0.25, 2), (4, 0.5, 4), (3, 1 / 3, 2), (6, 0.8125, 30)])
def test_alphabet_size(n, rate, size):
    assert chm.alphabet_size(n, rate) == size


def test_rejects_negative_rate():
    with pytest.raises(ValueError):
        chm.alphabet_size(3, -0.1)


def test_compose_bern_bsc_entry():
    joint = chain_compose(chm.bern(0.3), chm.bsc(0.2, S, Y))
    assert joint.array([S, Y])[0, 0] == pytest.approx(0.7 * 0.8, abs=1e-15)
    assert joint.array([S, Y])[1, 1] == pytest.approx(0.3 * 0.8, abs=1e-15)


def test_symmetric_channel_preserves_uniform():
    y = marginalize(chain_compose(chm.bern(0.5, X), chm.bsc(0.1)), [Y])
    assert np.allclose(y.weights, [0.5, 0.5])


def test_iid_entropy_additive():
    assert entropy(iid_power(chm.bern(0.3), 4)) == pytest.approx(FOUR_H03, abs=1e-9)


def test_source_and_channel_validate_axes():
    with pytest.raises(StructuralError):
        Source(chm.bern(0.3, "Z"))
    with pytest.raises(StructuralError):
        DMChannel(chm.bsc(0.1, "A", Y))


def test_code_checks_common_randomness_size():
    code = copy_code(2, 0.5)
    with pytest.raises(StructuralError):
        Code(2, 1.0, code.encoder, code.decoder)


def test_identity_copy_n1_is_diagonal():
    joint = chm.induced_joint(copy_code(1), Source(chm.bern(0.3)), DMChannel(chm.identity_kernel(2)))
    arr = marginalize(joint, ["S_00", "X_00", "Y_00", "Shat_00"]).array(["S_00", "X_00", "Y_00", "Shat_00"])
    assert arr[0, 0, 0, 0] == pytest.approx(0.7)
    assert arr[1, 1, 1, 1] == pytest.approx(0.3)


def test_copy_code_over_identity_has_zero_gap():
    for n in (1, 2, 3):
        gap = chm.coordination_gap(copy_code(n, 0.5), Source(chm.bern(0.3)), DMChannel(chm.identity_kernel(2)),
                                   ideal_copy_target(0.3))
        assert gap == pytest.approx(0.0, abs=1e-15)


def test_own_single_letterization_has_zero_gap():
    rng = np.random.default_rng(0)
    src = Source(JointPmf.single(S, rng.dirichlet(np.ones(3))))
    enc = CondPmf([(S, 3)], [(X, 2)], rng.dirichlet(np.ones(2), size=3))
    ch = DMChannel(CondPmf([(X, 2)], [(Y, 2)], rng.dirichlet(np.ones(2), size=2)))
    dec = CondPmf([(Y, 2)], [(SHAT, 3)], rng.dirichlet(np.ones(3), size=2))
    code = Code.letterwise(1, 0.0, enc, dec)
    dec_sxy = CondPmf([(S, 3), (X, 2), (Y, 2)], [(SHAT, 3)],
                      np.broadcast_to(dec.matrix()[None, None], (3, 2, 2, 3)))
    target = chm.target_from_kernels(src, enc, ch, dec_sxy)
    assert chm.coordination_gap(code, src, ch, target) == pytest.approx(0.0, abs=1e-15)


def test_noisy_copy_gap_matches_enumeration():
    # target S=X=Y=Shat; over BSC(0.1) the pair gap at n=2 is P{Y^2 != S^2} = 1 - 0.9^2
    gap = chm.coordination_gap(copy_code(2), Source(chm.bern(0.5)), DMChannel(chm.bsc(0.1)), ideal_copy_target(0.5))
    assert gap == pytest.approx(1 - 0.81, abs=1e-12)
    assert gap > 0


def test_induced_joint_invariants():
    rng = np.random.default_rng(5)
    n, R0 = 2, 0.5
    m0 = chm.alphabet_size(n, R0)
    enc = rng.dirichlet(np.ones(4), size=(m0, 4))
    dec = rng.dirichlet(np.ones(4), size=(m0, 4))
    code = Code.from_arrays(n, R0, (2, 2, 2, 2), enc, dec)
    src = Source(chm.bern(0.3))
    ch = DMChannel(chm.bsc(0.2))
    joint = chm.induced_joint(code, src, ch)
    sc = marginalize(joint, [C] + letters(S, n))
    ref = product(code.common.pmf(), iid_power(src.pmf, n))
    assert tv_distance(sc, ref) < 1e-15
    y_given_x = conditional(marginalize(joint, letters(X, n) + letters(Y, n)), letters(Y, n), letters(X, n))
    assert np.allclose(y_given_x.matrix(), kron_power(ch.matrix, n), atol=1e-12)


def test_induced_joint_budget():
    with pytest.raises(CapacityError):
        chm.induced_joint(copy_code(4), Source(chm.bern(0.3)), DMChannel(chm.bsc(0.1)), budget=100)


def test_simulation_matches_exact_law():
    # the copy code over BSC(0.1), n=2, against its exact induced law
    n, samples = 2, 200_000
    code = copy_code(n)
    src, ch = Source(chm.bern(0.5)), DMChannel(chm.bsc(0.1))
    joint = chm.induced_joint(code, src, ch)
    exact = marginalize(joint, [nm for nm in joint.names if nm != C])
    counts = chm.simulate_code(code, src, ch, samples, np.random.default_rng(11))
    p = exact.weights
    assert counts.shape == p.shape
    assert counts.sum() == samples
    assert np.all(counts[p == 0] == 0)
    sd = np.sqrt(samples * p * (1 - p))
    z = np.abs(counts - samples * p)[p > 0] / sd[p > 0]
    assert z.max() < 5
