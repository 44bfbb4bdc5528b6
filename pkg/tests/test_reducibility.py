import csv
import io
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from _support import fd_first, fd_mixed, random_rational_point
from hypothesis import given, settings
from hypothesis import strategies as st

from quasiweb.errors import InvalidStructure, NotAQuasigroup, NotReducibleBlock, SingularPoint
from quasiweb.funcs import poly
from quasiweb.jets import GenericMap
from quasiweb.quasigroup import RationalQuasigroup, linear_ramp, evaluate, isotopy_normalize, spheres, to_generic_map
from quasiweb.reducibility import (
    Classification,
    ConditionTriple,
    SamplerConfig,
    Structure,
    check_structure,
    classify,
    compare_instance,
    conditions_for,
    cross_validate,
    emit_reduction,
    factored_polynomial,
    eq16_residual,
    random_instance,
    residual,
    sample_regular,
    substream,
)

T = ConditionTriple


# structures and condition sets ----------------------------------------------

def test_flat_block_conditions():
    assert conditions_for(Structure.parse("[[1,2],3,4]")) == [T(1, 2, 3), T(1, 2, 4)]


def test_two_disjoint_blocks_conditions():
    got = set(conditions_for(Structure.parse("[[1,2],[3,4,5],6]")))
    expected = {T(1, 2, p) for p in (3, 4, 5, 6)}
    expected |= {T(a, b, s) for a, b in combinations((3, 4, 5), 2) for s in (1, 2, 6)}
    assert got == expected


def test_nested_block_conditions():
    got = set(conditions_for(Structure.parse("[[[1,2],3],4,5]")))
    expected = {T(a, b, p) for a, b in combinations((1, 2, 3), 2) for p in (4, 5)}
    expected.add(T(1, 2, 3))
    assert got == expected


@settings(max_examples=50)
@given(st.integers(3, 9), st.data())
def test_flat_block_count(n, data):
    k = data.draw(st.integers(2, n - 1))
    triples = conditions_for(Structure.single_block(n, range(1, k + 1)))
    assert len(triples) == k * (k - 1) // 2 * (n - k)
    assert all(t.a < t.b and t.p not in (t.a, t.b) for t in triples)


@pytest.mark.parametrize("text", [
    "[[1,2],2]",          # repeated index
    "[[1,2],4]",          # gap
    "[[1,2,3]]",          # block equals the whole scope
    "[[[1,2,3]],4]",      # inner block equals its parent
    "[[1],2,3]",          # singleton block
    "[1,2,\"x\"]",
    "{1:2}",
    "[[1,2],3",
])
def test_invalid_structures(text):
    with pytest.raises(InvalidStructure):
        Structure.parse(text)


def test_structure_arity_mismatch():
    with pytest.raises(InvalidStructure):
        Structure.parse("[[1,2],3]", n=4)


def test_triple_canonical_order():
    assert T.make(3, 1, 2) == T(1, 3, 2)
    with pytest.raises(ValueError):
        T.make(1, 1, 2)


# residuals -----------------------------------------------------------------

def test_residual_spot_values(q_sq_cube_lin):
    assert eq16_residual(q_sq_cube_lin, T(1, 2, 3), (1, 2, 1)) == 60
    r, rho = residual(q_sq_cube_lin, T(1, 2, 3), (1, 2, 1))
    assert r == Fraction(60, 256)
    r_float, _ = residual(q_sq_cube_lin, T(1, 2, 3), (1.0, 2.0, 1.0))
    assert r_float == pytest.approx(0.234375, abs=1e-12)

    q18 = linear_ramp(3)
    assert eq16_residual(q18, T(1, 2, 3), (1, 2, 1)) == -4
    assert residual(q18, T(1, 2, 3), (1, 2, 1))[0] == Fraction(-1, 64)


def test_residual_spot_value_by_finite_differences(q_sq_cube_lin):
    f = lambda x: evaluate(q_sq_cube_lin, x)  # noqa: E731
    x = (1, 2, 1)
    fpa, fpb = fd_mixed(f, x, 3, 1), fd_mixed(f, x, 3, 2)
    fa, fb = fd_first(f, x, 1), fd_first(f, x, 2)
    assert fpa * fb - fpb * fa == pytest.approx(0.234375, rel=1e-5)


def test_residual_equal_slopes_is_zero(rng):
    q = RationalQuasigroup(3, (poly([0, 2]), poly([0, 2]), poly([0, 0, 1])))
    for _ in range(20):
        x = list(rng.uniform(3, 7, size=3))
        assert residual(q, T(1, 2, 3), x)[0] == 0
        assert eq16_residual(q, T(1, 2, 3), [Fraction(v) for v in x]) == 0


def test_isolated_zero_of_second_factor(q_sq_cube_lin):
    assert eq16_residual(q_sq_cube_lin, T(1, 2, 3), (1, 1, 1)) == 0
    assert eq16_residual(q_sq_cube_lin, T(1, 2, 3), (1, 2, 1)) != 0
    assert not factored_polynomial(q_sq_cube_lin, T(1, 2, 3)).is_zero()


def test_residual_singular(q_sq_cube_lin):
    with pytest.raises(SingularPoint):
        eq16_residual(q_sq_cube_lin, T(1, 2, 3), (1, -1, 0))
    with pytest.raises(SingularPoint):
        residual(q_sq_cube_lin, T(1, 2, 3), (1.0, -1.0, 0.0))


def test_factorization_identity_exact(rng):
    for k in range(300):
        q = random_instance(np.random.default_rng(1000 + k)).q
        x = random_rational_point(rng, q.n)
        a, b, p = (int(v) + 1 for v in rng.choice(q.n, size=3, replace=False))
        t = T.make(a, b, p)
        s = sum(x) + q.a
        assert residual(q, t, x)[0] * s**4 == eq16_residual(q, t, x)


def test_generic_map_residual_matches_closed_form(rng):
    q = random_instance(np.random.default_rng(5), planted=False).q
    m = to_generic_map(q)
    for _ in range(20):
        x = list(rng.uniform(3, 7, size=q.n))
        for t in [T(1, 2, 3), T(1, 3, 2)]:
            r_q, rho_q = residual(q, t, x)
            r_m, rho_m = residual(m, t, x)
            assert r_m == pytest.approx(r_q, rel=1e-9, abs=1e-15)


# sampling ------------------------------------------------------------------

def test_check_structure_examples():
    cfg = SamplerConfig(count=64, tol=1e-8)
    rep = check_structure(linear_ramp(3), Structure.parse("[[1,2],3]"), cfg)
    assert rep.verdict == "fails" and rep.exact is False

    q = RationalQuasigroup(4, (poly([0, 3]), poly([0, 3]), poly([0, 0, 1]), poly([0, 0, 0, 1])))
    for seed in range(5):
        rep = check_structure(q, Structure.parse("[[1,2],3,4]"), SamplerConfig(seed=seed))
        assert rep.holds and rep.exact is True
        assert all(t.max_rho == 0 for t in rep.triples)

    rep = check_structure(spheres(4), Structure.single_block(4, (1, 2)), cfg)
    assert rep.verdict == "fails"


def test_check_structure_generic_map():
    m = GenericMap.parse("(/ (+ (* 3 x1) (* 3 x2) (pow x3 2) (pow x4 3)) (+ x1 x2 x3 x4))")
    rep = check_structure(m, Structure.parse("[[1,2],3,4]"), SamplerConfig(count=16))
    assert rep.holds and rep.exact is None
    rep = check_structure(m, Structure.parse("[[1,3],2,4]"), SamplerConfig(count=16))
    assert not rep.holds


def test_generic_map_goursat_form_holds():
    # F = g(h(x1, x2), x3) with h = x1 + x2 and g(h, x3) = h x3 + h**2 + x3**3
    m = GenericMap.parse("(+ (* (+ x1 x2) x3) (pow (+ x1 x2) 2) (pow x3 3))")
    rep = check_structure(m, Structure.parse("[[1,2],3]"), SamplerConfig(count=32, box=((1, 2),) * 3))
    assert rep.holds
    rep = check_structure(m, Structure.parse("[[1,3],2]"), SamplerConfig(count=32, box=((1, 2),) * 3))
    assert not rep.holds


def test_report_verdict_matches_tolerance():
    rep = check_structure(linear_ramp(4), Structure.parse("[[1,2],3,4]"), SamplerConfig(count=8))
    for t in rep.triples:
        assert t.holds == (t.max_rho <= rep.tol)
        assert t.samples == 8


def test_report_serialisation():
    rep = check_structure(linear_ramp(4), Structure.parse("[[1,2],3,4]"), SamplerConfig(count=8))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["a", "b", "p", "samples", "max_rho", "mean_rho", "verdict"]
    assert [r[:3] for r in rows[1:]] == [["1", "2", "3"], ["1", "2", "4"]]
    doc = rep.to_json()
    assert doc["verdict"] == "fails" and doc["exact_verdict"] == "fails"
    assert len(doc["triples"]) == 2


def test_sampling_rejects_singular_points():
    q = RationalQuasigroup(2, (poly([0, 0, 1]), poly([0, 1])), 0, 0)
    cfg = SamplerConfig(count=200, box=((-1, 1), (-1, 1)))
    X = sample_regular(q, cfg, substream(0, 1))
    assert len(X) == 200
    assert np.all(np.abs(X.sum(axis=1)) >= q.eps_sing)


def test_sampling_gives_up_on_singular_box():
    q = RationalQuasigroup(2, (poly([0, 0, 1]), poly([0, 1])), 0, 0)
    cfg = SamplerConfig(count=4, box=((0, 1e-9), (0, 1e-9)), max_rounds=5)
    with pytest.raises(SingularPoint):
        sample_regular(q, cfg, substream(0, 1))


def test_sampler_config_invariants():
    with pytest.raises(ValueError):
        SamplerConfig(count=0)
    with pytest.raises(ValueError):
        SamplerConfig(tol=0)
    with pytest.raises(ValueError):
        SamplerConfig(box=((1, 1),) * 2).bounds(2)


def test_check_structure_deterministic_under_threads():
    q = random_instance(np.random.default_rng(3), planted=False).q
    s = Structure.single_block(q.n, (1, 2))
    serial = [check_structure(q, s, SamplerConfig(seed=k)).to_json() for k in range(8)]
    with ThreadPoolExecutor(4) as pool:
        threaded = list(pool.map(lambda k: check_structure(q, s, SamplerConfig(seed=k)).to_json(), range(8)))
    assert serial == threaded


def test_triple_substreams_independent_of_structure():
    q = linear_ramp(5)
    one = check_structure(q, Structure.parse("[[1,2],3,4,5]"), SamplerConfig(seed=9))
    two = check_structure(q, Structure.parse("[[1,2],[3,4],5]"), SamplerConfig(seed=9))
    rows = {t.triple: t.max_rho for t in two.triples}
    for t in one.triples:
        assert rows[t.triple] == t.max_rho


# classification ------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 4, 5, 8])
def test_ramp_irreducible(n):
    assert classify(linear_ramp(n)).verdict == Classification.IRREDUCIBLE


def test_reducible_block_with_slope():
    for c in (Fraction(3), Fraction(-2, 5)):
        q = RationalQuasigroup(4, (poly([0, c]), poly([0, c]), poly([0, 0, 1]), poly([0, 0, 0, 1])))
        cls = classify(q)
        assert cls.verdict == Classification.REDUCIBLE
        assert [(b.indices, b.slope) for b in cls.blocks] == [((1, 2), c)]


@pytest.mark.parametrize("n", [2, 3, 5])
def test_spheres_irreducible(n):
    assert classify(spheres(n)).verdict == Classification.IRREDUCIBLE


def test_all_equal_slopes_degenerate():
    cls = classify(RationalQuasigroup(4, (poly([0, 2]),) * 4))
    assert cls.verdict == Classification.DEGENERATE
    assert cls.offending == (1, 2, 3, 4)


def test_all_equal_slopes_with_offset_completely_reducible():
    cls = classify(RationalQuasigroup(3, (poly([0, 2]),) * 3, A=1))
    assert cls.verdict == Classification.COMPLETE
    assert cls.blocks[0].indices == (1, 2, 3)


def test_affine_block_recorded_with_intercepts():
    q = RationalQuasigroup(3, (poly([1, 2]), poly([5, 2]), poly([0, 0, 0, 1])))
    cls = classify(q)
    assert cls.verdict == Classification.REDUCIBLE
    (b,) = cls.blocks
    assert (b.indices, b.slope, b.intercepts) == ((1, 2), 2, (1, 5))
    # the first factor f_1' - f_2' of the residual is the zero polynomial
    assert factored_polynomial(q, T(1, 2, 3)).is_zero()


def test_multiple_blocks_sorted():
    q = RationalQuasigroup(6, (poly([0, 5]), poly([0, 1]), poly([0, 1]), poly([0, 5]), poly([0, 0, 1]), poly([2, 1])))
    cls = classify(q)
    assert [b.indices for b in cls.blocks] == [(1, 4), (2, 3, 6)]
    assert cls.to_json()["blocks"][1] == {"indices": [2, 3, 6], "slope": "1", "intercepts": ["0", "0", "2"]}


def test_classification_json():
    assert classify(linear_ramp(3)).to_json() == {"verdict": "Irreducible", "blocks": []}
    doc = classify(RationalQuasigroup(2, (poly([0, 1]), poly([0, 1])))).to_json()
    assert doc["verdict"] == "NotAQuasigroup" and doc["offending"] == [1, 2]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_permutation_equivariance(seed, rnd):
    q = random_instance(np.random.default_rng(seed)).q
    perm = list(range(q.n))
    rnd.shuffle(perm)
    a, b = classify(q), classify(q.permuted(perm))
    assert a.verdict == b.verdict
    mapped = {tuple(sorted(perm[i - 1] + 1 for i in blk.indices)): blk.slope for blk in a.blocks}
    assert mapped == {blk.indices: blk.slope for blk in b.blocks}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_isotopy_invariance(seed):
    q = random_instance(np.random.default_rng(seed)).q
    a, b = classify(q), classify(isotopy_normalize(q))
    assert a.verdict == b.verdict
    assert [(x.indices, x.slope) for x in a.blocks] == [(x.indices, x.slope) for x in b.blocks]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_soundness_blocks_have_zero_residual(seed):
    q = random_instance(np.random.default_rng(seed), planted=True).q
    cls = classify(q)
    cfg = SamplerConfig(count=32, seed=seed)
    for blk in cls.blocks:
        if len(blk.indices) == q.n:
            continue
        rep = check_structure(q, Structure.single_block(q.n, blk.indices), cfg)
        assert all(t.max_rho <= 1e-10 for t in rep.triples)
        assert rep.exact


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_completeness_irreducible_pairs_have_witness(seed):
    q = random_instance(np.random.default_rng(seed), planted=False).q
    cls = classify(q)
    if cls.verdict == Classification.DEGENERATE:
        return
    inside = cls.pairs()
    for a, b in combinations(range(1, q.n + 1), 2):
        if (a, b) in inside:
            continue
        rep = check_structure(q, Structure.single_block(q.n, (a, b)), SamplerConfig(count=64, seed=seed))
        assert max(t.max_rho for t in rep.triples) > 10 * rep.tol


# reduced forms -------------------------------------------------------------

def test_emit_reduction_identity(rng):
    f3, f4 = poly([1, 0, 2]), poly([0, -1, 0, 1])
    q = RationalQuasigroup(4, (poly([3, 2]), poly([-1, 2]), f3, f4), Fraction(1, 2), -3)
    red = emit_reduction(q, (1, 2))
    assert red.slope == 2 and red.intercept_sum == 2
    for _ in range(10):
        x = random_rational_point(rng, 4)
        assert red(x) == evaluate(q, x)
        xf = [float(v) for v in x]
        assert red(xf) == pytest.approx(float(evaluate(q, xf)), rel=1e-12)
    assert red.describe()["h"] == "x1 + x2"


def test_emit_reduction_three_block(rng):
    c = Fraction(4, 3)
    q = RationalQuasigroup(5, (poly([0, c]),) * 3 + (poly([0, 0, 1]), poly([2, 0, 0, 1])))
    red = emit_reduction(q, (1, 2, 3))
    assert red.rest == (4, 5)
    for _ in range(10):
        x = random_rational_point(rng, 5)
        assert red(x) == evaluate(q, x)
    # any two indices of a block form a reducible sub-block
    assert emit_reduction(q, (1, 3)).block == (1, 3)


def test_emit_reduction_rejects():
    with pytest.raises(NotReducibleBlock):
        emit_reduction(linear_ramp(3), (1, 2))
    with pytest.raises(NotReducibleBlock):
        emit_reduction(RationalQuasigroup(2, (poly([0, 1]),) * 2), (1, 2))
    with pytest.raises(NotReducibleBlock):
        emit_reduction(linear_ramp(3), (1,))


# cross-validation ----------------------------------------------------------

def test_planted_block_recovered_under_permutation():
    q = RationalQuasigroup(4, (poly([0, 2]), poly([0, 0, 1]), poly([1, 2]), poly([0, 0, 0, 1])))
    cls, agree, found = compare_instance(q, SamplerConfig())
    assert agree
    assert [b.indices for b in cls.blocks] == [(1, 3)]
    assert found == [(1, 3)]


def test_all_slopes_equal_never_irreducible():
    for A in (0, 1):
        q = RationalQuasigroup(3, (poly([0, 3]),) * 3, A=A)
        assert classify(q).verdict in (Classification.COMPLETE, Classification.DEGENERATE)
        assert compare_instance(q, SamplerConfig())[1]


def test_cross_validate_small():
    rep = cross_validate(20, seed=1)
    assert rep.ok and rep.agreement == 100.0
    assert rep.planted == 10


def test_random_instance_planted_layout():
    for k in range(50):
        inst = random_instance(np.random.default_rng(k), planted=True)
        assert len(inst.planted) >= 2
        blocks = [b.indices for b in classify(inst.q).blocks]
        if classify(inst.q).verdict != Classification.DEGENERATE:
            assert inst.planted in blocks


def test_check_structure_requires_solvable():
    with pytest.raises(NotAQuasigroup):
        check_structure(RationalQuasigroup(3, (poly([0, 1]),) * 3), Structure.parse("[[1,2],3]"))
