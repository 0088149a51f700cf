import math
import numpy as np
import pytest
from fractions import Fraction

from src.models.descriptors import IdealSpec
from src.models.errors import InvalidFamily, LiteralParseError, UnknownBuiltin
from src.models.sequences import SequenceView
from src.services.zoo import (
    BUILTIN_DOUBLES,
    BUILTIN_KERNELS,
    builtin_double,
    builtin_family,
    builtin_kernel,
    builtin_matrix,
    coordinate_sequence,
)

FIN = IdealSpec(kind="fin")
DENSITY = IdealSpec(kind="density")


class TestBuiltinMatrix:
    """builtin_matrix のテスト"""

    def test_cesaro_entries(self):
        """a_{n,k} = 1/(n+1)（k ≤ n）"""
        A = builtin_matrix("cesaro").matrix

        assert A.entry(3, 2)[0, 0] == pytest.approx(0.25)
        assert A.entry(3, 4)[0, 0] == 0.0
        assert A.exact_rule(3, 2) == Fraction(1, 4)

    def test_euler_rows_are_binomial(self, matrix_service):
        """Euler(1) の行は C(n,k)/2^n で和が 1"""
        A = builtin_matrix("euler(1)").matrix

        assert A.entry(2, 1)[0, 0] == pytest.approx(0.5)
        assert matrix_service.row_operator_sum_exact(A, 10, 64) == Fraction(1)

    def test_riesz_linear_weights(self):
        """p_k = k+1 の Riesz 平均"""
        A = builtin_matrix("riesz(linear)").matrix
        assert A.entry(2, 1)[0, 0] == pytest.approx(1 / 3)
        assert A.exact_rule(2, 1) == Fraction(1, 3)

    def test_diagonal_block(self):
        """diagonal(T) は n = k の位置に T を置く"""
        named = builtin_matrix("diagonal([[1,0],[0,2]])")

        A = named.matrix

        assert (A.d, A.m) == (2, 2)
        assert np.array_equal(A.entry(4, 4), np.diag([1.0, 2.0]))
        assert not np.any(A.entry(4, 3))
        assert A.rank_one is not None

    def test_rank_one_scales_inner(self):
        """rank_one(a, A₀) の各ブロックは a_{n,k}·A₀"""
        A = builtin_matrix("rank_one(cesaro,[[1,2],[3,4]])").matrix
        assert np.allclose(A.entry(1, 0), 0.5 * np.array([[1.0, 2.0], [3.0, 4.0]]))

    def test_random_is_deterministic(self):
        """同じシードの乱数行列は一致し、行の絶対値和は 1"""
        first = builtin_matrix("random(7,banded)").matrix
        second = builtin_matrix("random(7,banded)").matrix

        row = first.row(20, 64)

        assert np.array_equal(row.blocks, second.row(20, 64).blocks)
        assert math.fsum(np.abs(row.blocks).ravel()) == pytest.approx(1.0)
        assert row.ks.min() >= 12

    def test_identity_and_zero_dims(self):
        assert builtin_matrix("identity(3)").matrix.d == 3
        zero = builtin_matrix("zero(2,3)").matrix
        assert (zero.d, zero.m) == (2, 3)
        assert not np.any(zero.entry(1, 1))

    def test_tail_projection_is_truncated(self):
        """切断した尾部射影は K − 1 行まで"""
        A = builtin_matrix("tail_projection(8)").matrix
        assert A.d == 9
        assert A.row_horizon == 7

    def test_identity_plus_tail_is_uncertified(self, matrix_service):
        """Id + B は列の有限性も非負性も宣言せず、変換は証明書なし"""
        named = builtin_matrix("identity_plus_tail(4)")
        x = SequenceView(lambda n: np.ones(4), 4, vectorized=lambda ns: np.ones((len(ns), 4)))

        result = matrix_service.transform(named.matrix, x, 1, 16)

        assert "証明書なし" in named.provenance
        assert named.matrix.column_finite_bound is None
        assert not named.matrix.nonnegative
        assert not result.certified

    @pytest.mark.parametrize("literal", ["nope", "random(1,weird)", "riesz(cubic)"])
    def test_unknown_builtin_fails(self, literal):
        with pytest.raises(UnknownBuiltin):
            builtin_matrix(literal)

    @pytest.mark.parametrize("literal", ["euler(x)", "euler(-1)", "tail_projection(0)", "rank_one(cesaro)"])
    def test_bad_parameters_fail(self, literal):
        with pytest.raises(LiteralParseError):
            builtin_matrix(literal)


class TestKernelsAndDoubles:
    """二重カーネルと二重系列のテスト"""

    @pytest.mark.parametrize("name", BUILTIN_KERNELS)
    def test_kernels_build(self, name):
        kernel = builtin_kernel(name)
        ps, qs = kernel.support((1, 2))
        assert len(ps) == len(qs) > 0

    def test_double_cesaro_weights(self):
        """行 (m, n) の重みは 1/((m+1)(n+1))"""
        kernel = builtin_kernel("double_cesaro")
        ps, qs = kernel.support((1, 2))
        assert len(ps) == 6
        assert np.allclose(kernel.rule((1, 2), ps, qs), 1 / 6)

    @pytest.mark.parametrize("literal", [d.split("(")[0] for d in BUILTIN_DOUBLES])
    def test_doubles_evaluate(self, literal):
        x = builtin_double(literal).sequence
        assert x(3, 5).shape == (1,)

    def test_checkerboard_has_no_declared_limit(self):
        assert builtin_double("checkerboard").sequence.p_limit is None

    def test_unknown_double_fails(self):
        with pytest.raises(UnknownBuiltin):
            builtin_double("nope")
        with pytest.raises(UnknownBuiltin):
            builtin_kernel("nope")


class TestFamilies:
    """builtin_family のテスト"""

    def test_spiky_density(self, test_settings):
        """平方数で 100、それ以外で 5"""
        family = builtin_family("spiky_density(5,100,squares)", settings=test_settings)

        x = family.members(2, 0)[0]

        values = x.sample(16)[:, 0]
        assert values[[0, 1, 4, 9, 16]].tolist() == [100.0] * 5
        assert values[[2, 3, 10]].tolist() == [5.0] * 3
        assert x.limit.tolist() == [5.0]
        assert family.ideal == DENSITY

    def test_spikes_outside_ideal_fail(self, test_settings):
        """スパイク集合がイデアルに属さない族は作れない"""
        with pytest.raises(InvalidFamily):
            builtin_family("spiky_density(5,100,squares)", FIN, settings=test_settings)

    def test_c00_supported_vanishes_off_support(self, test_settings):
        """台の外では 0、台の上では ±1"""
        family = builtin_family("c00_supported(range(0,5))", settings=test_settings)

        values = family.members(3, 1)[2].sample(10)[:, 0]

        assert np.all(np.abs(values[:6]) == 1.0)
        assert not np.any(values[6:])

    def test_unbounded_blowup(self, test_settings):
        """集合の上で n+1、それ以外で η"""
        family = builtin_family("unbounded_Iconvergent(2,squares)", settings=test_settings)

        x = family.members(1, 0)[0]

        assert x(9)[0] == 10.0
        assert x(2)[0] == 2.0
        assert not x.bounded

    def test_convergent_geometric(self, test_settings):
        """幾何的な速さで宣言された極限に近づく"""
        x = builtin_family("convergent(1,geometric)", settings=test_settings).members(1, 0)[0]
        assert x(60)[0] == pytest.approx(1.0)

    def test_bounded_divergent_declares_no_limit(self, test_settings):
        family = builtin_family("bounded_divergent", settings=test_settings)
        assert not family.limit_declared
        assert family.members(1, 0)[0].limit is None

    def test_coordinates(self):
        """x_k = e_k（k < d）"""
        values = coordinate_sequence(2).sample(3)
        assert values.tolist() == [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]

    @pytest.mark.parametrize("literal", ["nope", "convergent(1,weird)"])
    def test_unknown_family_fails(self, test_settings, literal):
        with pytest.raises(UnknownBuiltin):
            builtin_family(literal, settings=test_settings)

    def test_members_are_deterministic(self, test_settings):
        """同じシードからは同じ系列"""
        family = builtin_family("convergent", settings=test_settings)
        first = family.members(3, 5)[1].sample(8)
        second = family.members(3, 5)[1].sample(8)
        assert np.array_equal(first, second)
