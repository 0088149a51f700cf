import numpy as np
import pytest

from src.models.descriptors import ArithmeticProgression, FiniteSet, IdealSpec
from src.models.errors import (
    HorizonExhausted,
    HypothesisFailed,
    NotDivergent,
    UnsupportedIdeal,
    WorkbenchError,
    ZeroOperator,
)
from src.services.witnesses import describe_support
from src.services.zoo import builtin_matrix

FIN = IdealSpec(kind="fin")
DENSITY = IdealSpec(kind="density")
H = 1024


class TestDescribeSupport:
    """describe_support 関数のテスト"""

    def test_even_positions(self):
        """偶数位置は ap(0,2)"""
        mask = np.arange(20) % 2 == 0
        assert describe_support(mask).to_literal() == "ap(0,2)"

    def test_empty_mask(self):
        assert describe_support(np.zeros(8, dtype=bool)).to_literal() == "finite()"

    def test_irregular_mask(self):
        """周期で書けない場合は有限集合"""
        mask = np.array([True, False, False, True, True])
        assert describe_support(mask) == FiniteSet(values=(0, 3, 4))


class TestSlidingHump:
    """sliding_hump のテスト"""

    def test_cesaro_witness_attains_limsup(self, witness_service, cesaro):
        """Cesàro では x = 1 が η₀ = 1 を達成する"""
        witness = witness_service.sliding_hump(cesaro, FIN, H, 6, allow_partial=True)

        assert witness.target == pytest.approx(1.0)
        assert witness.achieved == pytest.approx(1.0)
        assert witness.rows[:3] == [0, 1, 7]
        assert all(b > a for a, b in zip(witness.rows, witness.rows[1:]))
        assert np.allclose(np.asarray(witness.x), 1.0)

    def test_scalar_sum_of_norms_matches_target(self, witness_service, cesaro):
        """スカラー行列では Σ_k ‖A_{n,k}‖ の limsup が目標値と一致する"""
        witness = witness_service.sliding_hump(cesaro, FIN, H, 6, allow_partial=True)
        assert witness.diagnostic["sum_of_norms"] == pytest.approx(witness.target)

    def test_stage_records_hold_bounds(self, witness_service, cesaro):
        """各段の行で保証値以上の値が出る"""
        witness = witness_service.sliding_hump(cesaro, FIN, H, 6, allow_partial=True)

        state = witness.state
        assert state is not None
        assert state.exhausted_at is not None
        assert len(state.stages) == witness.diagnostic["completed_stages"]
        for record in state.stages:
            assert record.block_value >= record.bound - 1e-9
            assert record.block[0] <= record.block[1] == record.cut

    def test_horizon_exhausted_without_partial(self, witness_service, cesaro):
        """段が足りない場合は段番号付きの HorizonExhausted"""
        with pytest.raises(HorizonExhausted) as exc_info:
            witness_service.sliding_hump(cesaro, FIN, H, 6)
        assert exc_info.value.stage >= 3

    def test_alternating_signs(self, witness_service):
        """(−1)^k/(n+1) では x_k = (−1)^k が選ばれる"""
        A = builtin_matrix("alternating").matrix

        witness = witness_service.sliding_hump(A, FIN, H, 6, allow_partial=True)

        x = np.asarray(witness.x)[:, 0]
        expected = np.where(np.arange(len(x)) % 2 == 0, 1.0, -1.0)
        assert np.array_equal(x, expected)
        assert witness.achieved == pytest.approx(1.0)

    def test_zero_matrix_is_degenerate(self, witness_service):
        """η₀ = 0 では任意の単位ベクトル列が証拠"""
        A = builtin_matrix("zero").matrix

        witness = witness_service.sliding_hump(A, FIN, 256, 4)

        assert witness.diagnostic == {"degenerate": True}
        assert witness.rows == []
        assert witness.achieved == 0.0

    def test_unbounded_rows_fail_hypotheses(self, witness_service):
        """行ノルムが有界でない行列は仮定を満たさない"""
        A = builtin_matrix("lower_ones").matrix
        with pytest.raises(HypothesisFailed) as exc_info:
            witness_service.sliding_hump(A, FIN, 256, 4)
        assert "T1♭" in exc_info.value.failed

    def test_density_ideal_fails(self, witness_service, cesaro):
        """可算生成でない 𝒥 は UnsupportedIdeal"""
        with pytest.raises(UnsupportedIdeal):
            witness_service.sliding_hump(cesaro, DENSITY, 256, 4)

    def test_zero_stages_fails(self, witness_service, cesaro):
        with pytest.raises(ValueError):
            witness_service.sliding_hump(cesaro, FIN, 256, 0)


class TestSlidingHumpUnbounded:
    """sliding_hump_unbounded のテスト"""

    def test_bounded_rows_are_rejected(self, witness_service, cesaro):
        """行ノルムが有界なら NotDivergent"""
        with pytest.raises(NotDivergent):
            witness_service.sliding_hump_unbounded(cesaro, FIN, 256, 4, check_hypotheses=False)

    def test_log_growth_rows_exceed_stage_bound(self, witness_service):
        """選んだ行で ‖A_{s_n} x‖ ≥ n − 5"""
        A = builtin_matrix("log_growth").matrix

        witness = witness_service.sliding_hump_unbounded(A, FIN, H, 6, allow_partial=True)

        assert witness.rows
        for record, value in zip(witness.state.stages, witness.row_values):
            assert value >= record.bound
            assert value >= record.stage - 1e-9

    def test_lower_ones_stops_early(self, witness_service):
        """x = 1 の前方部分が大きくなるため段 3 で止まる"""
        A = builtin_matrix("lower_ones").matrix

        witness = witness_service.sliding_hump_unbounded(A, FIN, 256, 6, allow_partial=True, check_hypotheses=False)

        assert witness.rows == [0, 1]
        assert witness.row_values == pytest.approx([1.0, 2.0])
        assert witness.state.exhausted_at == 3

    def test_column_hypothesis_fails_for_lower_ones(self, witness_service):
        """列が消えない行列は T5 を満たさない"""
        A = builtin_matrix("lower_ones").matrix
        with pytest.raises(HypothesisFailed):
            witness_service.sliding_hump_unbounded(A, FIN, 256, 4)


class TestHahnSchurWitness:
    """hahn_schur_witness のテスト"""

    def test_alternating_defect(self, witness_service):
        """(−1)^k/(n+1) では E = 偶数、欠損はおよそ 1/2"""
        A = builtin_matrix("alternating").matrix

        result = witness_service.hahn_schur_witness(A, FIN, H, 6)

        assert result.E == "ap(0,2)"
        assert result.eta0 == pytest.approx(1.0)
        assert result.defect == pytest.approx(0.5, abs=0.01)
        assert result.defect >= result.lower_bound - 0.01

    def test_identity_defect(self, witness_service):
        """単位行列では E = ℕ、欠損 1"""
        A = builtin_matrix("identity").matrix

        result = witness_service.hahn_schur_witness(A, FIN, 256, 6)

        assert result.E == "ap(0,1)"
        assert result.defect == pytest.approx(1.0)
        assert result.row_sum_limit == pytest.approx(1.0)

    def test_small_eta_gives_empty_set(self, witness_service):
        """η₀ ≤ tol のとき E = ∅、欠損 0"""
        A = builtin_matrix("square_decay").matrix

        result = witness_service.hahn_schur_witness(A, FIN, H, 4, tol=1e-2)

        assert result.E == "finite()"
        assert result.defect == 0.0
        assert result.witness is None

    def test_block_matrix_fails(self, witness_service):
        A = builtin_matrix("identity(2)").matrix
        with pytest.raises(WorkbenchError):
            witness_service.hahn_schur_witness(A, FIN, 64, 2)


class TestDivergenceWitness:
    """divergence_witness のテスト"""

    def test_scalar_identity_blocks(self, witness_service):
        """T_k = 1 では κ = 1, 2, 5, 11、部分和のノルムは 1, 3, 8, 19"""
        result = witness_service.divergence_witness([np.eye(1)] * 4)

        assert result.kappas == pytest.approx([1.0, 2.0, 5.0, 11.0])
        assert result.partial_norms == pytest.approx([1.0, 3.0, 8.0, 19.0])
        for n, norm in enumerate(result.partial_norms):
            assert norm >= n

    def test_alternating_blocks_have_same_magnitudes(self, witness_service):
        """T_k = (−1)^k でも κ と部分和のノルムは変わらない"""
        blocks = [np.array([[(-1.0) ** k]]) for k in range(4)]

        result = witness_service.divergence_witness(blocks)

        assert result.kappas == pytest.approx([1.0, 2.0, 5.0, 11.0])
        assert result.partial_norms == pytest.approx([1.0, 3.0, 8.0, 19.0])

    def test_zero_block_fails(self, witness_service):
        """零作用素の項は ZeroOperator"""
        with pytest.raises(ZeroOperator):
            witness_service.divergence_witness([np.eye(1), np.zeros((1, 1))])


class TestPositiveWitness:
    """positive_witness のテスト"""

    def test_cesaro_on_even_columns(self, witness_service, cesaro):
        """非負行列では E 上の 𝟙 が群ノルムを達成する"""
        E = ArithmeticProgression(offset=0, step=2)

        witness = witness_service.positive_witness(cesaro, E, 256, FIN)

        assert witness.support == "ap(0,2)"
        assert witness.achieved == pytest.approx(witness.target)
        assert witness.target == pytest.approx(0.5, abs=0.01)

    def test_signed_matrix_fails(self, witness_service):
        A = builtin_matrix("alternating").matrix
        with pytest.raises(WorkbenchError):
            witness_service.positive_witness(A, ArithmeticProgression(offset=0, step=2), 64, FIN)


class TestOracleMaxSign:
    """oracle_max_sign のテスト"""

    def test_alternating_rows(self, witness_service):
        """行 n < cols では全列が入り、値は Σ|a_{n,k}| = 1"""
        A = builtin_matrix("alternating").matrix
        assert witness_service.oracle_max_sign(A, [3, 5], 6) == pytest.approx([1.0, 1.0])

    def test_matches_group_norm(self, witness_service, matrix_service):
        """全探索の値は ScalarSum の群ノルムと一致する"""
        A = builtin_matrix("random(3,dense)").matrix
        rows = list(range(8))

        oracle = witness_service.oracle_max_sign(A, rows, 8)

        expected = [matrix_service.group_norm(A, n, FiniteSet(values=tuple(range(8))), 16).upper for n in rows]
        assert oracle == pytest.approx(expected)

    @pytest.mark.parametrize("cols", [0, 21])
    def test_column_count_out_of_range_fails(self, witness_service, cesaro, cols):
        with pytest.raises(ValueError):
            witness_service.oracle_max_sign(cesaro, [0], cols)
