import csv
import os
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import integers

from src.models.descriptors import nu2
from src.models.errors import InsufficientHorizon, LiteralParseError
from src.services.pringsheim import PairingBijection, build_h
from src.services.zoo import builtin_double, builtin_kernel


class TestPairingBijection:
    """全単射 h のテスト"""

    @pytest.mark.parametrize(
        "mn,t",
        [((0, 0), 0), ((0, 1), 1), ((1, 0), 3), ((1, 1), 2), ((3, 7), 120)],
    )
    def test_known_values(self, mn, t):
        """殻の並びに従った値"""
        h = build_h()
        assert h.forward(*mn) == t
        assert h.inverse(t) == mn

    def test_shell_maps_to_level(self):
        """ν₂(h(m,n)) = min(m,n)"""
        h = build_h()
        assert nu2(h.forward(3, 7)) == 3
        assert nu2(h.forward(9, 4)) == 4

    @given(m=integers(min_value=0, max_value=64), n=integers(min_value=0, max_value=64))
    @settings(max_examples=200, deadline=None)
    def test_inverse_of_forward(self, m, n):
        """h⁻¹(h(m,n)) = (m,n)"""
        h = PairingBijection()
        t = h.forward(m, n)
        assert h.inverse(t) == (m, n)
        assert nu2(t) == min(m, n)

    def test_prefix_is_covered(self):
        """0..4095 の各 t はちょうど1つの組から来る"""
        h = build_h()
        ts = np.arange(4096)

        ms, ns = h.inverse_array(ts)

        assert np.array_equal(h.forward_array(ms, ns), ts)

    def test_wide_prefix_is_covered(self):
        """0..2¹⁶ の各 t について h(h⁻¹(t)) = t で、組はすべて異なる"""
        h = build_h()
        pairs = [h.inverse(t) for t in range(2**16 + 1)]

        assert [h.forward(m, n) for m, n in pairs] == list(range(2**16 + 1))
        assert len(set(pairs)) == len(pairs)
        ms, ns = h.inverse_array(np.arange(2**16 + 1))
        assert list(zip(ms.tolist(), ns.tolist())) == pairs

    @pytest.mark.parametrize("k", [62, 63, 64, 100])
    def test_deep_shells_use_exact_integers(self, k):
        """min(m,n) が 63 以上でも値は 2^k·(2i+1) のまま"""
        h = build_h()

        diagonal = h.forward(k, k)
        above = h.forward(k, k + 1)

        assert diagonal == 2**k
        assert above == 3 * 2**k
        assert h.inverse(diagonal) == (k, k)
        assert h.inverse(above) == (k, k + 1)

    def test_diagonal_values_are_distinct(self):
        """h(63,63) と h(64,64) は異なり、どちらも 0 ではない"""
        h = build_h()
        assert h.forward(63, 63) != h.forward(64, 64)
        assert 0 not in (h.forward(63, 63), h.forward(64, 64))

    def test_array_overflow_fails(self):
        """int64 に収まらない組はベクトル版では InsufficientHorizon"""
        h = build_h()
        with pytest.raises(InsufficientHorizon):
            h.forward_array(np.array([63]), np.array([63]))
        with pytest.raises(InsufficientHorizon):
            h.forward_array(np.array([0, 60]), np.array([0, 70]))

    def test_array_matches_scalar_below_overflow(self):
        """int64 に収まる範囲ではベクトル版とスカラー版が一致"""
        h = build_h()
        ms = np.array([0, 5, 61, 61, 62])
        ns = np.array([0, 9, 61, 62, 62])
        assert h.forward_array(ms, ns).tolist() == [h.forward(m, n) for m, n in zip(ms, ns)]

    def test_negative_input_fails(self):
        h = build_h()
        with pytest.raises(ValueError):
            h.forward(-1, 0)
        with pytest.raises(ValueError):
            h.inverse(-1)


class TestPLim:
    """p_lim のテスト"""

    def test_corner_decay_converges_to_zero(self, pringsheim_service):
        """1/(min(m,n)+1) の P-lim は 0"""
        x = builtin_double("corner_decay()").sequence

        report = pringsheim_service.p_lim(x, 1024, 1e-2)

        assert report.status == "Converged"
        assert report.value == pytest.approx(0.0, abs=1e-2)
        assert len(report.trail) == 3

    def test_constant(self, pringsheim_service):
        report = pringsheim_service.p_lim(builtin_double("constant(2.5)").sequence, 64)
        assert report.status == "Converged"
        assert report.value == pytest.approx(2.5)

    def test_row_zero_converges(self, pringsheim_service):
        """第0行だけの値は隅に現れない"""
        report = pringsheim_service.p_lim(builtin_double("row_zero()").sequence, 256)
        assert report.status == "Converged"
        assert report.value == 0.0

    @pytest.mark.parametrize("literal", ["checkerboard()", "diagonal_ones()"])
    def test_no_limit(self, pringsheim_service, literal):
        """隅での振れ幅が縮まない系列は NoLimitDetected"""
        report = pringsheim_service.p_lim(builtin_double(literal).sequence, 256)
        assert report.status == "NoLimitDetected"
        assert report.diagnostic["corner_deviation"][-1] > 0.5

    def test_small_horizon_fails(self, pringsheim_service):
        with pytest.raises(InsufficientHorizon):
            pringsheim_service.p_lim(builtin_double("constant(1)").sequence, 3)


class TestTransport:
    """transport と transport_inv のテスト"""

    def test_transport_follows_h(self, pringsheim_service):
        """y_t = x_{h⁻¹(t)}"""
        x = builtin_double("shifted_limit(2)").sequence

        y = pringsheim_service.transport(x)

        for t in (0, 3, 120, 1000):
            m, n = pringsheim_service.h.inverse(t)
            assert y(t)[0] == pytest.approx(2.0 + 1.0 / (m + n + 1.0))

    def test_declared_limit_is_carried(self, pringsheim_service):
        """宣言された P-lim は ν₂ イデアルの極限として引き継がれる"""
        y = pringsheim_service.transport(builtin_double("geometric_corner()").sequence)
        assert y.ideal is not None and y.ideal.kind == "nu2"
        assert np.allclose(y.limit, [1.0])

    def test_round_trip(self, pringsheim_service):
        """transport_inv(transport(x)) は x と一致する"""
        x = builtin_double("corner_decay()").sequence
        back = pringsheim_service.transport_inv(pringsheim_service.transport(x))
        ms, ns = np.meshgrid(np.arange(12), np.arange(12), indexing="ij")

        assert np.allclose(back.sample_pairs(ms.ravel(), ns.ravel()), x.sample_pairs(ms.ravel(), ns.ravel()))
        assert np.allclose(back.p_limit, [0.0])

    def test_compare_limits_reports_both_sides(self, pringsheim_service):
        """P-lim と移送後の極限を並べて返す"""
        x = builtin_double("geometric_corner()").sequence

        result = pringsheim_service.compare_limits(x, 256, 4096, 1e-3)

        assert result["declared"] == [1.0]
        assert result["p_lim"]["status"] == "Converged"
        assert result["p_lim"]["estimate"] == pytest.approx([1.0])
        assert result["ideal_lim"]["diagnostic"]["ideal"] == "nu2"
        assert isinstance(result["agree"], bool)


class TestRhCheck:
    """rh_check のテスト"""

    def test_double_identity_is_regular(self, pringsheim_service):
        """移送した単位カーネルは単位行列"""
        report = pringsheim_service.rh_check(builtin_kernel("double_identity"), horizon=256)
        assert report.overall == "Regular"

    def test_double_ones_is_not_regular(self, pringsheim_service):
        """行ノルムが発散するカーネルは R1 で落ちる"""
        report = pringsheim_service.rh_check(builtin_kernel("double_ones"), horizon=256)

        verdicts = {v.id: v for v in report.conditions}
        assert report.overall == "NotRegular"
        assert verdicts["R1"].status == "Fail"

    @pytest.mark.slow
    @pytest.mark.parametrize("horizon", [1024, 4096])
    def test_double_ones_stays_not_regular_at_larger_horizons(self, pringsheim_service, horizon):
        """ホライズンを伸ばしても R1 は Fail のまま、行和の偏差は消失と判定されない"""
        report = pringsheim_service.rh_check(builtin_kernel("double_ones"), horizon=horizon)

        verdicts = {v.id: v for v in report.conditions}
        assert report.overall == "NotRegular"
        assert verdicts["R1"].status == "Fail"
        assert verdicts["R4"].status != "Pass"

    def test_transported_kernel_rows(self, pringsheim_service):
        """行 t の台は h で移した長方形"""
        A = pringsheim_service.transport_kernel(builtin_kernel("double_cesaro"))

        row = A.row(pringsheim_service.h.forward(1, 1), 64)

        expected = sorted(pringsheim_service.h.forward(p, q) for p in range(2) for q in range(2))
        assert row.ks.tolist() == expected
        assert row.blocks.reshape(-1) == pytest.approx([0.25] * 4)


class TestDoubleIO:
    """CSV 入出力のテスト"""

    def test_load_grid(self, pringsheim_service, temp_dir):
        """行 m・列 n の格子として読む"""
        path = os.path.join(temp_dir, "grid.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("1,2\n3,4\n")

        x = pringsheim_service.load_double_csv(path)

        assert x.name == "grid"
        assert x(1, 0)[0] == 3.0
        assert x(0, 1)[0] == 2.0

    def test_outside_grid_fails(self, pringsheim_service, temp_dir):
        path = os.path.join(temp_dir, "grid.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("1,2\n3,4\n")
        x = pringsheim_service.load_double_csv(path)
        with pytest.raises(InsufficientHorizon):
            x.sample_pairs(np.array([2]), np.array([0]))

    def test_non_numeric_cell_fails(self, pringsheim_service, temp_dir):
        path = os.path.join(temp_dir, "bad.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("1,a\n")
        with pytest.raises(LiteralParseError):
            pringsheim_service.load_double_csv(path)

    def test_export_transported(self, pringsheim_service, temp_dir):
        """(t, m, n, value) の行を CSV に書く"""
        path = os.path.join(temp_dir, "y.csv")
        y = pringsheim_service.transport(builtin_double("constant(2.5)").sequence)

        table = pringsheim_service.export_transported(y, 4, path)

        assert table[0] == ["t", "m", "n", "value_0"]
        assert table[4] == [3, 1, 0, 2.5]
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert len(rows) == 6
        assert rows[4] == ["3", "1", "0", "2.5"]
