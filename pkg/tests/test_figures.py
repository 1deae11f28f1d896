import math

import pytest

from bsmcert import bounds, figures
from bsmcert.bounds import BETA_STAR
from bsmcert.scenario import TSIRELSON


def f_o_formula(beta):
    r = 1 - 0.5 * (TSIRELSON - beta) / (TSIRELSON - BETA_STAR)
    return math.sqrt(r) if r > 0 else 0.0


def test_beta_grid():
    g = figures.beta_grid(5)
    assert g[0] == 2.0 and g[-1] == TSIRELSON
    with pytest.raises(ValueError):
        figures.beta_grid(1)


class TestFig3:
    def test_columns(self):
        header, rows = figures.fig3(11)
        assert header == ["beta", "f_bsm_delta_1", "f_bsm_delta_scaled", "f_bsm_independent_sources"]
        assert len(rows) == 11

    def test_ideal_row(self):
        _, rows = figures.fig3(11)
        assert rows[-1][1:] == [1.0, 1.0, 1.0]

    def test_delta_one_curve_is_f_o(self):
        for beta, d1, _, _ in figures.fig3(101)[1]:
            assert math.isclose(d1, f_o_formula(beta), abs_tol=1e-12)

    def test_scaled_curve(self):
        for beta, _, ds, _ in figures.fig3(101)[1]:
            f_i = bounds.f_i_from_delta(beta / TSIRELSON)
            angle = math.acos(f_o_formula(beta)) + math.acos(f_i)
            expected = math.cos(angle) if angle <= math.pi / 2 else 0.0
            assert math.isclose(ds, expected, abs_tol=1e-12)

    def test_curves_monotone(self):
        _, rows = figures.fig3(201)
        for col in (1, 2, 3):
            assert figures.is_monotone([r[col] for r in rows])


class TestPartialFigures:
    @pytest.mark.parametrize("fig", [figures.fig5, figures.fig6])
    def test_ideal_row(self, fig):
        header, rows = fig(21)
        assert rows[-1][1] == 1.0
        assert header[1].endswith("p0_0.25")

    def test_zeta_ideal_equals_4p0(self):
        _, rows = figures.fig6(21)
        assert math.isclose(rows[-1][2], 0.4, abs_tol=1e-12)
        assert math.isclose(rows[-1][3], 0.04, abs_tol=1e-12)

    @pytest.mark.parametrize("fig", [figures.fig5, figures.fig6])
    def test_monotone_on_valid_domain(self, fig):
        _, rows = fig(201)
        for col in (1, 2, 3):
            values = [r[col] for r in rows if r[col] != figures.REGIME_TOKEN]
            assert values
            assert figures.is_monotone(values)

    def test_regime_token_below_threshold(self):
        _, rows = figures.fig5(21)
        assert rows[0][1:] == [figures.REGIME_TOKEN] * 3


def test_csv_roundtrip():
    header, rows = figures.fig5(7)
    text = figures.to_csv(header, rows)
    assert text.splitlines()[0] == ",".join(header)
    h2, r2 = figures.parse_csv(text)
    assert h2 == header
    for a, b in zip(rows, r2):
        for x, y in zip(a, b):
            if isinstance(x, str):
                assert x == y
            else:
                assert math.isclose(x, y, rel_tol=1e-11, abs_tol=1e-15)


def test_format_cell_uses_decimal_point():
    assert figures.format_cell(0.5) == "0.5"
    assert figures.format_cell(1 / 3) == "0.333333333333"
