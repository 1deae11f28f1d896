"""Acceptance criteria. Each test prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from bsmcert import bounds, figures, selftest
from bsmcert.bounds import BETA_STAR, CONSTANTS
from bsmcert.linalg import bell_projector, negativity, random_density_matrix, uhlmann_fidelity
from bsmcert.scenario import (
    RELABELING_FOR_OUTCOME,
    TSIRELSON,
    ExperimentStatistics,
    ScenarioConfig,
    chsh_value,
    default_settings,
)

SQRT2 = math.sqrt(2)

# criterion 1
IDEAL_BETA_TOL = 1e-9
IDEAL_P_TOL = 1e-12
IDEAL_FBSM_TOL = 1e-9
IDEAL_RUNTIME_S = 1.0
# criterion 2
FIG3_TOL = 1e-12
CROSSING_RANGE = (2.72, 2.74)
FIG3_RUNTIME_S = 1.0
# criterion 3
THRESHOLD_TOL = 1e-12
DELTA_STAR = 0.744
AFFINE_GRID_POINTS = 1000
# criterion 4
OPERATOR_GRID_POINTS = 101
OPERATOR_EIG_TOL = -1e-9
OPERATOR_RUNTIME_S = 10.0
# criterion 5
RELABEL_GRID_POINTS = 51
RELABEL_TOL = 1e-10
CHSH_TOL = 1e-9
# criterion 6
TELEPORT_TRIALS = 100
TELEPORT_TOL = 1e-8
# criterion 7
NEGATIVITY_TRIALS = 1000
NEGATIVITY_TOL = 1e-9
# criterion 8
LEMMA1_TRIALS = 500
LEMMA1_TOL = 1e-9
# criterion 9
SOUNDNESS_MIN_POINTS = 50
SOUNDNESS_TOL = 1e-9
SOUNDNESS_RUNTIME_S = 60.0
# criterion 10
PARTIAL_TOL = 1e-9
PARTIAL_P0 = 0.25


def report(capsys, number, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}")
    assert ok, detail


def test_01_ideal_point(capsys):
    start = time.perf_counter()
    stats = ScenarioConfig().statistics()
    cert = bounds.certify(stats, "deterministic")
    elapsed = time.perf_counter() - start
    beta_err = max(abs(b - TSIRELSON) for b in stats.beta)
    p_err = max(abs(p - 0.25) for p in stats.p)
    f_err = abs(cert.f_bsm - 1.0)
    ok = beta_err <= IDEAL_BETA_TOL and p_err <= IDEAL_P_TOL and f_err <= IDEAL_FBSM_TOL and elapsed < IDEAL_RUNTIME_S
    report(capsys, 1, "ideal point", ok,
           f"|beta-2sqrt2|={beta_err:.1e} |p-1/4|={p_err:.1e} |f_bsm-1|={f_err:.1e} t={elapsed:.3f}s")


def test_02_fig3_curves(capsys):
    start = time.perf_counter()
    _, rows = figures.fig3(201)
    crossing = bounds.independent_sources_threshold()
    elapsed = time.perf_counter() - start
    err_d1 = err_ds = 0.0
    for beta, d1, ds, _ in rows:
        r = 1 - 0.5 * (TSIRELSON - beta) / (TSIRELSON - BETA_STAR)
        f_o = math.sqrt(max(r, 0.0))
        err_d1 = max(err_d1, abs(d1 - f_o))
        angle = math.acos(f_o) + math.acos(bounds.f_i_from_delta(beta / TSIRELSON))
        ds_expected = math.cos(angle) if angle <= math.pi / 2 else 0.0
        err_ds = max(err_ds, abs(ds - ds_expected))
    ok = (err_d1 <= FIG3_TOL and err_ds <= FIG3_TOL
          and CROSSING_RANGE[0] <= crossing <= CROSSING_RANGE[1] and elapsed < FIG3_RUNTIME_S)
    report(capsys, 2, "fig3 curves", ok,
           f"delta=1 err={err_d1:.1e} scaled err={err_ds:.1e} crossing beta={crossing:.5f} t={elapsed:.3f}s")


def test_03_threshold_constants(capsys):
    beta_star = 2 * (8 + 7 * SQRT2) / 17
    e1 = abs(bounds.f_o_from_chsh(beta_star) - 1 / SQRT2)
    e2 = abs(bounds.f_i_from_delta(DELTA_STAR) - 0.5)
    grid = np.linspace(beta_star, TSIRELSON, AFFINE_GRID_POINTS)
    e3 = max(abs(CONSTANTS.s * b + CONSTANTS.mu - bounds.f_o_from_chsh(b) ** 2) for b in grid)
    ok = max(e1, e2, e3) <= THRESHOLD_TOL
    report(capsys, 3, "threshold constants", ok, f"F_o(beta*) err={e1:.1e} F_i(0.744) err={e2:.1e} affine err={e3:.1e}")


def test_04_operator_inequality(capsys):
    start = time.perf_counter()
    result = selftest.verify_operator_inequality(OPERATOR_GRID_POINTS)
    control = selftest.verify_operator_inequality(OPERATOR_GRID_POINTS, printed_sign=True, refine=False)
    elapsed = time.perf_counter() - start
    ok = (result.min_eigenvalue >= OPERATOR_EIG_TOL and result.channels_valid
          and not control.channels_valid and not control.passed and elapsed < OPERATOR_RUNTIME_S)
    report(capsys, 4, "operator inequality", ok,
           f"min eig={result.min_eigenvalue:.2e} at {tuple(round(x, 4) for x in result.worst_case)}; "
           f"negative control channels_valid={control.channels_valid} t={elapsed:.2f}s")


def test_05_relabeling_covariance(capsys):
    result = selftest.verify_relabeling_covariance(RELABEL_GRID_POINTS)
    a_set, b_set = default_settings()
    values = [chsh_value(bell_projector(k), a_set, b_set, RELABELING_FOR_OUTCOME[k]) for k in range(4)]
    dev = max(result["max_deviation"].values())
    chsh_err = max(abs(v - TSIRELSON) for v in values)
    ok = dev <= RELABEL_TOL and chsh_err <= CHSH_TOL
    report(capsys, 5, "relabeling covariance", ok, f"max identity deviation={dev:.1e} chsh err={chsh_err:.1e}")


def test_06_teleport_fidelity(capsys):
    rng = np.random.default_rng(2024)
    worst, worst_q = 0.0, None
    for q in rng.uniform(0.0, 1.0, TELEPORT_TRIALS):
        src = selftest.schmidt_source(float(q))
        f = uhlmann_fidelity(selftest.teleport_injection_map(src).choi(), src.rho)
        err = abs(f - (0.5 + math.sqrt(q * (1 - q))))
        if err > worst:
            worst, worst_q = err, float(q)
    ok = worst <= TELEPORT_TOL
    report(capsys, 6, "teleport injection fidelity", ok,
           f"max |F - (1/2 + sqrt(q(1-q)))| = {worst:.3e} at q={worst_q:.4f} (tol {TELEPORT_TOL:.0e})")


def test_07_negativity(capsys):
    rng = np.random.default_rng(7)
    phi = bell_projector(0)
    worst = -math.inf
    for _ in range(NEGATIVITY_TRIALS):
        rho = random_density_matrix(4, rng, rank=int(rng.integers(1, 5)))
        worst = max(worst, np.trace(phi @ rho).real - 0.5 - negativity(rho))
    ok = worst <= NEGATIVITY_TOL
    report(capsys, 7, "negativity bound", ok, f"max violation={worst:.3e} over {NEGATIVITY_TRIALS} states")


def test_08_lemma1(capsys):
    result = selftest.verify_lemma1(LEMMA1_TRIALS)
    ok = result["max_violation"] <= LEMMA1_TOL
    report(capsys, 8, "probabilistic processing inequality", ok,
           f"max violation={result['max_violation']:.3e} over {LEMMA1_TRIALS} instances")


def test_09_soundness(capsys):
    grid = selftest.default_noise_grid()
    in_range = [
        n for n in grid
        if all(0.9 <= v <= 1.0 for v in n.source_visibility) and 0.0 <= n.bsm_depolarization <= 0.1
    ]
    start = time.perf_counter()
    result = selftest.soundness_sweep(grid)
    elapsed = time.perf_counter() - start
    ok = (len(in_range) >= SOUNDNESS_MIN_POINTS and result["worst_margin"] >= -SOUNDNESS_TOL
          and elapsed < SOUNDNESS_RUNTIME_S)
    report(capsys, 9, "soundness sweep", ok,
           f"{result['points']} points, worst (oracle - bound)={result['worst_margin']:.2e} t={elapsed:.2f}s")


def test_10_partial_figures(capsys):
    stats = ExperimentStatistics((TSIRELSON, None, None, None), (PARTIAL_P0, 0.0, 0.0, 0.0), 1.0)
    cert = bounds.certify(stats, "partial")
    e_cond, e_zeta = abs(cert.f_cond - 1.0), abs(cert.zeta_0 - 1.0)
    monotone = True
    for fig in (figures.fig5, figures.fig6):
        _, rows = fig(201)
        for col in (1, 2, 3):
            values = [r[col] for r in rows if r[col] != figures.REGIME_TOKEN]
            monotone = monotone and bool(values) and figures.is_monotone(values)
    ok = e_cond <= PARTIAL_TOL and e_zeta <= PARTIAL_TOL and monotone
    report(capsys, 10, "partial BSM curves", ok,
           f"|F_cond-1|={e_cond:.1e} |zeta_0-1|={e_zeta:.1e} monotone={monotone}")
