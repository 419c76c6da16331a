import math

import numpy as np
import pytest

from ccdr.penalty import L1, MCP, PenaltyConfig, penalty_value, tau, threshold


def oracle_penalty(t, cfg):
    """Vectorized reimplementation of the penalty used as a grid oracle."""
    t = np.asarray(t, dtype=float)
    if cfg.family == L1:
        return cfg.lam * t
    knee = cfg.lam * cfg.gamma
    spline = cfg.lam * (t - t**2 / (2.0 * cfg.lam * cfg.gamma)) if cfg.lam > 0 else np.zeros_like(t)
    return np.where(t < knee, spline, 0.5 * cfg.lam**2 * cfg.gamma)


def oracle_q1_min(btilde, cfg, step=1e-4):
    """Grid minimizer of 0.5*(b - btilde)**2 + penalty(|b|)."""
    half = max(2.0 * abs(btilde), 10 * step)
    grid = np.arange(-half, half + step, step)
    q = 0.5 * (grid - btilde) ** 2 + oracle_penalty(np.abs(grid), cfg)
    i = int(np.argmin(q))
    return grid[i], q[i]


def test_mcp_value_at_zero():
    assert penalty_value(0.0, PenaltyConfig(MCP, 1.0, 2.0)) == 0.0


def test_mcp_plateau_value():
    # beyond t = lam*gamma the penalty is the constant lam**2 * gamma / 2
    assert penalty_value(5.0, PenaltyConfig(MCP, 1.0, 2.0)) == pytest.approx(1.0)


def test_l1_value():
    assert penalty_value(2.0, PenaltyConfig(L1, 0.5)) == pytest.approx(1.0)


def test_penalty_rejects_negative_t():
    with pytest.raises(ValueError):
        penalty_value(-0.1, PenaltyConfig(L1, 1.0))


def test_tau_mcp():
    assert tau(PenaltyConfig(MCP, 2.0, 3.0)) == pytest.approx(6.0)


def test_tau_l1_infinite():
    assert tau(PenaltyConfig(L1, 0.7)) == math.inf


def test_tau_mcp_zero_lambda():
    assert tau(PenaltyConfig(MCP, 0.0, 2.0)) == 0.0


def test_threshold_dead_zone():
    assert threshold(0.8, PenaltyConfig(MCP, 1.0, 2.0)) == 0.0


def test_threshold_spline_region():
    # (|bt| - lam) / (1 - 1/gamma) = (1.5 - 1) / 0.5
    assert threshold(1.5, PenaltyConfig(MCP, 1.0, 2.0)) == pytest.approx(1.0)


def test_threshold_identity_region():
    assert threshold(3.0, PenaltyConfig(MCP, 1.0, 2.0)) == 3.0


def test_threshold_l1_soft():
    assert threshold(-2.5, PenaltyConfig(L1, 1.0)) == pytest.approx(-1.5)


def test_threshold_zero_lambda_is_identity():
    for fam in (MCP, L1):
        cfg = PenaltyConfig(fam, 0.0, 2.0)
        for bt in (-3.2, -0.01, 0.0, 1.7):
            assert threshold(bt, cfg) == bt


def test_config_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(MCP, 1.0, gamma=1.0)  # MCP needs gamma > 1
    with pytest.raises(ValueError):
        PenaltyConfig(MCP, -0.5, gamma=2.0)
    with pytest.raises(ValueError):
        PenaltyConfig("scad", 1.0)


def test_with_lambda_keeps_family():
    cfg = PenaltyConfig(MCP, 1.0, 2.5).with_lambda(0.25)
    assert cfg.lam == 0.25 and cfg.family == MCP and cfg.gamma == 2.5


def test_threshold_matches_grid_oracle(rng):
    step = 1e-4
    for _ in range(1000):
        if rng.random() < 0.3:
            cfg = PenaltyConfig(L1, float(rng.uniform(0.05, 2.5)))
        else:
            cfg = PenaltyConfig(MCP, float(rng.uniform(0.05, 2.5)), float(rng.uniform(1.05, 8.0)))
        bt = float(rng.uniform(-4.0, 4.0))
        out = threshold(bt, cfg)
        if abs(bt) < 1e-3:
            assert out == 0.0 or abs(out) <= abs(bt)
            continue
        argmin, qmin = oracle_q1_min(bt, cfg, step)
        q_out = 0.5 * (out - bt) ** 2 + float(oracle_penalty(abs(out), cfg))
        assert q_out <= qmin + 1e-9
        assert abs(out - argmin) <= 2 * step


def test_shrinkage(rng):
    for _ in range(200):
        fam = MCP if rng.random() < 0.5 else L1
        cfg = PenaltyConfig(fam, float(rng.uniform(0.0, 2.0)), float(rng.uniform(1.1, 6.0)))
        bt = float(rng.uniform(-5.0, 5.0))
        out = threshold(bt, cfg)
        assert abs(out) <= abs(bt) + 1e-15
        assert out == 0.0 or math.copysign(1.0, out) == math.copysign(1.0, bt)
    assert threshold(0.0, PenaltyConfig(MCP, 1.0, 2.0)) == 0.0


def test_threshold_continuity():
    # max jump over a fine grid stays below 10x the grid step
    cfg = PenaltyConfig(MCP, 0.8, 1.7)
    grid = np.linspace(-3.0, 3.0, 60001)
    vals = np.array([threshold(float(b), cfg) for b in grid])
    step = grid[1] - grid[0]
    assert np.max(np.abs(np.diff(vals))) < 10 * step


def test_mcp_approaches_soft_threshold_for_large_gamma():
    lam = 0.9
    big = PenaltyConfig(MCP, lam, 1e6)
    soft = PenaltyConfig(L1, lam)
    for bt in np.linspace(-5.0, 5.0, 101):
        assert abs(threshold(float(bt), big) - threshold(float(bt), soft)) < 1e-4


def test_mcp_concavity(rng):
    cfg = PenaltyConfig(MCP, 1.3, 2.2)
    for _ in range(200):
        a, b = rng.uniform(0.0, 6.0, size=2)
        mid = penalty_value((a + b) / 2.0, cfg)
        assert mid >= 0.5 * (penalty_value(a, cfg) + penalty_value(b, cfg)) - 1e-12
