"""End-to-end training checks on the shipped experiment configs."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from dragfl import cli, simulator
from dragfl.attacks import AttackConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SEEDS = range(5)

pytestmark = pytest.mark.slow


def rounds_to_target(config):
    """Rounds used, or infinity when the run never reached the target."""
    records = simulator.run_experiment(config)
    return len(records) if simulator.reached_target(config, records) else np.inf


def test_drag_needs_fewer_rounds_under_client_drift():
    base = cli.parse_config(CONFIGS / "drift.json", ["T_max=400"])
    drag = np.median([rounds_to_target(replace(base, seed=s)) for s in SEEDS])
    fedavg = np.median([rounds_to_target(replace(base, seed=s, aggregator="fedavg")) for s in SEEDS])
    assert fedavg <= 400 and drag <= 400
    assert drag <= 0.8 * fedavg


def test_drift_config_matches_drift_setting():
    cfg = cli.parse_config(CONFIGS / "drift.json")
    assert (cfg.M, cfg.S, cfg.U, cfg.q, cfg.eta) == (20, 5, 5, 1.0, 0.1)
    assert (cfg.data.num_classes, cfg.data.dim, cfg.data.per_class) == (10, 20, 200)
    assert (cfg.drag.c, cfg.drag.alpha, cfg.target_accuracy) == (0.25, 0.6, 0.85)
    assert cfg.data.separation < 4.0


def test_gradient_norm_average_decays_sublinearly():
    base = cli.parse_config(CONFIGS / "drift.json", ["target_accuracy=null"])
    eta0 = 0.1 * np.sqrt(250)

    def average_grad_norm(horizon):
        cfg = replace(base, T_max=horizon, eta=eta0 / np.sqrt(horizon))
        return np.mean([r.global_grad_norm_sq for r in simulator.run_experiment(cfg)])

    assert average_grad_norm(1000) / average_grad_norm(250) <= 0.75


def test_robust_aggregation_withstands_scaling_attacks():
    robust = cli.parse_config(CONFIGS / "byzantine.json", ["target_accuracy=null"])
    clean = replace(robust, aggregator="fedavg", attack=None, n_root=None)
    attacked = replace(clean, attack=robust.attack)

    def final_accuracy(cfg):
        return np.median([simulator.run_experiment(replace(cfg, seed=s))[-1].test_accuracy for s in SEEDS])

    clean_acc = final_accuracy(clean)
    assert final_accuracy(robust) >= clean_acc - 0.05
    assert final_accuracy(attacked) <= clean_acc - 0.10


def test_byzantine_config_matches_attack_setting():
    cfg = cli.parse_config(CONFIGS / "byzantine.json")
    assert cfg.M == cfg.S == 10
    assert cfg.n_root == (cfg.data.num_classes * cfg.data.per_class) // 10
    assert isinstance(cfg.attack, AttackConfig) and cfg.attack.num_attackers == 3
    assert cfg.attack.scalar_mode.variance == 3.0
