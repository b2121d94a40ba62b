"""Shared fixtures: solver resolution and the desk-scale trained pipeline."""

import os
import shutil
from pathlib import Path

import numpy as np
import pytest

from sensq.data import gen_synthetic
from sensq.mlp import forward_batch
from sensq.solver import ENV_SOLVER_CMD, SolverConfig
from sensq.train import TrainConfig, train

REPO_ROOT = Path(__file__).resolve().parent.parent
WASM_Z3 = REPO_ROOT / "tools" / "z3smt" / "z3"


def resolve_solver() -> SolverConfig | None:
    if os.environ.get(ENV_SOLVER_CMD):
        return SolverConfig.from_env(seed=0)
    if shutil.which("z3"):
        return SolverConfig(seed=0)
    if WASM_Z3.exists() and (WASM_Z3.parent / "node_modules").is_dir():
        return SolverConfig(cmd=str(WASM_Z3), seed=0)
    return None


@pytest.fixture(scope="session")
def solver_config() -> SolverConfig:
    cfg = resolve_solver()
    if cfg is None:
        pytest.skip(
            "no SMT solver available: install z3, set SENSQ_SOLVER_CMD, or "
            "run `npm install` in tools/z3smt"
        )
    return cfg


@pytest.fixture(scope="session")
def desk_dataset():
    return gen_synthetic(10, 50, 0.2, seed=7)


@pytest.fixture(scope="session")
def desk_model(desk_dataset):
    cfg = TrainConfig(
        architecture=(8, 6, 4, 1), epochs=20, learning_rate=0.2, batch_size=16, seed=7
    )
    return train(cfg, desk_dataset)


@pytest.fixture(scope="session")
def desk_base_sample(desk_model, desk_dataset):
    """Label-0 sample nearest the decision boundary."""
    _, _, logits = forward_batch(desk_model, desk_dataset.features)
    candidates = np.flatnonzero(desk_dataset.labels == 0)
    return desk_dataset.features[candidates[np.argmax(logits[candidates])]]
