"""Shared fixtures: one moderately long coupled-map run reused across files."""
import numpy as np
import pytest

from closeness import delay_embed, henon_henon, iterate_map


@pytest.fixture(scope="session")
def henon_coupled():
    model = henon_henon(0.4)
    return iterate_map(model, model.default_initial_condition, 3000,
                       n_transient=1000)


@pytest.fixture(scope="session")
def henon_embeddings(henon_coupled):
    emb_x = delay_embed(henon_coupled.x[:, 0], 4, 1, source="x")
    emb_y = delay_embed(henon_coupled.y[:, 0], 4, 1, source="y")
    return emb_x, emb_y


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
