"""Shared fixtures writing the figdata tables to disk."""

import pandas as pd
import pytest

from figdata import creators_frame, terciles_frame, timesteps_frame


@pytest.fixture
def policy_dirs(tmp_path):
    """creators/timesteps/terciles CSVs for two policies."""
    made = {}
    for flip, policy in enumerate(("random", "pairwise+popularity")):
        d = tmp_path / policy.replace("+", "-")
        d.mkdir()
        creators_frame(flip).to_csv(d / "creators.csv", index=False)
        timesteps_frame(flip).to_csv(d / "timesteps.csv", index=False)
        terciles_frame(flip).to_csv(d / "terciles.csv", index=False)
        made[policy] = d
    return made


@pytest.fixture
def sweep_csv(tmp_path):
    rows = []
    for ratio in (0.0, 0.1, 0.5):
        for flip, policy in enumerate(("popularity", "pairwise+popularity")):
            mean = 0.9 - ratio * (0.6 - 0.3 * flip)
            rows.append(
                {
                    "ratio": ratio,
                    "policy": policy,
                    "fair_mean": mean,
                    "ci_lo": mean - 0.04,
                    "ci_hi": mean + 0.04,
                }
            )
    path = tmp_path / "sweep.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    return path
