"""Series-preparation contracts, checked on tiny hand-computed tables."""

import numpy as np
import pandas as pd
import pytest

from ccfigs.errors import InputDataError
from ccfigs.plots import (
    dissatisfaction_series,
    excluded_fraction_label,
    fairness_by_rank_series,
    fairness_over_time_series,
)


@pytest.fixture
def creators():
    return pd.DataFrame(
        {
            "seed":         [0, 0, 1, 1, 0, 0, 1, 1],
            "t":            [1, 1, 1, 1, 3, 3, 3, 3],
            "creator_rank": [1, 2, 1, 2, 1, 2, 1, 2],
            "followers":    [9, 8, 7, 6, 5, 4, 3, 2],
            "cc_fair":      [1, 0, 1, 1, 1, 0, 0, 0],
        }
    )


@pytest.fixture
def timesteps():
    return pd.DataFrame(
        {
            "seed": [0, 0, 0, 1, 1, 1],
            "t":    [1, 2, 3, 1, 2, 3],
            "dissatisfaction":    [3.0, 2.0, 1.5, None, 2.5, 1.0],
            "fraction_no_follow": [0.5, 0.25, 0.0, 1.0, 0.5, 0.0],
            "fair_all": [0, 1, 1, 0, 0, 1],
        }
    )


class TestFairnessByRank:
    def test_defaults_to_last_timestep(self, creators):
        ranks, fair = fairness_by_rank_series(creators)
        assert ranks.tolist() == [1, 2]
        assert fair.tolist() == [0.5, 0.0]

    def test_explicit_timestep(self, creators):
        _, fair = fairness_by_rank_series(creators, t=1)
        assert fair.tolist() == [1.0, 0.5]

    def test_unrecorded_timestep(self, creators):
        with pytest.raises(InputDataError, match="no creator rows at t=2"):
            fairness_by_rank_series(creators, t=2)


class TestFairnessOverTime:
    def test_mean_of_per_run_fractions(self, creators):
        ts, means = fairness_over_time_series(creators)
        assert ts.tolist() == [1, 3]
        assert means.tolist() == [0.75, 0.25]


class TestDissatisfaction:
    def test_bare_policy_keeps_all_timesteps(self, timesteps):
        ts, means = dissatisfaction_series("popularity", timesteps)
        assert ts.tolist() == [1, 2, 3]
        # the empty (no-follows) cell is excluded, not counted as zero
        assert means.tolist() == [3.0, 2.25, 1.25]

    def test_pairwise_drops_exploration_steps(self, timesteps):
        ts, means = dissatisfaction_series("pairwise+popularity", timesteps)
        assert ts.tolist() == [3]
        assert means.tolist() == [1.25]

    def test_nothing_left_to_plot(self, timesteps):
        early = timesteps[timesteps["t"] <= 2]
        with pytest.raises(InputDataError, match="no dissatisfaction values"):
            dissatisfaction_series("pairwise+random", early)

    def test_excluded_fraction_label(self, timesteps):
        assert (
            excluded_fraction_label("random", timesteps)
            == "random: 0.0% of users follow no one at t=3"
        )
        early = timesteps[timesteps["t"] == 1]
        assert (
            excluded_fraction_label("random", early)
            == "random: 75.0% of users follow no one at t=1"
        )
