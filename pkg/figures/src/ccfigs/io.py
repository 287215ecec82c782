"""Schema-checked CSV loading.

The four input schemas are the experiment harness's documented outputs;
extra columns are tolerated, missing ones are an error that names them.
"""

from __future__ import annotations

from pathlib import Path

import pandas as pd

from .errors import InputDataError

CREATORS_COLUMNS = ("seed", "t", "creator_rank", "followers", "cc_fair")
TIMESTEPS_COLUMNS = ("seed", "t", "dissatisfaction", "fraction_no_follow", "fair_all")
SWEEP_COLUMNS = ("ratio", "policy", "fair_mean", "ci_lo", "ci_hi")
TERCILES_COLUMNS = ("tercile", "lo_rank", "hi_rank", "fair_mean", "ci_lo", "ci_hi")


def load_table(path, required) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"missing input file: {path}")
    try:
        table = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise InputDataError(f"{path}: no data rows") from None
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise InputDataError(f"{path}: unreadable CSV ({exc})") from exc
    missing = [col for col in required if col not in table.columns]
    if missing:
        raise InputDataError(f"{path}: missing column(s): {', '.join(missing)}")
    if table.empty:
        raise InputDataError(f"{path}: no data rows")
    return table


def per_policy_tables(spec_kind: str, mapping, required) -> list:
    """Ordered (policy, table) pairs from an inputs mapping of CSV paths."""
    from .spec import policy_order

    if not isinstance(mapping, dict) or not mapping:
        raise InputDataError(
            f"{spec_kind}: expected a non-empty {{policy: csv path}} mapping"
        )
    return [(name, load_table(mapping[name], required)) for name in policy_order(mapping)]
