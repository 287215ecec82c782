"""Figure specs: what to draw, from which CSVs, to which file.

A spec is a JSON object ``{"kind", "out", "inputs", "title"?, "options"?}``.
``inputs`` is kind-specific:

========================  =================================================
kind                      inputs
========================  =================================================
fairness-by-rank          ``{"creators": {policy: creators.csv}}``
fairness-over-time        ``{"creators": {policy: creators.csv}}``
dissatisfaction           ``{"timesteps": {policy: timesteps.csv}}``
ratio-sweep               ``{"sweep": sweep.csv}``
tercile-bars              ``{"terciles": {policy: terciles.csv}}``
fairness-by-rank-grid     ``{"panels": {label: {policy: creators.csv}}}``
========================  =================================================

Colors are fixed per policy so different figures stay comparable side by
side; unknown policy names fall back to a deterministic grey cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import ManifestError

KINDS = (
    "fairness-by-rank",
    "fairness-over-time",
    "dissatisfaction",
    "ratio-sweep",
    "tercile-bars",
    "fairness-by-rank-grid",
)

# light blue / orange / dark blue / red legend shared by every kind
POLICY_COLORS = {
    "random": "#9ecae1",
    "popularity": "#ff7f0e",
    "pairwise+random": "#08306b",
    "pairwise+popularity": "#d62728",
}
_FALLBACK_COLORS = ("#636363", "#969696", "#bdbdbd", "#252525")

_CANONICAL = ("random", "popularity", "pairwise+random", "pairwise+popularity")
_KEYS = ("kind", "out", "inputs", "title", "options")


def policy_order(names) -> list:
    """Known policies in legend order, then everything else alphabetically."""
    names = list(names)
    known = [p for p in _CANONICAL if p in names]
    return known + sorted(set(names) - set(known))


def colors_for(names) -> dict:
    """Policy -> color; unknown names share the grey cycle deterministically."""
    extras = sorted(set(names) - set(POLICY_COLORS))
    out = {}
    for name in names:
        if name in POLICY_COLORS:
            out[name] = POLICY_COLORS[name]
        else:
            out[name] = _FALLBACK_COLORS[extras.index(name) % len(_FALLBACK_COLORS)]
    return out


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    out: str
    inputs: Mapping
    title: Optional[str] = None
    options: Mapping = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data) -> "FigureSpec":
        if not isinstance(data, Mapping):
            raise ManifestError(f"figure spec must be a JSON object, got {type(data).__name__}")
        missing = [key for key in ("kind", "out", "inputs") if key not in data]
        if missing:
            raise ManifestError(f"figure spec missing key(s): {', '.join(missing)}")
        unknown = sorted(set(data) - set(_KEYS))
        if unknown:
            raise ManifestError(f"unknown figure spec key(s): {', '.join(unknown)}")
        kind = data["kind"]
        if kind not in KINDS:
            raise ManifestError(
                f"unknown figure kind {kind!r}; expected one of: {', '.join(KINDS)}"
            )
        if not isinstance(data["inputs"], Mapping):
            raise ManifestError(f'{kind}: "inputs" must be a JSON object')
        options = data.get("options", {})
        if not isinstance(options, Mapping):
            raise ManifestError(f'{kind}: "options" must be a JSON object')
        return cls(
            kind=kind,
            out=str(data["out"]),
            inputs=dict(data["inputs"]),
            title=data.get("title"),
            options=dict(options),
        )
