"""Rendering dispatch plus the manifest-driven batch entry point.

A manifest is ``{"figures": [spec, ...]}`` (a bare JSON array also
works). The batch keeps going past per-figure failures and reports them
in the summary; an unusable manifest (missing file, bad JSON, wrong
top-level shape) aborts the whole batch instead.

Rendering is read-only over the CSVs and deterministic: the same inputs
and options produce byte-identical image files.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import FigureError, ManifestError
from .plots import DRAWERS
from .spec import FigureSpec

_DEFAULT_DPI = 150


def render(spec: Union[FigureSpec, Mapping], outdir) -> Path:
    """Draw one figure into outdir; returns the written path."""
    if not isinstance(spec, FigureSpec):
        spec = FigureSpec.from_dict(spec)
    fig = DRAWERS[spec.kind](spec)
    try:
        out = Path(outdir) / spec.out
        if not out.suffix:
            out = out.with_suffix(".png")
        out.parent.mkdir(parents=True, exist_ok=True)
        dpi = int(spec.options.get("dpi", _DEFAULT_DPI))
        # a fixed Software tag keeps PNG bytes reproducible across reruns
        kwargs = {"metadata": {"Software": "ccfigs"}} if out.suffix == ".png" else {}
        fig.savefig(out, dpi=dpi, **kwargs)
    finally:
        plt.close(fig)
    return out


@dataclass(frozen=True)
class RenderSummary:
    """Outcome of one batch: written paths and (figure, message) failures."""

    written: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def _manifest_entries(path) -> list:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"missing manifest file: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: bad JSON ({exc})") from exc
    if isinstance(data, Mapping):
        entries = data.get("figures")
        if entries is None:
            raise ManifestError(f'{path}: manifest object needs a "figures" array')
    elif isinstance(data, list):
        entries = data
    else:
        raise ManifestError(
            f'{path}: manifest must be {{"figures": [...]}} or a JSON array'
        )
    if not isinstance(entries, list):
        raise ManifestError(f'{path}: "figures" must be an array')
    return entries


def render_all(manifest_path, outdir) -> RenderSummary:
    """Render every figure in the manifest, isolating per-figure failures."""
    entries = _manifest_entries(manifest_path)
    if not entries:
        warnings.warn(
            f"manifest {manifest_path} lists no figures; nothing to render",
            stacklevel=2,
        )
        return RenderSummary((), ())
    written = []
    failures = []
    for idx, entry in enumerate(entries):
        label = f"figures[{idx}]"
        if isinstance(entry, Mapping) and entry.get("out"):
            label = str(entry["out"])
        try:
            written.append(render(entry, outdir))
        except FigureError as exc:
            failures.append((label, str(exc)))
    return RenderSummary(tuple(written), tuple(failures))
