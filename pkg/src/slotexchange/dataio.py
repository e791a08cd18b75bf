"""Dataset ingestion and run artifact persistence.

Dataset layout: one ``agent_<id>.plans`` file per agent, each line
``<score>:<v_1>,<v_2>,...,<v_d>``. The lowest-score line is the agent's
preferred plan (first one on ties).
"""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from slotexchange.exchange import exchanges_to_csv
from slotexchange.plans import AgentState, PlanSet, Population

logger = logging.getLogger(__name__)

_AGENT_FILE = re.compile(r"^agent_(\d+)\.plans$")


class DatasetError(ValueError):
    pass


@dataclass
class DatasetManifest:
    root: str
    n: int
    d: int
    k: int
    files: list = field(default_factory=list)


def agent_files(path) -> list:
    """``(id, path)`` pairs for every agent file under ``path``, sorted by id."""
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    found = []
    for entry in root.iterdir():
        m = _AGENT_FILE.match(entry.name)
        if m:
            found.append((int(m.group(1)), entry))
    found.sort()
    return found


def parse_plans(text: str, source: str = "<string>"):
    """Parse one agent file into ``(scores, plans)``."""
    scores, plans = [], []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise DatasetError(f"{source}:{lineno}: missing ':' after score")
        try:
            score = float(head)
            values = [float(v) for v in body.split(",")]
        except ValueError as exc:
            raise DatasetError(f"{source}:{lineno}: {exc}") from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DatasetError(f"{source}:{lineno}: expected {width} values, found {len(values)}")
        if not np.all(np.isfinite(values)) or min(values) < 0:
            raise DatasetError(f"{source}:{lineno}: values must be finite and non-negative")
        scores.append(score)
        plans.append(values)
    if not plans:
        raise DatasetError(f"{source}: no plans found")
    return np.array(scores), np.array(plans, dtype=np.float64)


def format_plans(plan_set: PlanSet, scores=None) -> str:
    if scores is None:
        scores = plan_set.discomforts
    lines = []
    for score, plan in zip(scores, plan_set.plans):
        lines.append(f"{float(score)!r}:" + ",".join(repr(float(v)) for v in plan))
    return "\n".join(lines) + "\n"


def load_dataset(path, limit: Optional[int] = None):
    """Read a plan dataset into a :class:`Population` (all agents on their
    preferred plans) and describe it with a :class:`DatasetManifest`."""
    files = agent_files(path)
    if not files:
        raise DatasetError(f"no agent_<id>.plans files in {path}")
    if limit is not None:
        if limit < 0:
            raise ValueError("limit must be non-negative")
        files = files[:limit]
    agents = []
    d = k = None
    for new_id, (_, fpath) in enumerate(files):
        scores, plans = parse_plans(fpath.read_text(), str(fpath))
        if d is None:
            k, d = plans.shape
        elif plans.shape != (k, d):
            raise DatasetError(f"{fpath}: shape {plans.shape} differs from ({k}, {d}) of earlier agents")
        try:
            ps = PlanSet(plans, preferred_index=int(np.argmin(scores)))
        except ValueError as exc:
            raise DatasetError(f"{fpath}: {exc}") from None
        agents.append(AgentState(new_id, ps))
    manifest = DatasetManifest(root=str(path), n=len(agents), d=d or 0, k=k or 0,
                               files=[str(f) for _, f in files])
    return Population(agents), manifest


def write_dataset(plan_sets, path) -> list:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for i, ps in enumerate(plan_sets):
        fpath = root / f"agent_{i}.plans"
        fpath.write_text(format_plans(ps))
        written.append(fpath)
    return written


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_run(report, trace, exchanges, out, config: Optional[dict] = None, extra: Optional[dict] = None) -> dict:
    """Write ``metrics.json``, ``trace.csv``, ``exchanges.csv`` and
    ``config.json`` into ``out``; returns ``{name: path}``.

    ``report`` is a JSON-serializable dict or an object with ``to_dict``.
    ``extra`` maps additional file names to their text content.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    files = {
        "metrics.json": json.dumps(payload, indent=2, sort_keys=True) + "\n",
        "trace.csv": trace.to_csv(),
        "exchanges.csv": exchanges_to_csv(exchanges),
        "config.json": json.dumps(config or {}, indent=2, sort_keys=True) + "\n",
    }
    files.update(extra or {})
    manifest = {}
    for name, text in files.items():
        target = out / name
        _atomic_write(target, text)
        manifest[name] = str(target)
    return manifest


def load_config(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "config.json"
    return json.loads(p.read_text())
