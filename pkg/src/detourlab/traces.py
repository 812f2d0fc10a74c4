"""Trace bundle writing, reading, and byte-level comparison.

A bundle is a directory containing a manifest plus deterministic CSV/JSON
outputs; the manifest (config + seed + command + code version) suffices to
re-execute the run bit-for-bit. Schemas are documented in docs/formats.md.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .agent import EpochSummary
from .config import ExperimentConfig
from .errors import BundleMismatch, ReplayDivergence
from .network import OBS_VARS, TwoSliceNetwork

SCHEMA_VERSION = 1

TRAJECTORY_HEADER = ("epoch,step,x,y,sf_cat,sa_cat,sf_cont,sa_cont,"
                     "bt,tvf,depth,ha")
STEP_HEADER = ("epoch,t,d_t,ha_t,bt_t,tvf_t,sf,sa,d_t1,ha_t1,bt_t1,tvf_t1,"
               "meu,realized_utility,c_u,influence_p0,weight,"
               + ",".join(f"cs_{v.lower()},p_{v.lower()},rej_{v.lower()}"
                          for v in OBS_VARS))


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def trajectory_csv(epochs: Sequence[EpochSummary]) -> str:
    lines = [TRAJECTORY_HEADER]
    for summary in epochs:
        for row in summary.path:
            lines.append(",".join([
                str(summary.epoch), str(row["step"]),
                _fmt(row["x"]), _fmt(row["y"]),
                str(row["sf_cat"]), str(row["sa_cat"]),
                _fmt(row["sf_cont"]), _fmt(row["sa_cont"]),
                str(row["bt"]), str(row["tvf"]),
                _fmt(row["depth"]), _fmt(row["ha"]),
            ]))
    return "\n".join(lines) + "\n"


def step_records_csv(epochs: Sequence[EpochSummary]) -> str:
    lines = [STEP_HEADER]
    for summary in epochs:
        for rec in summary.records:
            cells = [str(summary.epoch), str(rec.t),
                     *(str(v) for v in rec.obs_t.as_tuple()),
                     str(rec.action.step_forward), str(rec.action.step_aside),
                     *(str(v) for v in rec.obs_t1.as_tuple()),
                     _fmt(rec.meu), _fmt(rec.realized_utility),
                     _fmt(rec.c_u), _fmt(rec.influence_p0), _fmt(rec.weight)]
            for var in OBS_VARS:
                verdict = rec.per_variable[var]
                cells += [_fmt(verdict.coefficient), _fmt(verdict.p_value),
                          str(int(verdict.rejected))]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def epoch_summaries_json(epochs: Sequence[EpochSummary]) -> str:
    docs = []
    for summary in epochs:
        docs.append({
            "epoch": summary.epoch,
            "steps": len(summary.records),
            "detected": summary.detected,
            "selected_variables": list(summary.selected_variables),
            "rejection_counts": summary.rejection_counts,
            "reached_target": summary.reached_target,
            "bt_events": sum(r.obs_t1.barrier_tactile for r in summary.records),
        })
    return json.dumps({"schema_version": SCHEMA_VERSION, "epochs": docs},
                      sort_keys=True, indent=1) + "\n"


BUNDLE_FILES = ("trajectory.csv", "step_records.csv", "epoch_summaries.json",
                "network_pre.json", "network_post.json")


def write_bundle(out_dir: str | Path, config: ExperimentConfig, command: str,
                 epochs: Sequence[EpochSummary], net_pre: TwoSliceNetwork,
                 net_post: TwoSliceNetwork,
                 extra_args: Optional[dict] = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(epochs))
    (out / "step_records.csv").write_text(step_records_csv(epochs))
    (out / "epoch_summaries.json").write_text(epoch_summaries_json(epochs))
    (out / "network_pre.json").write_text(net_pre.to_json_str() + "\n")
    (out / "network_post.json").write_text(net_post.to_json_str() + "\n")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "command": command,
        "seed": config.seed,
        "config": config.to_json(),
        "files": list(BUNDLE_FILES),
        "extra_args": extra_args or {},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return out


def write_generic_bundle(out_dir: str | Path, config: ExperimentConfig,
                         command: str, files: dict[str, str],
                         extra_args: Optional[dict] = None) -> Path:
    """Bundle with arbitrary named text files (used by the discover command)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "command": command,
        "seed": config.seed,
        "config": config.to_json(),
        "files": sorted(files),
        "extra_args": extra_args or {},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return out


def read_manifest(bundle_dir: str | Path) -> dict:
    path = Path(bundle_dir) / "manifest.json"
    if not path.exists():
        raise BundleMismatch(f"{bundle_dir} has no manifest.json")
    return json.loads(path.read_text())


def compare_bundles(original: str | Path, replayed: str | Path) -> list[str]:
    """File names whose bytes differ between two bundles."""
    manifest = read_manifest(original)
    diffs = []
    for name in manifest["files"]:
        a = (Path(original) / name).read_bytes()
        b = (Path(replayed) / name).read_bytes()
        if a != b:
            diffs.append(name)
    return diffs


def assert_replay_equal(original: str | Path, replayed: str | Path) -> None:
    diffs = compare_bundles(original, replayed)
    if diffs:
        raise ReplayDivergence(f"bundle files diverged: {diffs}")
