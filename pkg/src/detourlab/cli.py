"""Command-line experiment runner.

Subcommands: run (fixed-network epochs), learn (full latent-variable
learning), discover (random-policy structure search), eval (pre/post bundle
comparison), replay (byte-level reproducibility check).

Exit codes: 0 success, 2 configuration error, 3 replay divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import agent, discovery, environment as env, network as nw, traces
from .config import ExperimentConfig
from .errors import BundleMismatch, ConfigInvalid, ReplayDivergence
from .rng import PHASE_DISCOVERY, substream

#: cap applied to surprise coefficients when averaging for reports, so that
#: impossible-outcome (infinite) surprises keep the means finite
SURPRISE_CAP = 10.0


def _load_config(args) -> ExperimentConfig:
    cfg = (ExperimentConfig.load(args.config) if args.config
           else ExperimentConfig())
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if getattr(args, "no_barrier", False):
        cfg = dataclasses.replace(
            cfg, world=dataclasses.replace(cfg.world, barrier_exists=False))
    if getattr(args, "alpha", None) is not None:
        cfg = dataclasses.replace(
            cfg, agent=dataclasses.replace(cfg.agent, alpha=args.alpha))
    cfg.validate()
    return cfg


def cmd_run(cfg: ExperimentConfig, network_path: str | None = None,
            quiet: bool = False) -> Path:
    """Evaluation epochs under a fixed network; no structure change."""
    net = (nw.TwoSliceNetwork.from_json_str(Path(network_path).read_text())
           if network_path else nw.initial_network())
    epochs = agent.run_epochs(net, cfg.world, cfg.agent, cfg.seed, cfg.epochs)
    out = traces.write_bundle(cfg.output_dir, cfg, "run", epochs, net, net,
                              extra_args={"network": network_path})
    if not quiet:
        reached = sum(e.reached_target for e in epochs)
        print(f"run: {len(epochs)} epochs, {reached} reached target -> {out}")
    return out


def cmd_learn(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    """Full learning process; bundles pre/post networks and epoch summaries."""
    net_pre = nw.initial_network()
    net_post, epochs = agent.run_learning_process(cfg.world, cfg.agent, cfg.seed)
    out = traces.write_bundle(cfg.output_dir, cfg, "learn", epochs,
                              net_pre, net_post)
    if not quiet:
        hv = "with HV" if net_post.has_hidden else "no HV"
        print(f"learn: {len(epochs)} epochs, final network {hv} -> {out}")
    return out


def random_policy_log(cfg: ExperimentConfig) -> discovery.SampleLog:
    """Random-action rollout; episodes reset when the target is sighted."""
    rng = substream(cfg.seed, PHASE_DISCOVERY)
    state = env.WorldState.initial(cfg.world)
    cols = {name: [] for name in (*nw.OBS_VARS, "SF", "SA")}
    for _ in range(cfg.discovery.samples):
        obs = env.observe_discrete(state)
        act = nw.DiscreteAction(int(rng.integers(nw.N_SF)),
                                int(rng.integers(nw.N_SA)))
        for var in nw.OBS_VARS:
            cols[var].append(obs.value_of(var))
        cols["SF"].append(act.step_forward)
        cols["SA"].append(act.step_aside)
        if obs.target_in_visual_field == 1:
            # Episode ends once the sighting itself has been logged.
            state = env.WorldState.initial(cfg.world)
        else:
            state, _, _ = env.env_step(state, act, rng)
    cards = {**{v: nw.OBS_CARDS[v] for v in nw.OBS_VARS},
             "SF": nw.N_SF, "SA": nw.N_SA}
    return discovery.SampleLog(
        {k: np.array(v, dtype=int) for k, v in cols.items()}, cards)


def cmd_discover(cfg: ExperimentConfig, quiet: bool = False) -> Path:
    """Random sampling followed by coefficient-based structure search."""
    log = random_policy_log(cfg)
    edges = discovery.discover_structure(log, nw.OBS_VARS, ("SF", "SA"),
                                         cfg.discovery.threshold)
    lines = ["source,target,coefficient,kind"]
    lines += [f"{e.source},{e.target},{e.coefficient!r},{e.kind}"
              for e in edges]
    out = traces.write_generic_bundle(
        cfg.output_dir, cfg, "discover", {"report.csv": "\n".join(lines) + "\n"})
    if not quiet:
        print(f"discover: {len(edges)} edge candidates -> {out}")
    return out


def _bundle_dirs(path: str | Path) -> list[Path]:
    p = Path(path)
    if (p / "manifest.json").exists():
        return [p]
    dirs = sorted(d for d in p.iterdir() if (d / "manifest.json").exists())
    if not dirs:
        raise BundleMismatch(f"{path} contains no bundles")
    return dirs


def bundle_metrics(bundle: Path) -> dict:
    """Per-seed behavioral aggregates used by the eval comparison."""
    manifest = traces.read_manifest(bundle)
    summaries = json.loads((bundle / "epoch_summaries.json").read_text())
    epochs = summaries["epochs"]
    cs_bt, cs_d, c_u, steps_to_target = [], [], [], []
    with open(bundle / "step_records.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            cs_bt.append(min(float(row["cs_bt"]), SURPRISE_CAP))
            cs_d.append(min(float(row["cs_d"]), SURPRISE_CAP))
            c_u.append(min(abs(float(row["c_u"])), SURPRISE_CAP))
    for e in epochs:
        if e["reached_target"]:
            steps_to_target.append(e["steps"])
    n_epochs = max(1, len(epochs))
    return {
        "seed": manifest["seed"],
        "bt_events_per_epoch": sum(e["bt_events"] for e in epochs) / n_epochs,
        "mean_cs_bt": float(np.mean(cs_bt)) if cs_bt else 0.0,
        "mean_cs_d": float(np.mean(cs_d)) if cs_d else 0.0,
        "mean_abs_c_u": float(np.mean(c_u)) if c_u else 0.0,
        "success_rate": sum(e["reached_target"] for e in epochs) / n_epochs,
        "mean_steps_to_target": (float(np.mean(steps_to_target))
                                 if steps_to_target else math.nan),
    }


def cmd_eval(pre_path: str, post_path: str, out_path: str | None,
             quiet: bool = False) -> list[dict]:
    """Paired per-seed comparison of two bundle sets over the same seeds."""
    pre = {m["seed"]: m for m in map(bundle_metrics, _bundle_dirs(pre_path))}
    post = {m["seed"]: m for m in map(bundle_metrics, _bundle_dirs(post_path))}
    if set(pre) != set(post):
        raise BundleMismatch(
            f"seed sets differ: {sorted(pre)} vs {sorted(post)}")
    fields = ("bt_events_per_epoch", "mean_cs_bt", "mean_cs_d",
              "mean_abs_c_u", "success_rate", "mean_steps_to_target")
    rows = []
    for seed in sorted(pre):
        row = {"seed": seed}
        for name in fields:
            row[f"pre_{name}"] = pre[seed][name]
            row[f"post_{name}"] = post[seed][name]
            row[f"delta_{name}"] = post[seed][name] - pre[seed][name]
        rows.append(row)
    if out_path:
        header = list(rows[0].keys())
        lines = [",".join(header)]
        lines += [",".join(_cell(r[k]) for k in header) for r in rows]
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text("\n".join(lines) + "\n")
    if not quiet:
        for name in fields:
            deltas = [r[f"delta_{name}"] for r in rows]
            finite = [d for d in deltas if not math.isnan(d)]
            mean = float(np.mean(finite)) if finite else math.nan
            print(f"eval: mean delta {name} = {mean:+.4f}")
    return rows


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_replay(bundle_path: str, quiet: bool = False) -> None:
    """Re-run a bundle from its manifest and require byte equality."""
    manifest = traces.read_manifest(bundle_path)
    from . import __version__
    if manifest["code_version"] != __version__:
        print(f"warning: bundle produced by code version "
              f"{manifest['code_version']}, running {__version__}",
              file=sys.stderr)
    cfg = ExperimentConfig.from_json(manifest["config"])
    with tempfile.TemporaryDirectory() as tmp:
        cfg = dataclasses.replace(cfg, output_dir=tmp)
        command = manifest["command"]
        if command == "run":
            cmd_run(cfg, manifest["extra_args"].get("network"), quiet=True)
        elif command == "learn":
            cmd_learn(cfg, quiet=True)
        elif command == "discover":
            cmd_discover(cfg, quiet=True)
        else:
            raise BundleMismatch(f"unknown command {command!r} in manifest")
        traces.assert_replay_equal(bundle_path, tmp)
    if not quiet:
        print(f"replay: {bundle_path} reproduced byte-for-byte")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detourlab",
        description="Deterministic learning-to-detour simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, epochs=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output bundle directory")
        p.add_argument("--no-barrier", action="store_true")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--quiet", action="store_true")
        if epochs:
            p.add_argument("--epochs", type=int, default=None)

    p_run = sub.add_parser("run", help="fixed-network evaluation epochs")
    common(p_run)
    p_run.add_argument("--network", default=None,
                       help="network snapshot JSON to run instead of the "
                            "initial model")
    p_learn = sub.add_parser("learn", help="full latent-variable learning")
    common(p_learn, epochs=False)
    p_disc = sub.add_parser("discover", help="random-policy structure search")
    common(p_disc, epochs=False)

    p_eval = sub.add_parser("eval", help="compare two bundle sets")
    p_eval.add_argument("pre")
    p_eval.add_argument("post")
    p_eval.add_argument("--out", default=None, help="comparison CSV path")
    p_eval.add_argument("--quiet", action="store_true")

    p_replay = sub.add_parser("replay", help="reproduce a bundle byte-for-byte")
    p_replay.add_argument("bundle")
    p_replay.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cmd_run(_load_config(args), args.network, quiet=args.quiet)
        elif args.command == "learn":
            cmd_learn(_load_config(args), quiet=args.quiet)
        elif args.command == "discover":
            cmd_discover(_load_config(args), quiet=args.quiet)
        elif args.command == "eval":
            cmd_eval(args.pre, args.post, args.out, quiet=args.quiet)
        elif args.command == "replay":
            cmd_replay(args.bundle, quiet=args.quiet)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ReplayDivergence, BundleMismatch) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
