"""Batch evaluation: resolve fields, run seeded episodes, write traces and a manifest."""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import cache
from .config import parse_config_text
from .coordination import compute_conflict_radius
from .dynamics import DynamicsKind
from .fieldio import file_checksum, load_field
from .metrics import SafetyMetrics, aggregate, metrics_for_config
from .policies import make_policy
from .simulator import read_trace_csv, run_episode

log = logging.getLogger(__name__)


@dataclass
class FieldSet:
    coop: object
    worst: object
    ttr: object = None
    paths: dict = field(default_factory=dict)


def resolve_fields(cfg, need_ttr=None):
    """Load fields named in the config, or fetch them from the solve cache."""
    need_ttr = cfg.kind is DynamicsKind.AIR_TAXI if need_ttr is None else need_ttr
    out = {}
    paths = {}
    for game, key in (("coop", "coop_field"), ("worst", "worst_field"), ("ttr", "ttr_field")):
        if game == "ttr" and not need_ttr:
            continue
        if key in cfg.fields:
            p = Path(cfg.fields[key])
            out[game] = load_field(p)
        else:
            out[game], p, _ = cache.get_field(cfg.kind, game)
        paths[game] = str(p)
    return FieldSet(out["coop"], out["worst"], out.get("ttr"), paths)


def radius_resolver(cfg):
    """``r_conflict = auto``: certified conflict radius of the worst-case field."""
    fs = resolve_fields(cfg, need_ttr=False)
    return compute_conflict_radius(fs.worst, cfg.r_safety).radius


def episode_seed(base, episode):
    return int(base) * 1000 + int(episode)


def load_episode_config(text, seed, filter_mode=None):
    cfg = parse_config_text(text, radius_resolver=radius_resolver, seed=seed)
    if filter_mode is not None:
        cfg.filter_mode = filter_mode
    return cfg


def _episode_job(args):
    text, base, episode, out_dir, filter_mode = args
    seed = episode_seed(base, episode)
    cfg = load_episode_config(text, seed, filter_mode)
    fs = resolve_fields(cfg)
    policy = make_policy(cfg.kind, fs.ttr)
    trace = run_episode(cfg, policy, (fs.coop, fs.worst))
    name = f"trace_seed{base}_ep{episode:03d}.csv"
    path = Path(out_dir) / name
    trace.to_csv(path)
    # metrics come from the exported file so re-analysis reproduces them exactly
    m = metrics_for_config(read_trace_csv(path), cfg)
    return dict(seed=base, episode=episode, episode_seed=seed, trace=name,
                trace_checksum=file_checksum(path), metrics=m.as_dict(), flags=trace.flags,
                r_conflict=cfg.r_conflict), fs.paths


def run_batch(config_path, seeds=(0,), episodes=None, out_dir="runs", jobs=None, filter_mode=None):
    """Run ``episodes`` per seed and write traces plus ``manifest.json``.

    Returns the manifest dictionary.
    """
    config_path = Path(config_path)
    text = config_path.read_text(encoding="utf-8")
    base_cfg = load_episode_config(text, episode_seed(seeds[0], 0), filter_mode)
    episodes = int(episodes or base_cfg.params.get("episodes", 1))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # make sure every field exists before workers start
    fs = resolve_fields(base_cfg)
    tasks = [(text, s, e, str(out_dir), filter_mode) for s in seeds for e in range(episodes)]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(tasks) == 1:
        results = [_episode_job(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_episode_job, tasks))
    rows = [r for r, _ in results]
    rows.sort(key=lambda r: (r["seed"], r["episode"]))
    agg = aggregate([_metrics_obj(r["metrics"]) for r in rows])
    manifest = dict(
        config=str(config_path),
        config_checksum=file_checksum(config_path),
        fields={k: dict(path=v, checksum=file_checksum(v)) for k, v in sorted(fs.paths.items())},
        seeds=list(seeds),
        episodes=episodes,
        output_dir=str(out_dir),
        r_conflict=base_cfg.r_conflict,
        episode_rows=rows,
        aggregate={k: dict(mean=m, std=s) for k, (m, s) in agg.items()},
        created=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _metrics_obj(d):
    return SafetyMetrics(**d)


TABLE_COLUMNS = (
    ("travel time [s]", "mean_travel_time"),
    ("near coll. %", "near_collision_pct"),
    ("conflict %", "conflict_pct"),
    ("waypoints", "waypoints_mean"),
    ("goal %", "goal_reach_pct"),
)


def format_table(manifest):
    """Aligned aggregate table (mean +- std over episodes)."""
    agg = manifest["aggregate"]
    cells = [(name, f"{agg[k]['mean']:.2f} +- {agg[k]['std']:.2f}") for name, k in TABLE_COLUMNS]
    width = [max(len(a), len(b)) for a, b in cells]
    head = "  ".join(a.rjust(w) for (a, _), w in zip(cells, width))
    body = "  ".join(b.rjust(w) for (_, b), w in zip(cells, width))
    return head + "\n" + body
