"""Content-addressed cache of solved value fields.

A field is stored under the SHA-256 of its full solve parameters, so an edit
to any grid, bound or setting produces a new entry rather than a stale hit.
Corrupt entries fail their CRC on load and are re-solved.
"""

import hashlib
import json
import logging
import os
from pathlib import Path

from . import hj_solver
from .dynamics import DEFAULT_THRESHOLDS, DynamicsKind, RelativeModel, default_params
from .errors import CorruptPayload, FormatVersionMismatch
from .fieldio import FORMAT_VERSION, load_field, save_field
from .grid import default_grid

log = logging.getLogger(__name__)

CACHE_ENV = "PAIRSAFE_CACHE_DIR"
GAMES = ("coop", "worst", "ttr")
# bump when solver numerics change so old entries stop matching
SOLVER_REVISION = 3


def cache_dir():
    root = os.environ.get(CACHE_ENV)
    path = Path(root) if root else Path.home() / ".cache" / "pairsafe"
    path.mkdir(parents=True, exist_ok=True)
    return path


def default_settings(kind, game):
    if game == "worst":
        return hj_solver.worst_case_settings(kind)
    return hj_solver.SolveSettings()


def solve_request(kind, game, grid=None, settings=None, bounds=None, thresholds=None, desired_speed=None):
    """Normalise a solve request into ``(callable, kwargs, key_dict)``."""
    if game not in GAMES:
        raise ValueError(f"game must be one of {GAMES}, got {game!r}")
    settings = settings or default_settings(kind, game)
    if game == "ttr":
        if kind is not DynamicsKind.AIR_TAXI:
            raise ValueError("time-to-reach fields are defined for the air taxi only")
        grid = grid or hj_solver.default_ttr_grid()
        thresholds = thresholds or DEFAULT_THRESHOLDS[kind]
        desired_speed = default_params(kind).v_nominal if desired_speed is None else desired_speed
        b = bounds or default_params(kind).bounds
        key = dict(game=game, kind=kind.name, grid=grid.to_dict(), settings=settings.to_dict(),
                   bounds=[b.lo, b.hi], thresholds=[thresholds.dist, thresholds.heading, thresholds.speed],
                   desired_speed=desired_speed)
        kwargs = dict(target=thresholds, grid=grid, settings=settings, desired_speed=desired_speed, bounds=b)
        return hj_solver.solve_time_to_reach, kwargs, key
    grid = grid or default_grid(kind)
    model = RelativeModel.for_kind(kind, bounds)
    key = dict(game=game, kind=kind.name, grid=grid.to_dict(), settings=settings.to_dict(),
               bounds=[[model.bounds_i.lo, model.bounds_i.hi], [model.bounds_j.lo, model.bounds_j.hi]])
    fn = hj_solver.solve_cooperative_value if game == "coop" else hj_solver.solve_worstcase_value
    return fn, dict(kind=model, grid=grid, settings=settings), key


def request_hash(key):
    blob = json.dumps(dict(key, format=FORMAT_VERSION, revision=SOLVER_REVISION), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def cache_path(kind, game, **request):
    _, _, key = solve_request(kind, game, **request)
    return cache_dir() / f"{kind.name.lower()}-{game}-{request_hash(key)[:20]}.cbvf"


def get_field(kind, game, refresh=False, **request):
    """Load a field from the cache, solving and storing it on a miss.

    Returns ``(field, path, hit)``.
    """
    fn, kwargs, key = solve_request(kind, game, **request)
    path = cache_dir() / f"{kind.name.lower()}-{game}-{request_hash(key)[:20]}.cbvf"
    if path.exists() and not refresh:
        try:
            field = load_field(path)
            log.info("cache hit %s", path)
            return field, path, True
        except (CorruptPayload, FormatVersionMismatch) as exc:
            log.warning("discarding cache entry %s: %s", path, exc)
    field = fn(**kwargs)
    field.metadata["cache_key"] = request_hash(key)
    save_field(field, path)
    return field, path, False
