"""Seeded gridworld generators for the benchmark domains.

Four domains on a common 4-connected grid: plain mazes with random
obstacles, four-rooms layouts with seeded doorways, puddle worlds with
traversal penalties, and rock worlds with valuable and dangerous cells.
Moves into obstacles or off the grid are self-loop no-ops, which keeps
the action space identical across models that differ only in obstacle
placement. Generation is a pure function of the spec: the same seed
reproduces the same model bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bottlenecks import find_bottlenecks
from .mdp import DEFAULT_GAMMA, GoalMdp, to_document

DOMAINS = ("maze", "four_rooms", "puddle", "rocks")
ACTIONS = ("up", "right", "down", "left")
_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))
MAX_GENERATION_ATTEMPTS = 200

DEFAULT_PUDDLE_PENALTY = -0.05
DEFAULT_ROCK_REWARD = 0.01
DEFAULT_ROCK_PENALTY = -0.05


class GenerationError(RuntimeError):
    """Seeded generation could not produce a feasible layout."""


@dataclass(frozen=True)
class GridSpec:
    """Parameters of one gridworld model."""

    width: int
    height: int
    obstacle_density: float = 0.0
    seed: int = 0
    slip_probability: float = 0.0
    domain: str = "maze"
    gamma: float = DEFAULT_GAMMA
    start: Optional[tuple[int, int]] = None
    goal: Optional[tuple[int, int]] = None
    domain_params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid needs positive dimensions")
        if not 0.0 <= self.obstacle_density < 1.0:
            raise ValueError("obstacle density must lie in [0, 1)")
        if not 0.0 <= self.slip_probability < 0.5:
            raise ValueError("slip probability must lie in [0, 0.5)")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")

    def params(self) -> dict:
        return dict(self.domain_params)

    @property
    def start_cell(self) -> tuple[int, int]:
        return self.start if self.start is not None else (0, 0)

    @property
    def goal_cell(self) -> tuple[int, int]:
        return self.goal if self.goal is not None else (self.height - 1, self.width - 1)

    def cell_index(self, cell: tuple[int, int]) -> int:
        r, c = cell
        return r * self.width + c


def _rng(spec: GridSpec, attempt: int, purpose: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(spec.seed) & (2**63 - 1), purpose, attempt])


def _four_rooms_layout(spec: GridSpec, rng) -> tuple[set, set]:
    """Fixed cross walls with one seeded door per wall segment."""
    wall_row, wall_col = spec.height // 2, spec.width // 2
    walls = {(wall_row, c) for c in range(spec.width)}
    walls |= {(r, wall_col) for r in range(spec.height)}
    segments = [
        [(wall_row, c) for c in range(0, wall_col)],
        [(wall_row, c) for c in range(wall_col + 1, spec.width)],
        [(r, wall_col) for r in range(0, wall_row)],
        [(r, wall_col) for r in range(wall_row + 1, spec.height)],
    ]
    doors = set()
    for segment in segments:
        if segment:
            doors.add(segment[int(rng.integers(len(segment)))])
    return walls - doors, doors


def _grid_feasible(spec: GridSpec, blocked: set) -> bool:
    start, goal = spec.start_cell, spec.goal_cell
    if start in blocked or goal in blocked:
        return False
    seen = {start}
    frontier = deque([start])
    while frontier:
        r, c = frontier.popleft()
        if (r, c) == goal:
            return True
        for dr, dc in _DELTAS:
            cell = (r + dr, c + dc)
            if (
                0 <= cell[0] < spec.height
                and 0 <= cell[1] < spec.width
                and cell not in blocked
                and cell not in seen
            ):
                seen.add(cell)
                frontier.append(cell)
    return False


def _sample_cells(rng, pool: list, count: int) -> list:
    count = min(count, len(pool))
    if count == 0:
        return []
    picks = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(int(i) for i in picks)]


def _build_model(spec: GridSpec, blocked: set, overlay_cells: dict, meta_extra: dict) -> GoalMdp:
    w, h = spec.width, spec.height
    start, goal = spec.start_cell, spec.goal_cell
    goal_index = spec.cell_index(goal)
    slip = spec.slip_probability

    def land(r, c, direction):
        dr, dc = _DELTAS[direction]
        cell = (r + dr, c + dc)
        if not (0 <= cell[0] < h and 0 <= cell[1] < w) or cell in blocked:
            return (r, c)
        return cell

    transitions: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for r in range(h):
        for c in range(w):
            s = spec.cell_index((r, c))
            if s == goal_index:
                for a in range(4):
                    transitions[(s, a)] = [(s, 1.0)]
                continue
            for a in range(4):
                moves = [(a, 1.0 - 2.0 * slip)] if slip else [(a, 1.0)]
                if slip:
                    moves += [((a + 1) % 4, slip), ((a + 3) % 4, slip)]
                landed: dict[int, float] = {}
                for direction, p in moves:
                    t = spec.cell_index(land(r, c, direction))
                    landed[t] = landed.get(t, 0.0) + p
                transitions[(s, a)] = sorted(landed.items())
    labels = [f"{r},{c}" for r in range(h) for c in range(w)]
    overlay = {spec.cell_index(cell): value for cell, value in overlay_cells.items()}
    meta = {
        "domain": spec.domain,
        "width": w,
        "height": h,
        "seed": int(spec.seed),
        "obstacle_density": spec.obstacle_density,
        "slip_probability": slip,
        "start": list(start),
        "goal": list(goal),
        "obstacles": sorted(list(cell) for cell in blocked),
    }
    meta.update(meta_extra)
    return GoalMdp(
        n_states=w * h,
        n_actions=4,
        transitions=transitions,
        initial_state=spec.cell_index(start),
        goal_states=[goal_index],
        gamma=spec.gamma,
        reward_overlay=overlay or None,
        state_labels=labels,
        meta=meta,
    )


def _generate(spec: GridSpec) -> GoalMdp:
    start, goal = spec.start_cell, spec.goal_cell
    for cell in (start, goal):
        if not (0 <= cell[0] < spec.height and 0 <= cell[1] < spec.width):
            raise GenerationError(f"cell {cell} outside the grid")
    for attempt in range(MAX_GENERATION_ATTEMPTS):
        rng = _rng(spec, attempt)
        fixed_blocked: set = set()
        doors: set = set()
        meta_extra: dict = {}
        if spec.domain == "four_rooms":
            fixed_blocked, doors = _four_rooms_layout(spec, rng)
            if start in fixed_blocked or goal in fixed_blocked:
                raise GenerationError("start or goal sits on a four-rooms wall")
            meta_extra["doors"] = sorted(list(d) for d in doors)
        reserved = {start, goal} | fixed_blocked | doors
        open_cells = [
            (r, c)
            for r in range(spec.height)
            for c in range(spec.width)
            if (r, c) not in reserved
        ]
        blocked = set(fixed_blocked)
        if spec.obstacle_density > 0 and open_cells:
            draws = rng.random(len(open_cells))
            blocked |= {
                cell for cell, u in zip(open_cells, draws) if u < spec.obstacle_density
            }
        if not _grid_feasible(spec, blocked):
            continue
        overlay_cells: dict = {}
        params = spec.params()
        free = [
            (r, c)
            for r in range(spec.height)
            for c in range(spec.width)
            if (r, c) not in blocked and (r, c) != goal
        ]
        if spec.domain == "puddle":
            penalty = params.get("puddle_penalty", DEFAULT_PUDDLE_PENALTY)
            cells = params.get("puddle_cells")
            if cells is None:
                count = params.get("puddle_count", max(1, (spec.width * spec.height) // 8))
                cells = _sample_cells(rng, free, count)
            overlay_cells = {tuple(cell): penalty for cell in cells}
            meta_extra["puddles"] = sorted(list(cell) for cell in overlay_cells)
        elif spec.domain == "rocks":
            reward = params.get("rock_reward", DEFAULT_ROCK_REWARD)
            penalty = params.get("rock_penalty", DEFAULT_ROCK_PENALTY)
            valuable = params.get("valuable_cells")
            dangerous = params.get("dangerous_cells")
            if valuable is None or dangerous is None:
                v_count = params.get("valuable_count", max(1, (spec.width * spec.height) // 10))
                d_count = params.get("dangerous_count", max(1, (spec.width * spec.height) // 10))
                picks = _sample_cells(rng, free, v_count + d_count)
                valuable = picks[:v_count] if valuable is None else valuable
                dangerous = picks[v_count:] if dangerous is None else dangerous
            overlay_cells = {tuple(cell): reward for cell in valuable}
            for cell in dangerous:
                overlay_cells[tuple(cell)] = penalty
            meta_extra["valuable_rocks"] = sorted(list(c) for c in valuable)
            meta_extra["dangerous_rocks"] = sorted(list(c) for c in dangerous)
        if any(tuple(cell) == goal for cell in overlay_cells):
            continue
        meta_extra["attempt"] = attempt
        return _build_model(spec, blocked, overlay_cells, meta_extra)
    raise GenerationError(
        f"no feasible layout for {spec.domain} seed {spec.seed} "
        f"within {MAX_GENERATION_ATTEMPTS} attempts"
    )


def make_maze(spec: GridSpec) -> GoalMdp:
    """Grid with seeded random obstacles; goal guaranteed reachable."""
    return _generate(replace(spec, domain="maze"))


def make_four_rooms(spec: GridSpec) -> GoalMdp:
    """Four quadrants split by cross walls, one seeded door per segment."""
    if spec.width < 4 or spec.height < 4:
        raise ValueError("four_rooms needs at least a 4x4 grid")
    return _generate(replace(spec, domain="four_rooms"))


def make_puddle_world(spec: GridSpec) -> GoalMdp:
    """Maze plus penalized puddle cells (reward overlay; reachability
    untouched)."""
    return _generate(replace(spec, domain="puddle"))


def make_rock_world(spec: GridSpec) -> GoalMdp:
    """Maze plus valuable and dangerous rock cells (reward overlay)."""
    return _generate(replace(spec, domain="rocks"))


_MAKERS = {
    "maze": make_maze,
    "four_rooms": make_four_rooms,
    "puddle": make_puddle_world,
    "rocks": make_rock_world,
}


def make_grid_world(spec: GridSpec) -> GoalMdp:
    return _MAKERS[spec.domain](spec)


@dataclass(frozen=True)
class EnsembleSpec:
    """A robot model plus a family of human models on the same grid.

    Human models reuse the robot's spec with their own obstacle seeds,
    so the family shares the state/action skeleton and differs only in
    transition structure. Ground truth is sampled from the designated
    truth model's own waypoint candidates.
    """

    base: GridSpec
    human_count: int
    human_seeds: Optional[tuple[int, ...]] = None
    truth_model_index: int = 0
    subgoal_inclusion_prob: float = 0.5

    def __post_init__(self):
        if self.human_count < 1:
            raise ValueError("need at least one human model")
        if not 0 <= self.truth_model_index < self.human_count:
            raise ValueError("truth model index out of range")
        if self.human_seeds is not None and len(set(self.human_seeds)) != self.human_count:
            raise ValueError("human seeds must be distinct and match human_count")

    def derived_human_seeds(self) -> tuple[int, ...]:
        if self.human_seeds is not None:
            return self.human_seeds
        seq = np.random.SeedSequence([int(self.base.seed) & (2**63 - 1), 0x48])
        return tuple(int(s) for s in seq.generate_state(self.human_count, np.uint64))


def make_ensemble(spec: EnsembleSpec) -> tuple[GoalMdp, list[GoalMdp], frozenset[int]]:
    """Robot model, human models, and the sampled ground-truth required set."""
    robot = make_grid_world(spec.base)
    humans = [
        make_grid_world(replace(spec.base, seed=seed))
        for seed in spec.derived_human_seeds()
    ]
    truth_model = humans[spec.truth_model_index]
    result = find_bottlenecks(truth_model)
    candidates = sorted(result.candidates(truth_model)) if result.feasible else []
    rng = np.random.default_rng([int(spec.base.seed) & (2**63 - 1), 0x54])
    draws = rng.random(len(candidates)) if candidates else []
    truth = frozenset(
        cell for cell, u in zip(candidates, draws) if u < spec.subgoal_inclusion_prob
    )
    return robot, humans, truth


def render_map(mdp: GoalMdp, marks: Optional[dict[int, str]] = None) -> str:
    """Human-readable map: '#' obstacle, 'S' start, 'G' goal, '~' puddle,
    '+' valuable rock, 'x' dangerous rock, '.' free. ``marks`` overrides
    glyphs per state index (used to highlight waypoints)."""
    meta = mdp.meta
    if "width" not in meta or "height" not in meta:
        raise ValueError("model carries no grid metadata")
    w, h = meta["width"], meta["height"]
    grid = [["." for _ in range(w)] for _ in range(h)]
    for r, c in meta.get("obstacles", []):
        grid[r][c] = "#"
    for r, c in meta.get("puddles", []):
        grid[r][c] = "~"
    for r, c in meta.get("valuable_rocks", []):
        grid[r][c] = "+"
    for r, c in meta.get("dangerous_rocks", []):
        grid[r][c] = "x"
    if marks:
        for state, glyph in marks.items():
            grid[state // w][state % w] = glyph
    sr, sc = meta["start"]
    gr, gc = meta["goal"]
    grid[sr][sc] = "S"
    grid[gr][gc] = "G"
    return "\n".join("".join(row) for row in grid)


def model_digest(mdp: GoalMdp) -> str:
    """Stable hash of the full model structure (used for golden tests)."""
    doc = to_document(mdp)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
