"""Pursuit-evasion on a grid: player 1 runs for the goal, player 2 chases.

The joint state is the pair of cells. Moves resolve independently (walls and
the border block a move, leaving the player in place); the joint successor
is then checked for a win (player 1 on the goal, +1) before a capture (both
on the same non-goal cell, -1). Either event moves the game to an absorbing
sink with a single action per player and zero payoff. Players swapping cells
in one step do not count as a capture.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidGameError, TransferError
from .game_model import Game, StationaryStrategy

Cell = tuple[int, int]  # (column, row counted from the top)

ACTIONS = ("right", "left", "up", "down", "stay")
MOVES = {"right": (1, 0), "left": (-1, 0), "up": (0, -1), "down": (0, 1), "stay": (0, 0)}
BUILTIN_MAPS = ("nominal", "blocked", "side")
WIN_LABEL = "win"
CAPTURE_LABEL = "capture"


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    walls: frozenset
    goal: Cell
    start_p1: Cell
    start_p2: Cell

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidGameError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        for name in ("goal", "start_p1", "start_p2"):
            cell = getattr(self, name)
            if not self.inside(cell):
                raise InvalidGameError(f"{name} {cell} is outside the grid")
            if cell in self.walls:
                raise InvalidGameError(f"{name} {cell} is on a wall")
        if self.goal in (self.start_p1, self.start_p2):
            raise InvalidGameError("starts must differ from the goal")
        if any(not self.inside(c) for c in self.walls):
            raise InvalidGameError("wall outside the grid")

    def inside(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def free_cells(self) -> list[Cell]:
        """Non-wall cells in row-major order."""
        return [(c, r) for r in range(self.height) for c in range(self.width) if (c, r) not in self.walls]

    def move(self, cell: Cell, action: str) -> Cell:
        dc, dr = MOVES[action]
        nxt = (cell[0] + dc, cell[1] + dr)
        return nxt if self.inside(nxt) and nxt not in self.walls else cell

    def to_text(self) -> str:
        marks = {self.goal: "G", self.start_p1: "1", self.start_p2: "2"}
        rows = []
        for r in range(self.height):
            rows.append("".join("#" if (c, r) in self.walls else marks.get((c, r), ".")
                                for c in range(self.width)))
        return "\n".join(rows) + "\n"


def parse_map(text: str) -> GridMap:
    """Parse an ASCII map over ``. # G 1 2``; each marker appears exactly once."""
    rows = [line.strip() for line in text.strip().splitlines()]
    rows = [r for r in rows if r]
    if not rows:
        raise InvalidGameError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidGameError(f"ragged map: row lengths {[len(r) for r in rows]}")
    walls, markers = set(), {"G": [], "1": [], "2": []}
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                walls.add((c, r))
            elif ch in markers:
                markers[ch].append((c, r))
            elif ch != ".":
                raise InvalidGameError(f"unexpected character {ch!r} at column {c}, row {r}")
    for ch, found in markers.items():
        if len(found) != 1:
            raise InvalidGameError(f"marker {ch!r} must appear exactly once, found {len(found)}")
    return GridMap(width, len(rows), frozenset(walls), markers["G"][0], markers["1"][0], markers["2"][0])


def builtin_map(name: str) -> GridMap:
    if name not in BUILTIN_MAPS:
        raise InvalidGameError(f"unknown built-in map {name!r}; choose from {', '.join(BUILTIN_MAPS)}")
    return parse_map(resources.files("ersg").joinpath("maps").joinpath(f"{name}.txt").read_text())


def load_map(spec: str) -> GridMap:
    """``builtin:<name>`` or a path to an ASCII map file."""
    if spec.startswith("builtin:"):
        return builtin_map(spec.split(":", 1)[1])
    return parse_map(Path(spec).read_text())


def cell_label(c1: Cell, c2: Cell) -> str:
    return f"{c1[0]},{c1[1]}|{c2[0]},{c2[1]}"


@dataclass(frozen=True, eq=False)
class ProductGame:
    """The joint-position game plus the cell-pair bookkeeping."""

    game: Game
    grid: GridMap
    index: dict  # (cell1, cell2) -> state
    win_sink: int
    capture_sink: int

    @property
    def start(self) -> int:
        return self.index[(self.grid.start_p1, self.grid.start_p2)]

    def cells(self, state: int) -> tuple[Cell, Cell] | None:
        """Cell pair of a non-sink state, ``None`` for the sinks."""
        for pair, x in self.index.items():
            if x == state:
                return pair
        return None


def build_game(m: GridMap) -> ProductGame:
    """Product game over ordered pairs of free cells plus two sinks."""
    free = m.free_cells()
    pairs = [(a, b) for a in free for b in free]
    index = {p: i for i, p in enumerate(pairs)}
    win_sink, capture_sink = len(pairs), len(pairs) + 1
    X, A = len(pairs) + 2, len(ACTIONS)
    P = np.zeros((X, A, A, X))
    R = np.zeros((X, A, A))
    for (c1, c2), x in index.items():
        for u, au in enumerate(ACTIONS):
            n1 = m.move(c1, au)
            for w, aw in enumerate(ACTIONS):
                n2 = m.move(c2, aw)
                if n1 == m.goal:
                    P[x, u, w, win_sink] = 1.0
                    R[x, u, w] = 1.0
                elif n1 == n2:
                    P[x, u, w, capture_sink] = 1.0
                    R[x, u, w] = -1.0
                else:
                    P[x, u, w, index[(n1, n2)]] = 1.0
    for s in (win_sink, capture_sink):
        P[s, 0, 0, s] = 1.0
    avail = np.full(X, A)
    avail[[win_sink, capture_sink]] = 1
    labels = {x: cell_label(*p) for p, x in index.items()}
    labels[win_sink], labels[capture_sink] = WIN_LABEL, CAPTURE_LABEL
    g = Game.from_arrays(P, R, avail_p1=avail, avail_p2=avail, labels=labels, storage="sparse")
    return ProductGame(g, m, index, win_sink, capture_sink)


def transfer_strategy(strategy: StationaryStrategy, src: ProductGame, dst: ProductGame) -> StationaryStrategy:
    """Carry a stationary strategy over to another map of the same size.

    States are matched by cell pair. Pairs that do not exist on the source
    map fall back to the uniform distribution; blocked moves are resolved by
    the destination's dynamics.
    """
    if (src.grid.width, src.grid.height) != (dst.grid.width, dst.grid.height):
        raise TransferError(f"map size changed from {src.grid.width}x{src.grid.height} "
                            f"to {dst.grid.width}x{dst.grid.height}")
    dist = np.asarray(strategy.dist)
    if dist.shape != (src.game.n_states, len(ACTIONS)):
        raise TransferError(f"strategy shape {dist.shape} does not match the source game")
    out = np.full((dst.game.n_states, len(ACTIONS)), 1.0 / len(ACTIONS))
    for pair, x in dst.index.items():
        if pair in src.index:
            out[x] = dist[src.index[pair]]
    for s in (dst.win_sink, dst.capture_sink):
        out[s] = 0.0
        out[s, 0] = 1.0
    return StationaryStrategy(out)
