"""Imperfect-information goofspiel with point cards revealed in descending order.

Each player holds bid cards ``1..K``.  At turn ``t`` the point card ``K - t`` is
contested; both players bid simultaneously, the higher bid takes the card and a
tie discards it.  Players never see the opponent's bid, only the win/draw/loss
outcome of each turn.  Returns are the point difference.

Besides the step-by-step engine (:func:`new_game`, :func:`apply_joint_action`)
this module builds a cached :class:`InfoStateTable` for a given ``K``: every
reachable information state of one player (the game is symmetric, so both
players share the table through the egocentric outcome convention) together
with every joint terminal history.  The tables make exact evaluation and best
responses vectorised numpy operations.
"""

from __future__ import annotations

import enum
import functools
import itertools
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "TieRule",
    "GameSpec",
    "GameState",
    "InfoStateKey",
    "InfoStateTable",
    "InvalidSpecError",
    "IllegalActionError",
    "NotTerminalError",
    "new_game",
    "apply_joint_action",
    "terminal_return",
    "infostate_key",
    "enumerate_infostates",
    "infostate_table",
]


class InvalidSpecError(ValueError):
    pass


class IllegalActionError(ValueError):
    pass


class NotTerminalError(ValueError):
    pass


class TieRule(str, enum.Enum):
    DISCARD = "discard"


@dataclass(frozen=True)
class GameSpec:
    num_cards: int = 5
    tie_rule: TieRule = TieRule.DISCARD

    def __post_init__(self):
        if isinstance(self.num_cards, bool) or not isinstance(self.num_cards, (int, np.integer)):
            raise InvalidSpecError(f"num_cards must be an integer, got {self.num_cards!r}")
        if self.num_cards < 2:
            raise InvalidSpecError(f"num_cards must be >= 2, got {self.num_cards}")
        object.__setattr__(self, "num_cards", int(self.num_cards))
        object.__setattr__(self, "tie_rule", TieRule(self.tie_rule))

    @property
    def point_cards(self) -> tuple[int, ...]:
        return tuple(range(self.num_cards, 0, -1))

    @property
    def max_return(self) -> int:
        return self.num_cards * (self.num_cards + 1) // 2

    def to_dict(self) -> dict:
        return {"num_cards": self.num_cards, "tie_rule": self.tie_rule.value}

    @classmethod
    def from_dict(cls, data: dict) -> "GameSpec":
        try:
            return cls(num_cards=data["num_cards"], tie_rule=data.get("tie_rule", "discard"))
        except (KeyError, TypeError) as exc:
            raise InvalidSpecError(f"malformed game spec: {data!r}") from exc


@dataclass(frozen=True)
class GameState:
    spec: GameSpec
    turn: int
    hands: tuple[frozenset, frozenset]
    actions: tuple[tuple[int, ...], tuple[int, ...]]
    outcomes: tuple[int, ...]  # player-0 perspective
    points: tuple[int, int]

    @property
    def is_terminal(self) -> bool:
        return self.turn == self.spec.num_cards

    @property
    def point_card(self) -> int:
        return self.spec.num_cards - self.turn


class InfoStateKey(NamedTuple):
    """A player's observation history: own bids and own-perspective outcomes."""

    actions: tuple[int, ...]
    outcomes: tuple[int, ...]

    @property
    def turn(self) -> int:
        return len(self.actions)

    def encode(self) -> str:
        return "".join(f"{a}{_OUTCOME_CHARS[w]}" for a, w in zip(self.actions, self.outcomes))

    @classmethod
    def decode(cls, text: str) -> "InfoStateKey":
        if not _KEY_RE.fullmatch(text):
            raise ValueError(f"malformed information-state key {text!r}")
        steps = [(int(a), _OUTCOME_VALUES[c]) for a, c in _STEP_RE.findall(text)]
        return cls(tuple(a for a, _ in steps), tuple(w for _, w in steps))


_OUTCOME_CHARS = {1: "W", 0: "D", -1: "L"}
_OUTCOME_VALUES = {c: w for w, c in _OUTCOME_CHARS.items()}
_STEP_RE = re.compile(r"(\d+)([WDL])")
_KEY_RE = re.compile(r"(?:\d+[WDL])*")


def _sign(x: int) -> int:
    x = int(x)
    return (x > 0) - (x < 0)


def new_game(spec: GameSpec) -> GameState:
    hand = frozenset(range(1, spec.num_cards + 1))
    return GameState(spec, 0, (hand, hand), ((), ()), (), (0, 0))


def apply_joint_action(state: GameState, a0: int, a1: int) -> tuple[GameState, int]:
    """Play one simultaneous bid; returns the next state and ``sign(a0 - a1)``."""
    if state.is_terminal:
        raise IllegalActionError("game is over")
    if a0 not in state.hands[0]:
        raise IllegalActionError(f"player 0 cannot bid {a0}; hand is {sorted(state.hands[0])}")
    if a1 not in state.hands[1]:
        raise IllegalActionError(f"player 1 cannot bid {a1}; hand is {sorted(state.hands[1])}")
    a0, a1 = int(a0), int(a1)
    w = _sign(a0 - a1)
    card = state.point_card
    p0, p1 = state.points
    if w > 0:
        p0 += card
    elif w < 0:
        p1 += card
    nxt = GameState(
        spec=state.spec,
        turn=state.turn + 1,
        hands=(state.hands[0] - {a0}, state.hands[1] - {a1}),
        actions=(state.actions[0] + (a0,), state.actions[1] + (a1,)),
        outcomes=state.outcomes + (w,),
        points=(p0, p1),
    )
    return nxt, w


def terminal_return(state: GameState) -> float:
    """Player-0 return; player 1 receives the negation."""
    if not state.is_terminal:
        raise NotTerminalError(f"state at turn {state.turn} of {state.spec.num_cards} is not terminal")
    return float(state.points[0] - state.points[1])


def infostate_key(state: GameState, player: int) -> InfoStateKey:
    if player not in (0, 1):
        raise ValueError(f"player must be 0 or 1, got {player}")
    sign = 1 if player == 0 else -1
    return InfoStateKey(state.actions[player], tuple(sign * w for w in state.outcomes))


def enumerate_infostates(spec: GameSpec) -> set[InfoStateKey]:
    """Decision information states (turn < K) reachable under some joint play."""
    table = infostate_table(spec.num_cards)
    return set(table.keys[: table.num_decision])


class InfoStateTable:
    """Indexed information states of one seat plus all joint terminal histories.

    Decision nodes (turn < K) occupy indices ``0..num_decision-1`` ordered by
    ``(turn, encoded key)``; terminal views follow.  Action column ``c``
    stands for bid rank ``c + 1``.

    Path arrays have shape ``(num_paths, K)``: ``node0[p, t]`` is player 0's
    information state at turn ``t`` of joint history ``p`` and ``col0[p, t]``
    its action column; ``node1``/``col1`` are the same for player 1 in its own
    egocentric view.  ``term0``/``term1`` index the terminal views and
    ``returns`` holds the player-0 return.
    """

    def __init__(self, num_cards: int):
        K = num_cards
        self.num_cards = K
        views: set[InfoStateKey] = set()
        paths = []

        def walk(state: GameState):
            views.add(infostate_key(state, 0))
            views.add(infostate_key(state, 1))
            if state.is_terminal:
                paths.append(state)
                return
            for a0 in sorted(state.hands[0]):
                for a1 in sorted(state.hands[1]):
                    walk(apply_joint_action(state, a0, a1)[0])

        walk(new_game(GameSpec(K)))

        ordered = sorted(views, key=lambda k: (k.turn == K, k.turn, k.encode()))
        self.keys: list[InfoStateKey] = ordered
        self.index: dict[InfoStateKey, int] = {k: i for i, k in enumerate(ordered)}
        n = len(ordered)
        self.num_nodes = n
        self.num_decision = sum(1 for k in ordered if k.turn < K)
        self.turn = np.array([k.turn for k in ordered], dtype=np.int64)

        self.legal = np.zeros((self.num_decision, K), dtype=bool)
        for i in range(self.num_decision):
            used = set(ordered[i].actions)
            for r in range(1, K + 1):
                self.legal[i, r - 1] = r not in used
        self.num_legal = self.legal.sum(axis=1)

        # child[i, c, w + 1] -> node index, or ``n`` (a padding slot) when absent
        self.child = np.full((self.num_decision, K, 3), n, dtype=np.int64)
        self.parent = np.full(n, -1, dtype=np.int64)
        self.parent_col = np.full(n, -1, dtype=np.int64)
        for i, key in enumerate(ordered):
            if key.turn == 0:
                continue
            parent = self.index[InfoStateKey(key.actions[:-1], key.outcomes[:-1])]
            col = key.actions[-1] - 1
            self.child[parent, col, key.outcomes[-1] + 1] = i
            self.parent[i] = parent
            self.parent_col[i] = col
        self.decision_by_turn = [
            np.flatnonzero(self.turn[: self.num_decision] == t) for t in range(K)
        ]

        P = len(paths)
        self.num_paths = P
        self.node0 = np.empty((P, K), dtype=np.int64)
        self.node1 = np.empty((P, K), dtype=np.int64)
        self.col0 = np.empty((P, K), dtype=np.int64)
        self.col1 = np.empty((P, K), dtype=np.int64)
        self.term0 = np.empty(P, dtype=np.int64)
        self.term1 = np.empty(P, dtype=np.int64)
        self.returns = np.empty(P, dtype=np.float64)
        for p, state in enumerate(paths):
            acts0, acts1 = state.actions
            w = state.outcomes
            for t in range(K):
                self.node0[p, t] = self.index[InfoStateKey(acts0[:t], w[:t])]
                self.node1[p, t] = self.index[InfoStateKey(acts1[:t], tuple(-x for x in w[:t]))]
            self.col0[p] = np.asarray(acts0) - 1
            self.col1[p] = np.asarray(acts1) - 1
            self.term0[p] = self.index[infostate_key(state, 0)]
            self.term1[p] = self.index[infostate_key(state, 1)]
            self.returns[p] = terminal_return(state)

        self.encoded = [k.encode() for k in ordered]
        self.by_encoded = {s: i for i, s in enumerate(self.encoded)}

    def decision_keys(self) -> list[InfoStateKey]:
        return self.keys[: self.num_decision]

    def point_card(self, node: int) -> int:
        return self.num_cards - int(self.turn[node])


@functools.lru_cache(maxsize=None)
def infostate_table(num_cards: int) -> InfoStateTable:
    return InfoStateTable(num_cards)


def all_bid_orders(num_cards: int):
    """Every full bid sequence (a permutation of ``1..K``)."""
    return itertools.permutations(range(1, num_cards + 1))
