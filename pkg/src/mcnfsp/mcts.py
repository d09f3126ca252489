"""PUCT tree search guided by a policy-value evaluator.

Edge statistics are stored from the point of view of the player to move at the
node, so a leaf value is credited to each edge as ``values[node.player]``; in
alternating two-player games this is the usual sign flip per ply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .games import GameError, State
from .nn import Network, ParamStore
from .policies import masked_distribution


@dataclass(frozen=True)
class SearchConfig:
    c_puct: float = 1.5
    simulations: int = 64
    temperature: float = 1.0
    # priors at the opponent's nodes: "self" reuses the searcher's network,
    # "average" takes them from the opponent's average-policy network
    opponent_model: str = "self"

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be at least 1")
        if self.c_puct < 0 or self.temperature < 0:
            raise ValueError("c_puct and temperature must be non-negative")
        if self.opponent_model not in ("self", "average"):
            raise ValueError("opponent_model must be 'self' or 'average'")


class UniformEvaluator:
    """Uniform priors over legal actions and a neutral value."""

    def __call__(self, state: State):
        legal = state.legal_mask()
        return legal / legal.sum(), 0.0


class NetworkEvaluator:
    """Policy and value heads of a best-response network, inference mode."""

    def __init__(self, network: Network, params: ParamStore):
        if network.spec.value_head is None:
            raise ValueError("search needs a network with a value head")
        self.network = network
        self.params = params

    def __call__(self, state: State):
        probs, value = self.network.forward(self.params, state.observation(state.current_player))
        return probs, float(value)


class OpponentPolicyEvaluator:
    """Wraps an evaluator so that nodes where the opponent of ``player`` moves
    take their priors from a separate policy network; values are unchanged."""

    def __init__(self, evaluator, player: int, network: Network, params: ParamStore):
        self.evaluator = evaluator
        self.player = player
        self.network = network
        self.params = params

    def __call__(self, state: State):
        priors, value = self.evaluator(state)
        if state.current_player != self.player:
            probs, _ = self.network.forward(self.params, state.observation(state.current_player))
            priors = masked_distribution(probs, state.legal_mask())
        return priors, value


class Node:
    __slots__ = ("state", "player", "actions", "priors", "counts", "q", "children", "terminal_values")

    def __init__(self, state: State):
        self.state = state
        self.player = state.current_player
        self.actions: list[int] = []
        self.priors: list[float] = []
        self.counts: list[int] = []
        self.q: list[float] = []
        self.children: list[Node | None] = []
        self.terminal_values = state.returns() if state.is_terminal() else None

    @property
    def expanded(self) -> bool:
        return bool(self.actions)

    @property
    def visits(self) -> int:
        return sum(self.counts)

    def action_counts(self, num_actions: int) -> np.ndarray:
        out = np.zeros(num_actions)
        out[self.actions] = self.counts
        return out


def select_action_ucb(node: Node, c_puct: float) -> int:
    """Index into ``node.actions`` maximising Q + c * P * sqrt(N(s)) / (1 + N(s, a)).

    N(s) is the sum of the edge counts, floored at 1 so the priors steer the
    very first selection.  Ties go to the lowest action id.
    """
    if not node.actions:
        raise GameError("selection at a node without legal actions")
    sqrt_n = math.sqrt(max(1, sum(node.counts)))
    best, best_u = 0, -math.inf
    for i, (p, n, q) in enumerate(zip(node.priors, node.counts, node.q)):
        u = q + c_puct * p * sqrt_n / (1 + n)
        if u > best_u:
            best, best_u = i, u
    return best


def expand_and_evaluate(node: Node, evaluator) -> tuple[float, float]:
    """Expand a leaf and return its value for each player."""
    if node.terminal_values is not None:
        return node.terminal_values
    legal = node.state.legal_actions()
    priors, value = evaluator(node.state)
    mask = np.zeros(len(priors), dtype=bool)
    mask[legal] = True
    p = masked_distribution(np.asarray(priors), mask)
    node.actions = legal
    node.priors = [float(p[a]) for a in legal]
    node.counts = [0] * len(legal)
    node.q = [0.0] * len(legal)
    node.children = [None] * len(legal)
    return (value, -value) if node.player == 0 else (-value, value)


def backup(path: list[tuple[Node, int]], values) -> None:
    """Incremental-mean update of every edge on the path."""
    for node, i in path:
        n = node.counts[i]
        node.q[i] = (n * node.q[i] + values[node.player]) / (n + 1)
        node.counts[i] = n + 1


def run_search(root_state: State, evaluator, cfg: SearchConfig) -> Node:
    if root_state.is_terminal() or root_state.is_chance():
        raise GameError("search needs a decision node at the root")
    root = Node(root_state)
    expand_and_evaluate(root, evaluator)
    for _ in range(cfg.simulations):
        node, path = root, []
        while True:
            i = select_action_ucb(node, cfg.c_puct)
            path.append((node, i))
            child = node.children[i]
            if child is None:
                child = node.children[i] = Node(node.state.apply(node.actions[i]))
                values = expand_and_evaluate(child, evaluator)
                break
            if child.terminal_values is not None:
                values = child.terminal_values
                break
            node = child
        backup(path, values)
    return root


def counts_to_policy(counts: np.ndarray, temperature: float) -> np.ndarray:
    if temperature == 0:
        out = np.zeros_like(counts, dtype=np.float64)
        out[int(np.argmax(counts))] = 1.0
        return out
    powered = counts.astype(np.float64) ** (1.0 / temperature)
    return powered / powered.sum()


def search(root_state: State, evaluator, cfg: SearchConfig) -> np.ndarray:
    """Improved policy: root visit counts normalised (one-hot argmax when the
    temperature is 0)."""
    root = run_search(root_state, evaluator, cfg)
    return counts_to_policy(root.action_counts(root_state.game.num_actions), cfg.temperature)


def sample_action(pi: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    if temperature == 0:
        return int(np.argmax(pi))
    p = counts_to_policy(np.asarray(pi), temperature) if temperature != 1 else np.asarray(pi, dtype=np.float64)
    return int(rng.choice(len(p), p=p / p.sum()))
