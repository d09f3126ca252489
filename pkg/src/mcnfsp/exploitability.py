"""Exact expected payoffs, best responses and exploitability.

Extensive-form games are flattened once into a DAG of distinct states
(``GameTree``).  Best responses maximise per information set, weighting each
state by the probability that the opponent and chance reach it; the passes are
vectorised by depth (forward) and height (backward).  Normal-form games use the
payoff matrix directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .games import CHANCE, TERMINAL, Game, State
from .games.normal_form import NormalFormGame
from .policies import NetworkPolicy, Policy, TabularPolicy


@dataclass(frozen=True)
class ExploitabilityReport:
    br_value_p0: float
    br_value_p1: float
    epsilon: float
    units: str = "utility"


class GameTree:
    """All distinct reachable states of a game with edge and infoset indices."""

    def __init__(self, game: Game):
        self.game = game
        A = game.num_actions
        root = game.initial_state()
        index: dict[State, int] = {root: 0}
        states = [root]
        dec_edges, chance_edges = [], []
        stack = [root]
        while stack:
            s = stack.pop()
            i = index[s]
            if s.is_terminal():
                continue
            outs = s.chance_outcomes() if s.is_chance() else [(a, None) for a in s.legal_actions()]
            for a, prob in outs:
                c = s.apply(a)
                j = index.get(c)
                if j is None:
                    j = index[c] = len(states)
                    states.append(c)
                    stack.append(c)
                if prob is None:
                    dec_edges.append((i, a, j))
                else:
                    chance_edges.append((i, j, prob))
        n = len(states)
        self.states = states
        self.player = np.array([s.current_player for s in states], dtype=np.int64)
        self.returns = np.zeros((n, 2))
        for i in np.flatnonzero(self.player == TERMINAL):
            self.returns[i] = states[i].returns()

        dec = np.array(dec_edges, dtype=np.int64).reshape(-1, 3)
        self.child = np.full((n, A), -1, dtype=np.int64)
        self.child[dec[:, 0], dec[:, 1]] = dec[:, 2]
        ch = np.array(chance_edges, dtype=np.float64).reshape(-1, 3)
        self.chance_parent = ch[:, 0].astype(np.int64)
        self.chance_child = ch[:, 1].astype(np.int64)
        self.chance_prob = ch[:, 2]

        # information sets
        keys: dict = {}
        self.infoset = np.full(n, -1, dtype=np.int64)
        rep = []
        for i in np.flatnonzero(self.player >= 0):
            k = states[i].info_key(int(self.player[i]))
            m = keys.get(k)
            if m is None:
                m = keys[k] = len(rep)
                rep.append(i)
            self.infoset[i] = m
        self.infoset_keys = list(keys)
        self.infoset_rep = np.array(rep, dtype=np.int64)
        self.infoset_player = self.player[self.infoset_rep]
        self.legal = self.child >= 0
        self.infoset_legal = self.legal[self.infoset_rep]

        # edge list (parent, child, action or -1 for chance)
        self.edge_parent = np.concatenate([dec[:, 0], self.chance_parent])
        self.edge_child = np.concatenate([dec[:, 2], self.chance_child])
        self.edge_action = np.concatenate([dec[:, 1], np.full(len(ch), -1, dtype=np.int64)])
        self._levels()

    def _levels(self):
        n = len(self.states)
        order = self._topological_order()
        depth = np.zeros(n, dtype=np.int64)
        children: list[list[int]] = [[] for _ in range(n)]
        for p, c in zip(self.edge_parent.tolist(), self.edge_child.tolist()):
            children[p].append(c)
        for i in order:
            for c in children[i]:
                if depth[c] < depth[i] + 1:
                    depth[c] = depth[i] + 1
        height = np.zeros(n, dtype=np.int64)
        for i in reversed(order):
            if children[i]:
                height[i] = 1 + max(height[c] for c in children[i])
        self.depth, self.height = depth, height
        dec_nodes = self.player >= 0
        h_min = np.full(len(self.infoset_rep), np.iinfo(np.int64).max)
        h_max = np.full(len(self.infoset_rep), -1)
        np.minimum.at(h_min, self.infoset[dec_nodes], height[dec_nodes])
        np.maximum.at(h_max, self.infoset[dec_nodes], height[dec_nodes])
        if np.any(h_min != h_max):
            raise ValueError("states sharing an information set must have equal height")

        d = depth[self.edge_parent]
        self._fwd_order = np.argsort(d, kind="stable")
        self._fwd_bounds = np.searchsorted(d[self._fwd_order], np.arange(d.max() + 2 if len(d) else 1))
        hp = height[self.edge_parent]
        self._bwd_order = np.argsort(hp, kind="stable")
        self._bwd_bounds = np.searchsorted(hp[self._bwd_order], np.arange(height.max() + 2))
        self._nodes_by_height = [np.flatnonzero(height == h) for h in range(height.max() + 1)]

    def _topological_order(self) -> list[int]:
        n = len(self.states)
        indeg = np.zeros(n, dtype=np.int64)
        np.add.at(indeg, self.edge_child, 1)
        children: list[list[int]] = [[] for _ in range(n)]
        for p, c in zip(self.edge_parent.tolist(), self.edge_child.tolist()):
            children[p].append(c)
        order, frontier = [], [0]
        indeg = indeg.tolist()
        while frontier:
            i = frontier.pop()
            order.append(i)
            for c in children[i]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    frontier.append(c)
        return order

    def __len__(self):
        return len(self.states)

    # -- policy tables -------------------------------------------------------

    def policy_table(self, profile) -> np.ndarray:
        """(num_infosets, num_actions) action probabilities under ``profile``."""
        p0, p1 = _as_profile(profile)
        table = np.zeros((len(self.infoset_rep), self.game.num_actions))
        for player, policy in ((0, p0), (1, p1)):
            rows = np.flatnonzero(self.infoset_player == player)
            if not len(rows):
                continue
            if isinstance(policy, NetworkPolicy):
                obs = np.stack([self.states[i].observation(player) for i in self.infoset_rep[rows]])
                table[rows] = policy.probabilities_from_arrays(obs, self.infoset_legal[rows])
            else:
                table[rows] = policy.batch_probabilities([self.states[i] for i in self.infoset_rep[rows]])
        return table

    # -- passes --------------------------------------------------------------

    def _edge_weights(self, table: np.ndarray, br_player: int | None) -> np.ndarray:
        n_dec = int((self.edge_action >= 0).sum())
        w = np.empty(len(self.edge_parent))
        par = self.edge_parent[:n_dec]
        w[:n_dec] = table[self.infoset[par], self.edge_action[:n_dec]]
        if br_player is not None:
            w[:n_dec] = np.where(self.player[par] == br_player, 1.0, w[:n_dec])
        w[n_dec:] = self.chance_prob
        return w

    def reach(self, table: np.ndarray, br_player: int) -> np.ndarray:
        """Probability of reaching each state from opponent and chance moves only."""
        w = self._edge_weights(table, br_player)
        reach = np.zeros(len(self.states))
        reach[0] = 1.0
        b = self._fwd_bounds
        for d in range(len(b) - 1):
            e = self._fwd_order[b[d] : b[d + 1]]
            if len(e):
                np.add.at(reach, self.edge_child[e], reach[self.edge_parent[e]] * w[e])
        return reach

    def expected_values(self, table: np.ndarray, player: int) -> np.ndarray:
        """Value of every state for ``player`` when both follow ``table``."""
        w = self._edge_weights(table, None)
        value = self.returns[:, player].copy()
        b = self._bwd_bounds
        for h in range(1, len(b) - 1):
            e = self._bwd_order[b[h] : b[h + 1]]
            np.add.at(value, self.edge_parent[e], w[e] * value[self.edge_child[e]])
        return value

    def best_response(self, table: np.ndarray, player: int):
        """Return (state values, best action per infoset of ``player``)."""
        w = self._edge_weights(table, player)
        reach = self.reach(table, player)
        value = self.returns[:, player].copy()
        n_sets = len(self.infoset_rep)
        best = np.full(n_sets, -1, dtype=np.int64)
        b = self._bwd_bounds
        for h in range(1, len(b) - 1):
            nodes = self._nodes_by_height[h]
            mine = nodes[self.player[nodes] == player]
            e = self._bwd_order[b[h] : b[h + 1]]
            e = e[self.player[self.edge_parent[e]] != player]
            np.add.at(value, self.edge_parent[e], w[e] * value[self.edge_child[e]])
            if not len(mine):
                continue
            legal = self.legal[mine]
            q = np.where(legal, value[np.where(legal, self.child[mine], 0)], 0.0)
            sets = self.infoset[mine]
            uniq, inv = np.unique(sets, return_inverse=True)
            mass = np.zeros(len(uniq))
            np.add.at(mass, inv, reach[mine])
            weight = np.where(mass[inv] > 0, reach[mine], 1.0)
            score = np.zeros((len(uniq), q.shape[1]))
            np.add.at(score, inv, weight[:, None] * q)
            score = np.where(self.infoset_legal[uniq], score, -np.inf)
            choice = np.argmax(score, axis=1)
            best[uniq] = choice
            value[mine] = q[np.arange(len(mine)), choice[inv]]
        return value, best


@lru_cache(maxsize=None)
def game_tree(game: Game) -> GameTree:
    return GameTree(game)


def _as_profile(profile) -> tuple[Policy, Policy]:
    if isinstance(profile, Policy):
        return profile, profile
    p0, p1 = profile
    return p0, p1


def _normal_form_strategies(game: NormalFormGame, profile):
    p0, p1 = _as_profile(profile)
    root = game.initial_state()
    x = np.asarray(p0.action_probabilities(root), dtype=np.float64)
    y = np.asarray(p1.action_probabilities(root.apply(0)), dtype=np.float64)
    return x, y


def expected_payoff(game: Game, profile, player: int) -> float:
    """Exact expected payoff of ``player`` when both follow ``profile``."""
    if game.normal_form:
        x, y = _normal_form_strategies(game, profile)
        u = float(x @ game.matrix @ y)
        return u if player == 0 else -u
    tree = game_tree(game)
    return float(tree.expected_values(tree.policy_table(profile), player)[0])


def best_response_value(game: Game, opponent: Policy, player: int) -> tuple[float, TabularPolicy]:
    """Exact best-response value of ``player`` against ``opponent`` and a pure
    best-response strategy (lowest action index among ties)."""
    tree = game_tree(game) if not game.normal_form else None
    if game.normal_form:
        profile = (opponent, opponent)
        x, y = _normal_form_strategies(game, profile)
        util = game.matrix @ y if player == 0 else -(game.matrix.T @ x)
        a = int(np.argmax(util))
        onehot = np.eye(game.num_actions)[a]
        return float(util[a]), TabularPolicy({(player,): onehot})
    table = tree.policy_table((opponent, opponent))
    value, best = tree.best_response(table, player)
    br = {}
    for m in np.flatnonzero(tree.infoset_player == player):
        br[tree.infoset_keys[m]] = np.eye(game.num_actions)[best[m]]
    return float(value[0]), TabularPolicy(br)


def exploitability(game: Game, profile) -> ExploitabilityReport:
    """Average of both players' best-response gains against ``profile``."""
    p0, p1 = _as_profile(profile)
    if game.normal_form:
        x, y = _normal_form_strategies(game, (p0, p1))
        v0 = float(np.max(game.matrix @ y))
        v1 = float(np.max(-(game.matrix.T @ x)))
    else:
        tree = game_tree(game)
        table = tree.policy_table((p0, p1))
        v0 = float(tree.best_response(table, 0)[0][0])
        v1 = float(tree.best_response(table, 1)[0][0])
    return ExploitabilityReport(v0, v1, (v0 + v1) / 2.0, game.payoff_units)
