"""Strategy oracles: map a decision state to a distribution over actions."""

from __future__ import annotations

import numpy as np

from .games import State
from .nn import Network, NetworkSpec, ParamStore


def masked_distribution(probs: np.ndarray, legal: np.ndarray) -> np.ndarray:
    """Zero illegal entries and renormalise; uniform over legal if no mass left."""
    out = np.where(legal, probs, 0.0).astype(np.float64)
    total = out.sum(axis=-1, keepdims=True)
    uniform = legal / legal.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, out / np.where(total > 0, total, 1.0), uniform)


class Policy:
    """Base class.  Subclasses implement ``action_probabilities`` and may
    override ``batch_probabilities`` to evaluate many information sets at once."""

    def action_probabilities(self, state: State) -> np.ndarray:
        raise NotImplementedError

    def batch_probabilities(self, states: list[State]) -> np.ndarray:
        return np.stack([self.action_probabilities(s) for s in states])


class UniformPolicy(Policy):
    def action_probabilities(self, state):
        legal = state.legal_mask()
        return legal / legal.sum()


class TabularPolicy(Policy):
    """Explicit table keyed by ``state.info_key(player)``."""

    def __init__(self, table: dict | None = None, default: Policy | None = None):
        self.table = dict(table or {})
        self.default = default

    def action_probabilities(self, state):
        key = state.info_key(state.current_player)
        if key in self.table:
            return np.asarray(self.table[key], dtype=np.float64)
        if self.default is None:
            raise KeyError(f"no strategy stored for information set {key}")
        return self.default.action_probabilities(state)


class FixedPolicy(Policy):
    """The same mixed strategy at every decision (normal-form games)."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=np.float64)

    def action_probabilities(self, state):
        return masked_distribution(self.probs, state.legal_mask())


class NetworkPolicy(Policy):
    """Softmax network evaluated in inference mode, masked to legal actions.

    Results are memoised per information set; build a new instance (or call
    ``clear``) after the weights change.
    """

    def __init__(self, spec: NetworkSpec | Network, params: ParamStore):
        self.network = spec if isinstance(spec, Network) else Network(spec)
        self.params = params
        self._memo: dict = {}

    def clear(self):
        self._memo.clear()

    def action_probabilities(self, state):
        key = state.info_key(state.current_player)
        out = self._memo.get(key)
        if out is None:
            probs, _ = self.network.forward(self.params, state.observation(state.current_player))
            out = masked_distribution(probs, state.legal_mask())
            self._memo[key] = out
        return out

    def batch_probabilities(self, states):
        obs = np.stack([s.observation(s.current_player) for s in states])
        legal = np.stack([s.legal_mask() for s in states])
        return self.probabilities_from_arrays(obs, legal)

    def probabilities_from_arrays(self, obs: np.ndarray, legal: np.ndarray, chunk: int = 8192) -> np.ndarray:
        parts = []
        for i in range(0, len(obs), chunk):
            probs, _ = self.network.forward(self.params, obs[i : i + chunk])
            parts.append(masked_distribution(probs, legal[i : i + chunk]))
        return np.concatenate(parts) if parts else np.zeros((0, legal.shape[1]))
