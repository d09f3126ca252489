"""Neural fictitious self-play with an epsilon-greedy DQN best response."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .exploitability import exploitability
from .games import Game, sample_chance
from .memory import CircularBuffer, ReservoirBuffer, Transition
from .nn import LossKind, Network, make_optimizer, network_for
from .policies import NetworkPolicy, masked_distribution

BEST_RESPONSE = "best_response"
AVERAGE = "average"


@dataclass
class NfspConfig:
    eta: float = 0.1
    eps0: float = 0.06
    gamma: float = 1.0
    rl_lr: float = 0.01
    sl_lr: float = 0.005
    batch_size: int = 128
    train_every: int = 128
    target_refresh: int = 300
    rl_capacity: int = 200_000
    sl_capacity: int = 2_000_000
    optimizer: str = "sgd"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("batch_size", "train_every", "target_refresh", "rl_capacity", "sl_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


# Per-game settings.  The tiny normal-form games need a short RL memory and
# frequent updates so the DQN tracks the opponent's moving average.
NFSP_PRESETS: dict[str, dict] = {
    "matching_pennies": dict(
        eps0=0.06, train_every=2, batch_size=64, rl_capacity=300, sl_capacity=200_000,
        rl_lr=0.1, sl_lr=0.1, target_refresh=10,
    ),
    "rps": dict(
        eps0=0.06, train_every=2, batch_size=64, rl_capacity=300, sl_capacity=200_000,
        rl_lr=0.1, sl_lr=0.1, target_refresh=10,
    ),
    "leduc": dict(eps0=0.06),
    # same networks and optimizer as the MC-NFSP Othello learner
    "othello4": dict(
        eps0=0.6, batch_size=256, train_every=256, rl_capacity=4_000_000, sl_capacity=400_000,
        optimizer="adam",
    ),
}


def nfsp_config_for(game_name: str, **overrides) -> NfspConfig:
    return NfspConfig(**{**NFSP_PRESETS.get(game_name, {}), **overrides})


def epsilon_schedule(eps0: float, episodes: int) -> float:
    """Exploration rate after ``episodes`` completed episodes."""
    return eps0 / np.sqrt(1.0 + episodes)


def q_targets(net: Network, target_params, rewards, next_obs, next_legal, terminal, gamma) -> np.ndarray:
    """y = r for terminal transitions, else r + gamma * max over legal a' of Q'(s', a')."""
    y = np.asarray(rewards, dtype=np.float64).copy()
    live = ~np.asarray(terminal, dtype=bool)
    if gamma > 0 and live.any():
        q, _ = net.forward(target_params, next_obs[live])
        q = np.where(next_legal[live], q, -np.inf)
        y[live] += gamma * q.max(axis=1)
    return y


def transitions_to_arrays(batch: list[Transition], obs_size: int, num_actions: int):
    B = len(batch)
    obs = np.stack([t.obs for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.int64)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    terminal = np.array([t.terminal for t in batch], dtype=bool)
    next_obs = np.zeros((B, obs_size), dtype=obs.dtype)
    next_legal = np.zeros((B, num_actions), dtype=bool)
    for i, t in enumerate(batch):
        if not t.terminal:
            next_obs[i] = t.next_obs
            next_legal[i] = t.next_legal
    return obs, actions, rewards, next_obs, next_legal, terminal


class NfspAgent:
    def __init__(self, game: Game, cfg: NfspConfig, rng: np.random.Generator, *, q_spec=None, pi_spec=None):
        self.game = game
        self.cfg = cfg
        self.rng = rng
        self.q_net = Network(q_spec or network_for(game, softmax_head=False))
        self.pi_net = Network(pi_spec or network_for(game))
        self.q_params = self.q_net.init_params(rng)
        self.target_params = self.q_params
        self.pi_params = self.pi_net.init_params(rng)
        self.q_opt = make_optimizer(cfg.optimizer, cfg.rl_lr)
        self.pi_opt = make_optimizer(cfg.optimizer, cfg.sl_lr)
        self.rl_memory: CircularBuffer[Transition] = CircularBuffer(cfg.rl_capacity)
        self.sl_memory: ReservoirBuffer = ReservoirBuffer(cfg.sl_capacity)
        self.mode = AVERAGE
        self.episodes = 0
        self.actions = 0
        self.train_steps = 0
        self.last_losses: tuple[float, float] | None = None
        self._pending: tuple[np.ndarray, int] | None = None

    @property
    def epsilon(self) -> float:
        return epsilon_schedule(self.cfg.eps0, self.episodes)

    def begin_episode(self) -> str:
        self.mode = BEST_RESPONSE if self.rng.random() < self.cfg.eta else AVERAGE
        self._pending = None
        return self.mode

    def average_policy(self) -> NetworkPolicy:
        return NetworkPolicy(self.pi_net, self.pi_params)

    def act(self, obs: np.ndarray, legal: np.ndarray) -> int:
        if self._pending is not None:
            self._store(0.0, obs, legal, False)
        if self.mode == BEST_RESPONSE:
            legal_ids = np.flatnonzero(legal)
            if self.rng.random() < self.epsilon:
                action = int(legal_ids[self.rng.integers(len(legal_ids))])
            else:
                q, _ = self.q_net.forward(self.q_params, obs)
                action = int(legal_ids[np.argmax(q[legal_ids])])
            self.sl_memory.push((obs, action), self.rng)
        else:
            probs, _ = self.pi_net.forward(self.pi_params, obs)
            p = masked_distribution(probs, legal)
            action = int(self.rng.choice(len(p), p=p))
        self._pending = (obs, action)
        self.actions += 1
        if self.actions % self.cfg.train_every == 0:
            out = self.train_step()
            if out is not None:
                self.last_losses = out
        return action

    def end_episode(self, reward: float) -> None:
        if self._pending is not None:
            self._store(reward, None, None, True)
        self.episodes += 1

    def _store(self, reward, next_obs, next_legal, terminal):
        obs, action = self._pending
        self.rl_memory.push(Transition(obs, action, reward, next_obs, next_legal, terminal))
        self._pending = None

    def train_step(self) -> tuple[float, float] | None:
        """One Q step and one average-policy step; None when memories are short."""
        cfg = self.cfg
        if len(self.rl_memory) < cfg.batch_size or len(self.sl_memory) < cfg.batch_size:
            return None
        batch = self.rl_memory.sample(cfg.batch_size, self.rng)
        obs, actions, rewards, next_obs, next_legal, terminal = transitions_to_arrays(
            batch, self.game.observation_size, self.game.num_actions
        )
        y = q_targets(self.q_net, self.target_params, rewards, next_obs, next_legal, terminal, cfg.gamma)
        rl_loss, grads, _ = self.q_net.loss_and_gradients(
            self.q_params, LossKind.MSE_Q, obs, actions=actions, targets=y, train=True, rng=self.rng
        )
        self.q_params = self.q_opt.step(self.q_params, grads)

        sl = self.sl_memory.sample(cfg.batch_size, self.rng)
        sl_obs = np.stack([o for o, _ in sl])
        onehot = np.eye(self.game.num_actions)[[a for _, a in sl]]
        sl_loss, grads, _ = self.pi_net.loss_and_gradients(
            self.pi_params, LossKind.CROSS_ENTROPY, sl_obs, policy=onehot, train=True, rng=self.rng
        )
        self.pi_params = self.pi_opt.step(self.pi_params, grads)

        self.train_steps += 1
        if self.train_steps % cfg.target_refresh == 0:
            self.target_params = self.q_params
        return rl_loss, sl_loss


def play_episode(game: Game, agents: list[NfspAgent], rng: np.random.Generator) -> tuple[float, float]:
    """Self-play one episode between two agents; rewards arrive only at the end."""
    for agent in agents:
        agent.begin_episode()
    state = game.initial_state()
    while not state.is_terminal():
        if state.is_chance():
            state = state.apply(sample_chance(state, rng))
            continue
        p = state.current_player
        a = agents[p].act(state.observation(p), state.legal_mask())
        state = state.apply(a)
    returns = state.returns()
    for p, agent in enumerate(agents):
        agent.end_episode(returns[p])
    return returns


@dataclass
class TraceRow:
    episode: int
    steps: int
    exploitability: float
    rl_loss: float
    sl_loss: float
    wall_clock_s: float


class NfspRunner:
    """Two NFSP agents in self-play with periodic exact evaluation."""

    def __init__(self, game: Game, cfg: NfspConfig, seed: int):
        self.game = game
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.agents = [NfspAgent(game, cfg, self.rng), NfspAgent(game, cfg, self.rng)]
        self.episodes = 0
        self.train_time = 0.0

    def profile(self):
        return (self.agents[0].average_policy(), self.agents[1].average_policy())

    def evaluate(self) -> TraceRow:
        eps = exploitability(self.game, self.profile()).epsilon
        losses = [a.last_losses for a in self.agents if a.last_losses is not None]
        rl = float(np.mean([l[0] for l in losses])) if losses else float("nan")
        sl = float(np.mean([l[1] for l in losses])) if losses else float("nan")
        steps = sum(a.actions for a in self.agents)
        return TraceRow(self.episodes, steps, eps, rl, sl, self.train_time)

    def run(self, episodes: int | None = None, eval_every: int = 1000, time_budget_s: float | None = None, on_row=None):
        """Train until ``episodes`` or ``time_budget_s`` of training time is used.

        Evaluation time is excluded from the budget and from ``wall_clock_s``.
        """
        trace = []
        while (episodes is None or self.episodes < episodes) and (
            time_budget_s is None or self.train_time < time_budget_s
        ):
            t0 = time.perf_counter()
            play_episode(self.game, self.agents, self.rng)
            self.train_time += time.perf_counter() - t0
            self.episodes += 1
            if self.episodes % eval_every == 0:
                row = self.evaluate()
                trace.append(row)
                if on_row:
                    on_row(row)
        if not trace or trace[-1].episode != self.episodes:
            row = self.evaluate()
            trace.append(row)
            if on_row:
                on_row(row)
        return trace


def run_nfsp(game: Game, cfg: NfspConfig, episodes: int, eval_every: int, seed: int = 0):
    return NfspRunner(game, cfg, seed).run(episodes, eval_every)
