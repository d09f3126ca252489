"""MC-NFSP: fictitious self-play with a tree-search best response.

Both players share a policy-value network B (used to guide the search) and an
average-policy network Pi.  Every move draws its policy source: with
probability eta the mover searches and plays from the visit counts, otherwise
it samples Pi.  All steps go to the RL memory with the final outcome; only
search steps go to the SL memory.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exploitability import exploitability
from .games import Game, GameError, sample_chance
from .mcts import NetworkEvaluator, OpponentPolicyEvaluator, SearchConfig, counts_to_policy, run_search, sample_action
from .memory import CircularBuffer, PolicyTarget, ReservoirBuffer
from .nn import LossKind, Network, make_optimizer, network_for
from .policies import NetworkPolicy, masked_distribution


@dataclass
class McNfspConfig:
    eta: float = 0.1
    update_every: int = 100
    batches_per_update: int = 8
    batch_size: int = 128
    rl_capacity: int = 4_000_000
    sl_capacity: int = 400_000
    rl_lr: float = 0.01
    sl_lr: float = 0.005
    optimizer: str = "adam"
    # plies played at temperature 1 before switching to the most visited move
    explore_plies: int = 6
    per_move_draw: bool = True
    mcts: SearchConfig = field(default_factory=SearchConfig)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        for name in ("update_every", "batches_per_update", "batch_size", "rl_capacity", "sl_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.explore_plies < 0:
            raise ValueError("explore_plies must be non-negative")
        if isinstance(self.mcts, dict):
            self.mcts = SearchConfig(**self.mcts)


class Step(NamedTuple):
    obs: np.ndarray
    policy: np.ndarray
    from_best_response: bool
    player: int


@dataclass
class EpisodeRecord:
    steps: list[Step]
    outcome: tuple[float, float]


class McNfspLearner:
    """Shared networks, memories and optimizers for MC-NFSP self-play."""

    def __init__(self, game: Game, cfg: McNfspConfig, rng: np.random.Generator):
        if not game.perfect_information:
            raise GameError(f"MC-NFSP searches the true state and needs a perfect-information game, got {game.name}")
        self.game = game
        self.cfg = cfg
        self.rng = rng
        self.br_net = Network(network_for(game, value_head=True))
        self.pi_net = Network(network_for(game))
        self.br_params = self.br_net.init_params(rng)
        self.pi_params = self.pi_net.init_params(rng)
        self.br_opt = make_optimizer(cfg.optimizer, cfg.rl_lr)
        self.pi_opt = make_optimizer(cfg.optimizer, cfg.sl_lr)
        self.rl_memory: CircularBuffer[PolicyTarget] = CircularBuffer(cfg.rl_capacity)
        self.sl_memory: ReservoirBuffer[PolicyTarget] = ReservoirBuffer(cfg.sl_capacity)
        self.episodes = 0
        self.last_losses: tuple[float, float] | None = None

    def average_policy(self) -> NetworkPolicy:
        return NetworkPolicy(self.pi_net, self.pi_params)

    def play_episode(self) -> EpisodeRecord:
        cfg, rng, game = self.cfg, self.rng, self.game
        evaluator = NetworkEvaluator(self.br_net, self.br_params)
        use_br = not cfg.per_move_draw and rng.random() < cfg.eta
        state = game.initial_state()
        steps: list[Step] = []
        ply = 0
        while not state.is_terminal():
            if state.is_chance():
                state = state.apply(sample_chance(state, rng))
                continue
            if cfg.per_move_draw:
                use_br = rng.random() < cfg.eta
            player = state.current_player
            obs = state.observation(player)
            legal = state.legal_mask()
            if use_br:
                if cfg.mcts.opponent_model == "average":
                    evaluator = OpponentPolicyEvaluator(
                        NetworkEvaluator(self.br_net, self.br_params), player, self.pi_net, self.pi_params
                    )
                root = run_search(state, evaluator, cfg.mcts)
                pi = counts_to_policy(root.action_counts(game.num_actions), 1.0)
                tau = cfg.mcts.temperature if ply < cfg.explore_plies else 0.0
                action = sample_action(pi, tau, rng)
            else:
                probs, _ = self.pi_net.forward(self.pi_params, obs)
                pi = masked_distribution(probs, legal)
                action = int(rng.choice(len(pi), p=pi))
            steps.append(Step(obs, pi, use_br, player))
            state = state.apply(action)
            ply += 1
        returns = state.returns()
        return EpisodeRecord(steps, (float(returns[0]), float(returns[1])))

    def store_episode(self, record: EpisodeRecord) -> None:
        store_episode(record, self.rl_memory, self.sl_memory, self.rng)

    def train_networks(self) -> tuple[float, float] | None:
        """Several minibatch steps per network; None while memories are short."""
        cfg = self.cfg
        if len(self.rl_memory) < cfg.batch_size or len(self.sl_memory) < cfg.batch_size:
            return None
        l1 = l2 = 0.0
        for _ in range(cfg.batches_per_update):
            batch = self.rl_memory.sample(cfg.batch_size, self.rng)
            loss, grads, _ = self.br_net.loss_and_gradients(
                self.br_params,
                LossKind.POLICY_VALUE,
                np.stack([b.obs for b in batch]),
                policy=np.stack([b.policy for b in batch]),
                outcome=np.array([b.outcome for b in batch]),
                train=True,
                rng=self.rng,
            )
            self.br_params = self.br_opt.step(self.br_params, grads)
            l1 += loss
            batch = self.sl_memory.sample(cfg.batch_size, self.rng)
            loss, grads, _ = self.pi_net.loss_and_gradients(
                self.pi_params,
                LossKind.CROSS_ENTROPY,
                np.stack([b.obs for b in batch]),
                policy=np.stack([b.policy for b in batch]),
                train=True,
                rng=self.rng,
            )
            self.pi_params = self.pi_opt.step(self.pi_params, grads)
            l2 += loss
        n = cfg.batches_per_update
        return l1 / n, l2 / n

    def run_episode(self) -> EpisodeRecord:
        record = self.play_episode()
        self.store_episode(record)
        self.episodes += 1
        if self.episodes % self.cfg.update_every == 0:
            out = self.train_networks()
            if out is not None:
                self.last_losses = out
        return record


def store_episode(record: EpisodeRecord, rl_memory, sl_memory, rng) -> None:
    """Every step goes to M_RL with the mover's outcome; search steps also to M_SL."""
    for step in record.steps:
        rl_memory.push(PolicyTarget(step.obs, step.policy, record.outcome[step.player]))
        if step.from_best_response:
            sl_memory.push(PolicyTarget(step.obs, step.policy), rng)


@dataclass
class McTraceRow:
    episode: int
    exploitability: float
    br_loss: float
    avg_loss: float
    wall_clock_s: float


def run_mc_nfsp(game: Game, cfg: McNfspConfig, episodes: int, eval_every: int, seed: int = 0,
                time_budget_s: float | None = None, on_row=None, learner: McNfspLearner | None = None):
    """Self-play for ``episodes`` episodes, logging exploitability of Pi.

    ``wall_clock_s`` counts training time only; evaluation is excluded.
    """
    learner = learner or McNfspLearner(game, cfg, np.random.default_rng(seed))
    trace: list[McTraceRow] = []
    clock = 0.0

    def log():
        eps = exploitability(game, learner.average_policy()).epsilon
        l1, l2 = learner.last_losses or (float("nan"), float("nan"))
        row = McTraceRow(learner.episodes, eps, l1, l2, clock)
        trace.append(row)
        if on_row:
            on_row(row)

    while learner.episodes < episodes and (time_budget_s is None or clock < time_budget_s):
        t0 = time.perf_counter()
        learner.run_episode()
        clock += time.perf_counter() - t0
        if learner.episodes % eval_every == 0:
            log()
    if not trace or trace[-1].episode != learner.episodes:
        log()
    return trace
