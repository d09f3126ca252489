"""Asynchronous NFSP: parallel actor-learners sharing Q, target and Pi networks.

Each worker plays whole episodes on its own game instance with both seats
driven by the shared networks.  Q gradients are accumulated locally and
applied to the shared parameters every ``async_every`` local episodes, along
with one supervised step of Pi on a minibatch of the shared SL reservoir.
There is no RL memory.

Shared parameters are immutable ``ParamStore`` objects that are replaced on
every update, so reading the current reference is a consistent snapshot.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .exploitability import exploitability
from .games import Game, sample_chance
from .memory import ReservoirBuffer, Transition
from .nfsp import q_targets, transitions_to_arrays
from .nn import SGD, LossKind, Network, ParamStore, network_for
from .policies import NetworkPolicy, masked_distribution

DEFAULT_EPS0 = (0.4, 0.6, 0.5, 0.7)


@dataclass
class AnfspConfig:
    workers: int = 4
    eps0: tuple[float, ...] = DEFAULT_EPS0
    async_every: int = 32
    target_every: int = 50_000
    sl_batch: int = 128
    gamma: float = 1.0
    eta: float = 0.1
    rl_lr: float = 0.01
    sl_lr: float = 0.005
    sl_capacity: int = 2_000_000
    # "mean" divides the accumulated Q gradient by the number of transitions
    q_reduction: str = "mean"

    def __post_init__(self):
        self.eps0 = tuple(float(e) for e in self.eps0)
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not self.eps0:
            raise ValueError("eps0 list is empty")
        for name in ("async_every", "target_every", "sl_batch", "sl_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.q_reduction not in ("mean", "sum"):
            raise ValueError("q_reduction must be 'mean' or 'sum'")


def assign_eps0(cfg: AnfspConfig, rng: np.random.Generator) -> list[float]:
    """One-to-one when the list has one rate per worker, else uniform draws."""
    if len(cfg.eps0) == cfg.workers:
        return [cfg.eps0[i] for i in rng.permutation(cfg.workers)]
    return [cfg.eps0[i] for i in rng.integers(len(cfg.eps0), size=cfg.workers)]


class GradientAccumulator:
    """Transitions waiting for their Q gradient, grouped by the parameter
    snapshot (Q and target) they were generated under.

    Each group is evaluated as one summed batch, which equals the sum of the
    per-transition gradients at that snapshot.
    """

    def __init__(self, net: Network, game: Game, gamma: float):
        self.net = net
        self.game = game
        self.gamma = gamma
        self._groups: list[tuple[ParamStore, ParamStore, list[Transition]]] = []
        self.steps = 0

    def add(self, q_params: ParamStore, target_params: ParamStore, transitions: list[Transition]) -> None:
        if not transitions:
            return
        if self._groups and self._groups[-1][0] is q_params and self._groups[-1][1] is target_params:
            self._groups[-1][2].extend(transitions)
        else:
            self._groups.append((q_params, target_params, list(transitions)))
        self.steps += len(transitions)

    def gradient(self) -> ParamStore | None:
        total = None
        for q_params, target_params, batch in self._groups:
            obs, actions, rewards, next_obs, next_legal, terminal = transitions_to_arrays(
                batch, self.game.observation_size, self.game.num_actions
            )
            y = q_targets(self.net, target_params, rewards, next_obs, next_legal, terminal, self.gamma)
            _, grads, _ = self.net.loss_and_gradients(
                q_params, LossKind.MSE_Q, obs, actions=actions, targets=y, reduction="sum"
            )
            total = grads if total is None else total.add(grads)
        return total

    def reset(self) -> None:
        self._groups = []
        self.steps = 0


@dataclass
class EvalSnapshot:
    T: int
    episodes: int
    pi_params: ParamStore
    wall_clock_s: float


class SharedState:
    """Shared parameters, global counters and the SL reservoir."""

    def __init__(self, game: Game, cfg: AnfspConfig, rng: np.random.Generator):
        self.game = game
        self.cfg = cfg
        self.q_net = Network(network_for(game, softmax_head=False))
        self.pi_net = Network(network_for(game))
        self.q_params = self.q_net.init_params(rng)
        self.target_params = self.q_params
        self.pi_params = self.pi_net.init_params(rng)
        self.sl_memory: ReservoirBuffer = ReservoirBuffer(cfg.sl_capacity)
        self.T = 0
        self.episodes = 0
        self.refreshes = 0
        self.q_updates = 0
        self.pi_updates = 0
        self.snapshots: list[EvalSnapshot] = []
        self.stop = False
        self._params = threading.Lock()
        self._counters = threading.Lock()
        self._sl = threading.Lock()
        self._q_opt = SGD(cfg.rl_lr)
        self._pi_opt = SGD(cfg.sl_lr)
        self._eval_every: int | None = None
        self._t0 = time.perf_counter()

    def snapshot(self) -> tuple[ParamStore, ParamStore, ParamStore]:
        with self._params:
            return self.q_params, self.target_params, self.pi_params

    def tick(self) -> int:
        """Count one action; refresh the target on multiples of target_every."""
        with self._counters:
            self.T += 1
            t = self.T
            if t % self.cfg.target_every == 0:
                with self._params:
                    self.target_params = self.q_params
                    self.refreshes += 1
        return t

    def episode_done(self) -> int:
        with self._counters:
            self.episodes += 1
            n = self.episodes
            if self._eval_every and n % self._eval_every == 0:
                self.snapshots.append(EvalSnapshot(self.T, n, self.pi_params, self.elapsed()))
        return n

    def elapsed(self) -> float:
        return time.perf_counter() - self._t0

    def push_sl(self, obs: np.ndarray, action: int, rng: np.random.Generator) -> None:
        with self._sl:
            self.sl_memory.push((obs, action), rng)

    def apply_q(self, grads: ParamStore | None, scale: float = 1.0) -> None:
        """theta_Q <- theta_Q - lr * scale * grads, under exclusive access."""
        if grads is None:
            return
        if scale != 1.0:
            grads = ParamStore({k: v * np.asarray(scale, dtype=v.dtype) for k, v in grads.items()})
        with self._params:
            self.q_params = self._q_opt.step(self.q_params, grads)
            self.q_updates += 1

    def update_pi(self, rng: np.random.Generator) -> float | None:
        """One cross-entropy SGD step on a shared-reservoir minibatch."""
        with self._sl:
            if len(self.sl_memory) < self.cfg.sl_batch:
                return None
            batch = self.sl_memory.sample(self.cfg.sl_batch, rng)
        obs = np.stack([o for o, _ in batch])
        onehot = np.eye(self.game.num_actions)[[a for _, a in batch]]
        with self._params:
            loss, grads, _ = self.pi_net.loss_and_gradients(
                self.pi_params, LossKind.CROSS_ENTROPY, obs, policy=onehot
            )
            self.pi_params = self._pi_opt.step(self.pi_params, grads)
            self.pi_updates += 1
        return loss


class Worker:
    """One actor-learner; plays both seats of its own game instance."""

    def __init__(self, wid: int, shared: SharedState, eps0: float, rng: np.random.Generator):
        self.wid = wid
        self.shared = shared
        self.game = shared.game
        self.cfg = shared.cfg
        self.eps0 = eps0
        self.rng = rng
        self.episodes = 0
        self.accumulator = GradientAccumulator(shared.q_net, shared.game, shared.cfg.gamma)
        self.last_sl_loss: float | None = None

    @property
    def epsilon(self) -> float:
        return self.eps0 / np.sqrt(1.0 + self.episodes)

    def play_episode(self) -> None:
        shared, rng, cfg = self.shared, self.rng, self.cfg
        q_params, target_params, pi_params = shared.snapshot()
        best_response = [rng.random() < cfg.eta for _ in range(2)]
        eps = self.epsilon
        pending: list[tuple[np.ndarray, int] | None] = [None, None]
        transitions: list[Transition] = []
        state = self.game.initial_state()
        while not state.is_terminal():
            if state.is_chance():
                state = state.apply(sample_chance(state, rng))
                continue
            p = state.current_player
            obs = state.observation(p)
            legal = state.legal_mask()
            if pending[p] is not None:
                transitions.append(Transition(*pending[p], 0.0, obs, legal, False))
            if best_response[p]:
                legal_ids = np.flatnonzero(legal)
                if rng.random() < eps:
                    action = int(legal_ids[rng.integers(len(legal_ids))])
                else:
                    q, _ = shared.q_net.forward(q_params, obs)
                    action = int(legal_ids[np.argmax(q[legal_ids])])
                shared.push_sl(obs, action, rng)
            else:
                probs, _ = shared.pi_net.forward(pi_params, obs)
                dist = masked_distribution(probs, legal)
                action = int(rng.choice(len(dist), p=dist))
            pending[p] = (obs, action)
            shared.tick()
            state = state.apply(action)
        returns = state.returns()
        for p in (0, 1):
            if pending[p] is not None:
                transitions.append(Transition(*pending[p], float(returns[p]), None, None, True))
        self.accumulator.add(q_params, target_params, transitions)
        self.episodes += 1
        shared.episode_done()
        if self.episodes % cfg.async_every == 0:
            self.async_apply()

    def async_apply(self) -> None:
        acc = self.accumulator
        if acc.steps:
            scale = 1.0 / acc.steps if self.cfg.q_reduction == "mean" else 1.0
            self.shared.apply_q(acc.gradient(), scale)
        acc.reset()
        loss = self.shared.update_pi(self.rng)
        if loss is not None:
            self.last_sl_loss = loss

    def run(self, should_stop) -> None:
        while not should_stop():
            self.play_episode()


@dataclass
class AnfspTraceRow:
    T: int
    episodes: int
    exploitability: float
    wall_clock_s: float
    worker_count: int


@dataclass
class AnfspResult:
    trace: list[AnfspTraceRow]
    shared: SharedState
    workers: list[Worker] = field(default_factory=list)


def _seed_streams(seed: int, workers: int):
    root = np.random.SeedSequence(seed)
    init, assign, *children = root.spawn(2 + workers)
    return np.random.default_rng(init), np.random.default_rng(assign), [np.random.default_rng(c) for c in children]


def _evaluate(shared: SharedState, workers: int) -> list[AnfspTraceRow]:
    rows = []
    for snap in shared.snapshots:
        eps = exploitability(shared.game, NetworkPolicy(shared.pi_net, snap.pi_params)).epsilon
        rows.append(AnfspTraceRow(snap.T, snap.episodes, eps, snap.wall_clock_s, workers))
    return rows


def run_anfsp(
    game: Game,
    cfg: AnfspConfig,
    max_T: int | None = None,
    eval_every: int = 1000,
    seed: int = 0,
    *,
    max_episodes: int | None = None,
    time_budget_s: float | None = None,
) -> AnfspResult:
    """Run ``cfg.workers`` threads until a budget is hit.

    ``eval_every`` counts global episodes; at each multiple the current Pi
    snapshot is frozen and evaluated exactly after the run, so evaluation
    never competes with the workers for the CPU.
    """
    if max_T is None and max_episodes is None and time_budget_s is None:
        raise ValueError("need at least one of max_T, max_episodes, time_budget_s")
    init_rng, assign_rng, rngs = _seed_streams(seed, cfg.workers)
    shared = SharedState(game, cfg, init_rng)
    shared._eval_every = eval_every
    eps0 = assign_eps0(cfg, assign_rng)
    workers = [Worker(i, shared, eps0[i], rngs[i]) for i in range(cfg.workers)]

    started = 0
    claim = threading.Lock()

    def should_stop():
        # claims the next episode slot, so the episode budget is never overshot
        nonlocal started
        with claim:
            if not shared.stop and (
                (max_T is not None and shared.T > max_T)
                or (max_episodes is not None and started >= max_episodes)
                or (time_budget_s is not None and shared.elapsed() >= time_budget_s)
            ):
                shared.stop = True
            if not shared.stop:
                started += 1
            return shared.stop

    shared._t0 = time.perf_counter()
    if cfg.workers == 1:
        workers[0].run(should_stop)
    else:
        threads = [threading.Thread(target=w.run, args=(should_stop,), name=f"anfsp-{w.wid}") for w in workers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    with shared._counters:
        if not shared.snapshots or shared.snapshots[-1].episodes != shared.episodes:
            shared.snapshots.append(EvalSnapshot(shared.T, shared.episodes, shared.pi_params, shared.elapsed()))
    return AnfspResult(_evaluate(shared, cfg.workers), shared, workers)


@dataclass
class SerialReference:
    q_params: ParamStore
    target_params: ParamStore
    pi_params: ParamStore
    T: int
    episodes: int
    sl_seen: int
    snapshots: list[tuple[int, int, ParamStore]]


def run_serial_reference(game: Game, cfg: AnfspConfig, episodes: int, seed: int = 0, eval_every: int = 1000):
    """Single-threaded restatement of the worker loop for one worker.

    No shared objects or locks: plain variables, one accumulation buffer per
    period that is split whenever the target network changes.
    """
    init_rng, assign_rng, rngs = _seed_streams(seed, 1)
    rng = rngs[0]
    q_net = Network(network_for(game, softmax_head=False))
    pi_net = Network(network_for(game))
    q = q_net.init_params(init_rng)
    target = q
    pi = pi_net.init_params(init_rng)
    eps0 = assign_eps0(AnfspConfig(**{**cfg.__dict__, "workers": 1}), assign_rng)[0]
    sl = ReservoirBuffer(cfg.sl_capacity)
    q_opt, pi_opt = SGD(cfg.rl_lr), SGD(cfg.sl_lr)
    T = 0
    segments: list[tuple[ParamStore, list[Transition]]] = []
    snapshots = []

    for ep in range(episodes):
        q_ep, target_ep, pi_ep = q, target, pi
        br = [rng.random() < cfg.eta for _ in range(2)]
        eps = eps0 / np.sqrt(1.0 + ep)
        last: dict[int, tuple] = {}
        out: list[Transition] = []
        state = game.initial_state()
        while not state.is_terminal():
            if state.is_chance():
                state = state.apply(sample_chance(state, rng))
                continue
            p = state.current_player
            obs, legal = state.observation(p), state.legal_mask()
            if p in last:
                out.append(Transition(*last[p], 0.0, obs, legal, False))
            if br[p]:
                ids = np.flatnonzero(legal)
                if rng.random() < eps:
                    a = int(ids[rng.integers(len(ids))])
                else:
                    a = int(ids[np.argmax(q_net.forward(q_ep, obs)[0][ids])])
                sl.push((obs, a), rng)
            else:
                dist = masked_distribution(pi_net.forward(pi_ep, obs)[0], legal)
                a = int(rng.choice(len(dist), p=dist))
            last[p] = (obs, a)
            T += 1
            if T % cfg.target_every == 0:
                target = q
            state = state.apply(a)
        r = state.returns()
        for p in (0, 1):
            if p in last:
                out.append(Transition(*last[p], float(r[p]), None, None, True))
        if out:
            if segments and segments[-1][0] is target_ep:
                segments[-1][1].extend(out)
            else:
                segments.append((target_ep, out))
        if (ep + 1) % eval_every == 0:
            snapshots.append((T, ep + 1, pi))
        if (ep + 1) % cfg.async_every == 0:
            n = sum(len(b) for _, b in segments)
            if n:
                total = None
                for tgt, batch in segments:
                    o, acts, rew, nxt, nl, term = transitions_to_arrays(batch, game.observation_size, game.num_actions)
                    y = q_targets(q_net, tgt, rew, nxt, nl, term, cfg.gamma)
                    _, g, _ = q_net.loss_and_gradients(q, LossKind.MSE_Q, o, actions=acts, targets=y, reduction="sum")
                    total = g if total is None else total.add(g)
                if cfg.q_reduction == "mean":
                    total = ParamStore({k: v * np.asarray(1.0 / n, dtype=v.dtype) for k, v in total.items()})
                q = q_opt.step(q, total)
            segments = []
            if len(sl) >= cfg.sl_batch:
                batch = sl.sample(cfg.sl_batch, rng)
                o = np.stack([x for x, _ in batch])
                onehot = np.eye(game.num_actions)[[a for _, a in batch]]
                _, g, _ = pi_net.loss_and_gradients(pi, LossKind.CROSS_ENTROPY, o, policy=onehot)
                pi = pi_opt.step(pi, g)
    if not snapshots or snapshots[-1][1] != episodes:
        snapshots.append((T, episodes, pi))
    return SerialReference(q, target, pi, T, episodes, sl.seen, snapshots)
