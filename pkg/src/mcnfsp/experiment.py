"""Experiment plumbing: config files, runs on disk, comparisons.

A config file is plain ``key = value`` text with sections::

    [run]           game, algo, seed (optional; command-line flags override)
    [experiment]    iterations, episodes, max_T, eval_every, checkpoint_every, time_budget_s
    [nfsp] / [mcnfsp] / [mcts] / [anfsp]   fields of the algorithm's config

Values are Python literals.  Unknown sections and keys are errors.  Every run
writes ``manifest.ini`` in the same format with everything resolved, so a run
can be repeated from its manifest alone.
"""

from __future__ import annotations

import ast
import configparser
import csv
import dataclasses
import io
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .anfsp import AnfspConfig, run_anfsp
from .exploitability import ExploitabilityReport, exploitability
from .fictitious_play import run_fp
from .games import GAME_NAMES, load_game
from .mc_nfsp import McNfspConfig, McNfspLearner, run_mc_nfsp
from .mcts import SearchConfig
from .nfsp import NfspConfig, NfspRunner, nfsp_config_for
from .nn import load as load_checkpoint
from .nn import save as save_checkpoint
from .policies import NetworkPolicy

ALGOS = ("fp", "nfsp", "mcnfsp", "anfsp")
MAX_WORKERS_ENV = "MCNFSP_MAX_WORKERS"
CSV_COLUMNS = (
    "step", "episodes", "T", "exploitability", "br_loss", "avg_loss", "wall_clock_s", "seed", "worker_count",
)


class ConfigError(ValueError):
    pass


@dataclass
class Budget:
    iterations: int = 200
    episodes: int | None = None
    max_T: int | None = None
    eval_every: int = 1000
    checkpoint_every: int | None = None
    time_budget_s: float | None = None


@dataclass
class ExperimentConfig:
    game: str
    algo: str
    seed: int = 0
    budget: Budget = field(default_factory=Budget)
    algo_config: object = None

    def __post_init__(self):
        if self.game not in GAME_NAMES:
            raise ConfigError(f"unknown game {self.game!r}; choose from {', '.join(GAME_NAMES)}")
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algorithm {self.algo!r}; choose from {', '.join(ALGOS)}")
        if self.algo == "fp" and not load_game(self.game).normal_form:
            raise ConfigError("fp runs on normal-form games only")
        if self.algo == "mcnfsp" and not load_game(self.game).perfect_information:
            raise ConfigError("mcnfsp needs a perfect-information game")
        if self.algo_config is None:
            self.algo_config = default_algo_config(self.game, self.algo)


def default_algo_config(game: str, algo: str):
    if algo == "nfsp":
        return nfsp_config_for(game)
    if algo == "mcnfsp":
        return McNfspConfig()
    if algo == "anfsp":
        return AnfspConfig()
    return None


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _check_keys(section: str, values: dict, cls) -> None:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def parse_config(text: str, *, game: str | None = None, algo: str | None = None, seed: int | None = None,
                 time_budget_s: float | None = None) -> ExperimentConfig:
    """Build a validated config; explicit arguments override the [run] section."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    sections = {s: {k: _literal(v) for k, v in parser.items(s)} for s in parser.sections()}
    run = sections.pop("run", {})
    unknown = sorted(set(run) - {"game", "algo", "seed"})
    if unknown:
        raise ConfigError(f"unknown key(s) in [run]: {', '.join(unknown)}")
    game = game or run.get("game")
    algo = algo or run.get("algo")
    if game is None or algo is None:
        raise ConfigError("game and algo must be given on the command line or in [run]")
    seed = int(seed if seed is not None else run.get("seed", 0))

    budget_values = sections.pop("experiment", {})
    _check_keys("experiment", budget_values, Budget)
    budget = Budget(**budget_values)
    if time_budget_s is not None:
        budget.time_budget_s = float(time_budget_s)

    allowed = {"nfsp": {"nfsp"}, "mcnfsp": {"mcnfsp", "mcts"}, "anfsp": {"anfsp"}, "fp": set()}.get(algo)
    if allowed is None:
        raise ConfigError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGOS)}")
    extra = sorted(set(sections) - allowed)
    if extra:
        raise ConfigError(f"section(s) not used by {algo}: {', '.join(extra)}")

    algo_config = None
    try:
        if algo == "nfsp":
            values = sections.get("nfsp", {})
            _check_keys("nfsp", values, NfspConfig)
            algo_config = nfsp_config_for(game, **values)
        elif algo == "mcnfsp":
            values = sections.get("mcnfsp", {})
            _check_keys("mcnfsp", values, McNfspConfig)
            values.pop("mcts", None)
            search = sections.get("mcts", {})
            _check_keys("mcts", search, SearchConfig)
            algo_config = McNfspConfig(**values, mcts=SearchConfig(**search))
        elif algo == "anfsp":
            values = sections.get("anfsp", {})
            _check_keys("anfsp", values, AnfspConfig)
            algo_config = AnfspConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(game, algo, seed, budget, algo_config)


def render_manifest(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["run"] = {"game": repr(cfg.game), "algo": repr(cfg.algo), "seed": repr(cfg.seed)}
    parser["experiment"] = {k: repr(v) for k, v in dataclasses.asdict(cfg.budget).items()}
    if cfg.algo_config is not None:
        values = {f.name: getattr(cfg.algo_config, f.name) for f in dataclasses.fields(cfg.algo_config)}
        search = values.pop("mcts", None)
        parser[cfg.algo] = {k: repr(v) for k, v in values.items()}
        if search is not None:
            parser["mcts"] = {k: repr(v) for k, v in dataclasses.asdict(search).items()}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def worker_cap() -> int | None:
    raw = os.environ.get(MAX_WORKERS_ENV)
    if not raw:
        return None
    cap = int(raw)
    if cap < 1:
        raise ConfigError(f"{MAX_WORKERS_ENV} must be a positive integer")
    return cap


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if np.isnan(v) else repr(v)
    return str(v)


class MetricWriter:
    """Append-only CSV with a fixed header, flushed after every row."""

    def __init__(self, path: Path, seed: int):
        self.seed = seed
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(CSV_COLUMNS)
        self._fh.flush()
        self.rows = 0

    def write(self, **values) -> None:
        values.setdefault("seed", self.seed)
        self._csv.writerow([_fmt(values.get(c)) for c in CSV_COLUMNS])
        self._fh.flush()
        self.rows += 1

    def close(self) -> None:
        self._fh.close()


def run(cfg: ExperimentConfig, out_dir) -> Path:
    """Execute one experiment, writing ``metrics.csv``, ``manifest.ini`` and
    ``checkpoints/`` under ``out_dir``."""
    cap = worker_cap() if cfg.algo == "anfsp" else None
    if cap is not None and cfg.algo_config.workers > cap:
        cfg = dataclasses.replace(cfg, algo_config=dataclasses.replace(cfg.algo_config, workers=cap))
    out = Path(out_dir)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    (out / "manifest.ini").write_text(render_manifest(cfg), encoding="utf-8")
    game = load_game(cfg.game)
    budget = cfg.budget
    writer = MetricWriter(out / "metrics.csv", cfg.seed)
    try:
        if cfg.algo == "fp":
            t0 = time.perf_counter()
            for row in run_fp(game, budget.iterations):
                writer.write(step=row.iteration, exploitability=row.exploitability,
                             wall_clock_s=time.perf_counter() - t0)
        elif cfg.algo == "nfsp":
            _run_nfsp(cfg, game, writer, ckpt_dir)
        elif cfg.algo == "mcnfsp":
            _run_mcnfsp(cfg, game, writer, ckpt_dir)
        else:
            _run_anfsp(cfg, game, writer, ckpt_dir)
    finally:
        writer.close()
    return out


def _checkpoint_due(budget: Budget, step: int) -> bool:
    return bool(budget.checkpoint_every) and step % budget.checkpoint_every == 0


def _run_nfsp(cfg, game, writer, ckpt_dir):
    budget = cfg.budget
    runner = NfspRunner(game, cfg.algo_config, cfg.seed)
    episodes = budget.episodes if budget.episodes is not None or budget.time_budget_s else 20_000

    def save(tag):
        for p, agent in enumerate(runner.agents):
            save_checkpoint(ckpt_dir / f"pi_p{p}{tag}.ckpt", agent.pi_params, agent.pi_net.spec)
            save_checkpoint(ckpt_dir / f"q_p{p}{tag}.ckpt", agent.q_params, agent.q_net.spec)

    def on_row(row):
        writer.write(step=row.episode, episodes=row.episode, T=row.steps, exploitability=row.exploitability,
                     br_loss=row.rl_loss, avg_loss=row.sl_loss, wall_clock_s=row.wall_clock_s)
        if _checkpoint_due(budget, row.episode):
            save(f"_{row.episode:08d}")

    runner.run(episodes, budget.eval_every, budget.time_budget_s, on_row)
    save("")


def _run_mcnfsp(cfg, game, writer, ckpt_dir):
    budget = cfg.budget
    learner = McNfspLearner(game, cfg.algo_config, np.random.default_rng(cfg.seed))
    episodes = budget.episodes if budget.episodes is not None or budget.time_budget_s else 5_000

    def save(tag):
        save_checkpoint(ckpt_dir / f"pi{tag}.ckpt", learner.pi_params, learner.pi_net.spec)
        save_checkpoint(ckpt_dir / f"br{tag}.ckpt", learner.br_params, learner.br_net.spec)

    def on_row(row):
        writer.write(step=row.episode, episodes=row.episode, exploitability=row.exploitability,
                     br_loss=row.br_loss, avg_loss=row.avg_loss, wall_clock_s=row.wall_clock_s)
        if _checkpoint_due(budget, row.episode):
            save(f"_{row.episode:08d}")

    run_mc_nfsp(game, cfg.algo_config, episodes if episodes is not None else 2**62, budget.eval_every,
                cfg.seed, budget.time_budget_s, on_row, learner)
    save("")


def _run_anfsp(cfg, game, writer, ckpt_dir):
    budget = cfg.budget
    acfg = cfg.algo_config
    episodes = budget.episodes
    if episodes is None and budget.max_T is None and budget.time_budget_s is None:
        episodes = 20_000
    result = run_anfsp(game, acfg, budget.max_T, budget.eval_every, cfg.seed,
                       max_episodes=episodes, time_budget_s=budget.time_budget_s)
    for row in result.trace:
        writer.write(step=row.episodes, episodes=row.episodes, T=row.T, exploitability=row.exploitability,
                     wall_clock_s=row.wall_clock_s, worker_count=row.worker_count)
    shared = result.shared
    for snap in shared.snapshots:
        if _checkpoint_due(budget, snap.episodes):
            save_checkpoint(ckpt_dir / f"pi_{snap.episodes:08d}.ckpt", snap.pi_params, shared.pi_net.spec)
    save_checkpoint(ckpt_dir / "pi.ckpt", shared.pi_params, shared.pi_net.spec)
    save_checkpoint(ckpt_dir / "q.ckpt", shared.q_params, shared.q_net.spec)


def evaluate_checkpoints(game_name: str, paths) -> ExploitabilityReport:
    """Exploitability of one shared policy checkpoint or one per player."""
    if not 1 <= len(paths) <= 2:
        raise ConfigError("give one shared checkpoint or one per player")
    game = load_game(game_name)
    policies = []
    for path in paths:
        params, spec = load_checkpoint(path)
        if not spec.softmax_policy:
            raise ConfigError(f"{path} holds a Q network, not a policy")
        if spec.input_size != game.observation_size or spec.num_outputs != game.num_actions:
            raise ConfigError(f"{path} does not match the {game_name} encoding")
        policies.append(NetworkPolicy(spec, params))
    profile = policies[0] if len(policies) == 1 else tuple(policies)
    return exploitability(game, profile)


# -- comparisons ---------------------------------------------------------------


@dataclass
class RunRecord:
    path: Path
    game: str
    algo: str
    seed: int
    steps: list[int]
    exploitability: list[float]

    @property
    def label(self) -> str:
        return f"{self.algo}:{self.seed}"

    @property
    def final(self) -> float:
        return self.exploitability[-1]


@dataclass
class AlgoSummary:
    algo: str
    runs: int
    mean_final: float
    var_final: float


@dataclass
class Comparison:
    game: str
    runs: list[RunRecord]
    steps: list[int]
    table: list[list[float]]  # rows follow ``steps``, columns follow ``runs``
    summary: list[AlgoSummary]

    def render(self) -> str:
        labels = [r.label for r in self.runs]
        lines = ["step\t" + "\t".join(labels)]
        for step, row in zip(self.steps, self.table):
            lines.append(f"{step}\t" + "\t".join("" if np.isnan(v) else f"{v:.6f}" for v in row))
        lines.append("")
        lines.append("algo\truns\tmean_final\tvar_final")
        for s in self.summary:
            lines.append(f"{s.algo}\t{s.runs}\t{s.mean_final:.6f}\t{s.var_final:.6g}")
        return "\n".join(lines)


def read_run(path) -> RunRecord:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path / "manifest.ini"):
        raise ConfigError(f"{path} has no manifest.ini")
    run_section = {k: _literal(v) for k, v in parser.items("run")}
    steps, eps = [], []
    with open(path / "metrics.csv", newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            eps.append(float(row["exploitability"]))
    if not steps:
        raise ConfigError(f"{path} has no metric rows")
    return RunRecord(path, run_section["game"], run_section["algo"], int(run_section["seed"]), steps, eps)


def compare(paths) -> Comparison:
    """Align runs on their logged steps and summarise final exploitability."""
    runs = [read_run(p) for p in paths]
    if len(runs) < 2:
        raise ConfigError("compare needs at least two runs")
    games = {r.game for r in runs}
    if len(games) > 1:
        raise ConfigError(f"runs are on different games: {', '.join(sorted(games))}")
    steps = sorted({s for r in runs for s in r.steps})
    lookup = [dict(zip(r.steps, r.exploitability)) for r in runs]
    table = [[m.get(s, float("nan")) for m in lookup] for s in steps]
    summary = []
    for algo in dict.fromkeys(r.algo for r in runs):
        finals = np.array([r.final for r in runs if r.algo == algo])
        var = float(np.var(finals, ddof=1)) if len(finals) > 1 else float("nan")
        summary.append(AlgoSummary(algo, len(finals), float(finals.mean()), var))
    return Comparison(games.pop(), runs, steps, table, summary)
