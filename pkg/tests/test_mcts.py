import numpy as np
import pytest

from mcnfsp.games import GameError, load_game
from mcnfsp.mcts import (
    NetworkEvaluator,
    Node,
    OpponentPolicyEvaluator,
    SearchConfig,
    UniformEvaluator,
    backup,
    counts_to_policy,
    expand_and_evaluate,
    run_search,
    sample_action,
    search,
    select_action_ucb,
)
from mcnfsp.nn import Network, network_for
from oracles import optimal_moves

othello = load_game("othello4")


def test_first_selection_follows_priors():
    node = Node(othello.initial_state())
    expand_and_evaluate(node, lambda s: (np.eye(17)[11] * 0.7 + 0.3 / 17, 0.0))
    assert node.actions[select_action_ucb(node, 1.5)] == 11


def test_puct_formula_on_hand_values():
    node = Node(othello.initial_state())
    expand_and_evaluate(node, UniformEvaluator())
    node.counts = [3, 1, 0, 0]
    node.q = [0.5, -0.2, 0.0, 0.0]
    # U = Q + 1.5 * 0.25 * sqrt(4) / (1 + N)
    u = [0.5 + 0.75 / 4, -0.2 + 0.75 / 2, 0.75, 0.75]
    assert select_action_ucb(node, 1.5) == int(np.argmax(u)) == 2


def test_backup_is_incremental_mean_from_mover_view():
    root = Node(othello.initial_state())
    expand_and_evaluate(root, UniformEvaluator())
    for v in (1.0, -1.0, 1.0):
        backup([(root, 0)], (v, -v))
    assert root.counts[0] == 3 and root.q[0] == pytest.approx(1 / 3)


def test_root_visits_equal_simulations():
    cfg = SearchConfig(simulations=50)
    root = run_search(othello.initial_state(), UniformEvaluator(), cfg)
    assert root.visits == 50


def test_search_policy_is_distribution_over_legal_moves():
    pi = search(othello.initial_state(), UniformEvaluator(), SearchConfig(simulations=40))
    assert np.isclose(pi.sum(), 1.0)
    assert set(np.flatnonzero(pi)) <= set(othello.initial_state().legal_actions())


def test_search_is_deterministic():
    a = search(othello.initial_state(), UniformEvaluator(), SearchConfig(simulations=30))
    b = search(othello.initial_state(), UniformEvaluator(), SearchConfig(simulations=30))
    assert np.array_equal(a, b)


def test_search_finds_immediate_win():
    # black to move: playing 3 fills the board with all black discs
    s = othello.state_from_board("XXO." "XXXX" "XXXX" "XXXX", to_move=0)
    pi = search(s, UniformEvaluator(), SearchConfig(simulations=20, temperature=0))
    assert int(np.argmax(pi)) == 3 and 3 in optimal_moves(s)


def test_temperature_zero_is_argmax():
    counts = np.array([1, 5, 3, 0])
    assert np.array_equal(counts_to_policy(counts, 0), [0, 1, 0, 0])
    assert sample_action(counts_to_policy(counts, 1), 0, np.random.default_rng(0)) == 1
    assert np.allclose(counts_to_policy(counts, 1), counts / 9)


def test_network_evaluator_needs_value_head():
    net = Network(network_for(othello))
    with pytest.raises(ValueError):
        NetworkEvaluator(net, net.init_params(np.random.default_rng(0)))
    vnet = Network(network_for(othello, value_head=True))
    ev = NetworkEvaluator(vnet, vnet.init_params(np.random.default_rng(0)))
    pi = search(othello.initial_state(), ev, SearchConfig(simulations=16))
    assert np.isclose(pi.sum(), 1.0)


def test_search_rejects_terminal_root():
    s = othello.state_from_board("XXXX" "XXXX" "XXXX" "XXXO", to_move=0)
    with pytest.raises(GameError):
        run_search(s, UniformEvaluator(), SearchConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(simulations=0)


def test_opponent_priors_come_from_second_network_only_at_opponent_nodes():
    net = Network(network_for(othello))
    params = net.init_params(np.random.default_rng(1))
    ev = OpponentPolicyEvaluator(UniformEvaluator(), 0, net, params)
    root = othello.initial_state()
    priors, value = ev(root)
    assert np.allclose(priors, UniformEvaluator()(root)[0]) and value == 0.0
    child = root.apply(1)
    priors, _ = ev(child)
    probs, _ = net.forward(params, child.observation(1))
    legal = child.legal_mask()
    assert np.allclose(priors[legal], probs[legal] / probs[legal].sum()) and not priors[~legal].any()
    with pytest.raises(ValueError):
        SearchConfig(opponent_model="minimax")
