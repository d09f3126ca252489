from .checkpoint import CheckpointError, dumps, load, loads, save
from .layers import BoardPlanes, Conv2d, Dense, Dropout, Flatten, ReLU, Softmax, Tanh
from .network import LossKind, Network, NetworkSpec, ParamStore, TrainingError, mlp_spec
from .optim import SGD, Adam, apply_gradients, make_optimizer


def othello_spec(num_actions: int = 17, *, softmax_head=True, value_head=False, dropout=0.3) -> NetworkSpec:
    """Two 3x3 convolutions over the board planes, a 64-unit dense layer, heads."""
    trunk = (
        BoardPlanes(2, 4, 4),
        Conv2d(3, 8, 3),
        ReLU(),
        Conv2d(8, 8, 3),
        ReLU(),
        Flatten(),
        Dense(128, 64),
        ReLU(),
    ) + ((Dropout(dropout),) if dropout else ())
    head = (Dense(64, num_actions),) + ((Softmax(),) if softmax_head else ())
    value = (Dense(64, 1), Tanh()) if value_head else None
    return NetworkSpec(33, trunk, head, value)


def network_for(game, *, softmax_head=True, value_head=False, dropout=None) -> NetworkSpec:
    """Default architecture for each registered game."""
    if game.name == "othello4":
        return othello_spec(game.num_actions, softmax_head=softmax_head, value_head=value_head,
                            dropout=0.3 if dropout is None else dropout)
    if game.name == "leduc":
        return mlp_spec(game.observation_size, game.num_actions, (64, 64), softmax_head=softmax_head,
                        value_head=value_head, dropout=dropout or 0.0)
    return mlp_spec(game.observation_size, game.num_actions, (16,), softmax_head=softmax_head,
                    value_head=value_head, dropout=dropout or 0.0)


__all__ = [
    "Adam",
    "BoardPlanes",
    "CheckpointError",
    "Conv2d",
    "Dense",
    "Dropout",
    "Flatten",
    "LossKind",
    "Network",
    "NetworkSpec",
    "ParamStore",
    "ReLU",
    "SGD",
    "Softmax",
    "Tanh",
    "TrainingError",
    "apply_gradients",
    "dumps",
    "load",
    "loads",
    "make_optimizer",
    "mlp_spec",
    "network_for",
    "othello_spec",
    "save",
]
