"""Network topology, parameter store, forward pass and the three training losses."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .layers import Dense, Dropout, Layer, ReLU, Softmax, Tanh, log_softmax, parse_layer, softmax


class TrainingError(RuntimeError):
    """Non-finite loss or activation during training."""


class LossKind(str, enum.Enum):
    CROSS_ENTROPY = "cross_entropy"
    MSE_Q = "mse_q"
    POLICY_VALUE = "policy_value_combined"


class ParamStore(dict):
    """Named weight tensors.  Values are treated as immutable by convention:
    optimizers return new stores, so a reference is a consistent snapshot."""

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self.items()})

    def zeros_like(self) -> "ParamStore":
        return ParamStore({k: np.zeros_like(v) for k, v in self.items()})

    def astype(self, dtype) -> "ParamStore":
        return ParamStore({k: v.astype(dtype) for k, v in self.items()})

    def add(self, other: "ParamStore", scale: float = 1.0) -> "ParamStore":
        return ParamStore({k: v + scale * other[k] for k, v in self.items()})

    def checksum(self) -> str:
        h = hashlib.sha256()
        for k in sorted(self):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self[k]).tobytes())
        return h.hexdigest()

    def bit_equal(self, other: "ParamStore") -> bool:
        return self.keys() == other.keys() and all(
            self[k].dtype == other[k].dtype and np.array_equal(self[k], other[k])
            for k in self
        )


@dataclass(frozen=True)
class NetworkSpec:
    input_size: int
    trunk: tuple[Layer, ...]
    policy_head: tuple[Layer, ...]
    value_head: tuple[Layer, ...] | None = None

    def __post_init__(self):
        shape = (self.input_size,)
        for layer in self.trunk:
            shape = layer.output_shape(shape)
        self._check_head(self.policy_head, shape, "policy")
        if self.value_head is not None:
            out = self._check_head(self.value_head, shape, "value")
            if out != (1,) or not isinstance(self.value_head[-1], Tanh):
                raise ValueError("value head must end in a single tanh unit")

    @staticmethod
    def _check_head(layers, shape, name):
        if not layers:
            raise ValueError(f"empty {name} head")
        for layer in layers:
            shape = layer.output_shape(shape)
        if len(shape) != 1:
            raise ValueError(f"{name} head must produce a vector, got {shape}")
        return shape

    @property
    def softmax_policy(self) -> bool:
        return isinstance(self.policy_head[-1], Softmax)

    @property
    def num_outputs(self) -> int:
        shape = (self.input_size,)
        for layer in self.trunk + self.policy_head:
            shape = layer.output_shape(shape)
        return shape[0]

    def named_layers(self):
        for prefix, layers in (("trunk", self.trunk), ("policy", self.policy_head), ("value", self.value_head or ())):
            for i, layer in enumerate(layers):
                yield f"{prefix}.{i}", layer

    def describe(self) -> str:
        lines = [f"input {self.input_size}"]
        lines.append("trunk " + " ".join(l.describe() for l in self.trunk))
        lines.append("policy " + " ".join(l.describe() for l in self.policy_head))
        if self.value_head is not None:
            lines.append("value " + " ".join(l.describe() for l in self.value_head))
        return "\n".join(lines)

    @classmethod
    def parse(cls, text: str) -> "NetworkSpec":
        fields = {}
        for line in text.strip().splitlines():
            key, _, rest = line.partition(" ")
            fields[key] = rest.split()
        try:
            return cls(
                input_size=int(fields["input"][0]),
                trunk=tuple(parse_layer(t) for t in fields.get("trunk", [])),
                policy_head=tuple(parse_layer(t) for t in fields["policy"]),
                value_head=tuple(parse_layer(t) for t in fields["value"]) if "value" in fields else None,
            )
        except (KeyError, IndexError) as exc:
            raise ValueError(f"malformed network description: {text!r}") from exc


def mlp_spec(input_size, num_outputs, hidden=(64, 64), *, softmax_head=True, value_head=False, dropout=0.0):
    trunk, width = [], input_size
    for h in hidden:
        trunk += [Dense(width, h), ReLU()]
        if dropout:
            trunk.append(Dropout(dropout))
        width = h
    head = (Dense(width, num_outputs),) + ((Softmax(),) if softmax_head else ())
    value = (Dense(width, 1), Tanh()) if value_head else None
    return NetworkSpec(input_size, tuple(trunk), head, value)


class Network:
    """Stateless evaluator for a ``NetworkSpec``; weights live in a ParamStore."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self._named = list(spec.named_layers())

    def init_params(self, rng: np.random.Generator | None = None, *, zeros=False, dtype=np.float32) -> ParamStore:
        """Glorot-uniform weights and zero biases (or all zeros)."""
        params = ParamStore()
        for prefix, layer in self._named:
            fan_in, fan_out = layer.fans()
            for name, shape in layer.params().items():
                if zeros or name == "b":
                    arr = np.zeros(shape, dtype=dtype)
                else:
                    limit = np.sqrt(6.0 / (fan_in + fan_out))
                    arr = rng.uniform(-limit, limit, size=shape).astype(dtype)
                params[f"{prefix}.{name}"] = arr
        return params

    @staticmethod
    def _layer_params(params, prefix, layer):
        return {name: params[f"{prefix}.{name}"] for name in layer.params()}

    def _run(self, params, layers, prefix, x, train, rng, caches):
        for i, layer in enumerate(layers):
            if isinstance(layer, Softmax):
                break
            p = self._layer_params(params, f"{prefix}.{i}", layer)
            x, cache = layer.forward(x, p, train, rng)
            if caches is not None:
                caches.append((f"{prefix}.{i}", layer, p, cache))
        return x

    def _prepare(self, params, x):
        x = np.asarray(x)
        dtype = next(iter(params.values())).dtype
        if x.shape[-1] != self.spec.input_size:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.spec.input_size}")
        return x.reshape(-1, self.spec.input_size).astype(dtype, copy=False)

    def _heads(self, params, x, train, rng, caches=None):
        trunk_c = [] if caches is not None else None
        h = self._run(params, self.spec.trunk, "trunk", x, train, rng, trunk_c)
        pol_c = [] if caches is not None else None
        out = self._run(params, self.spec.policy_head, "policy", h, train, rng, pol_c)
        val_c = [] if caches is not None else None
        value = None
        if self.spec.value_head is not None:
            value = self._run(params, self.spec.value_head, "value", h, train, rng, val_c)[:, 0]
        if caches is not None:
            caches.update(trunk=trunk_c, policy=pol_c, value=val_c)
        return out, value

    def forward(self, params: ParamStore, x, train: bool = False, rng=None):
        """Return ``(policy, value)``.  ``policy`` is softmax probabilities for a
        probability head or raw outputs (Q values) otherwise; ``value`` is None
        without a value head.  A 1-D input yields unbatched outputs."""
        single = np.ndim(x) == 1
        out, value = self._heads(params, self._prepare(params, x), train, rng)
        if self.spec.softmax_policy:
            out = softmax(out)
        if single:
            return out[0], (None if value is None else value[0])
        return out, value

    def logits(self, params, x):
        return self._heads(params, self._prepare(params, x), False, None)[0]

    def _backprop(self, caches, grad, grads):
        for name, layer, p, cache in reversed(caches):
            grad, g = layer.backward(grad, cache, p)
            for k, v in g.items():
                grads[f"{name}.{k}"] = v
        return grad

    def loss_and_gradients(
        self,
        params: ParamStore,
        kind: LossKind | str,
        obs,
        *,
        policy=None,
        actions=None,
        targets=None,
        outcome=None,
        reduction: str = "mean",
        train: bool = False,
        rng=None,
    ):
        """Compute a training loss and its exact gradient.

        cross_entropy: ``policy`` holds target distributions (one-hot actions for
        the average-policy nets).  mse_q: squared error between Q(s, actions) and
        ``targets``.  policy_value_combined: cross-entropy to ``policy`` plus
        ``(v(s) - outcome)**2``.  Returns ``(loss, grads, terms)``.
        """
        kind = LossKind(kind)
        x = self._prepare(params, obs)
        B = x.shape[0]
        scale = 1.0 / B if reduction == "mean" else 1.0
        caches: dict = {}
        out, value = self._heads(params, x, train, rng, caches)
        dtype = out.dtype
        terms = {}
        d_out = None
        d_value = None
        if kind in (LossKind.CROSS_ENTROPY, LossKind.POLICY_VALUE):
            if not self.spec.softmax_policy:
                raise ValueError(f"{kind.value} needs a softmax policy head")
            target = np.asarray(policy, dtype=dtype).reshape(B, -1)
            logp = log_softmax(out)
            terms["policy"] = float(-(target * logp).sum() * scale)
            d_out = ((np.exp(logp) * target.sum(axis=1, keepdims=True)) - target) * scale
        if kind == LossKind.POLICY_VALUE:
            if value is None:
                raise ValueError("policy_value_combined needs a value head")
            z = np.asarray(outcome, dtype=dtype).reshape(B)
            resid = value - z
            terms["value"] = float((resid * resid).sum() * scale)
            d_value = (2.0 * resid * scale)[:, None].astype(dtype)
        if kind == LossKind.MSE_Q:
            if self.spec.softmax_policy:
                raise ValueError("mse_q needs a linear Q head")
            a = np.asarray(actions, dtype=np.int64).reshape(B)
            y = np.asarray(targets, dtype=dtype).reshape(B)
            resid = out[np.arange(B), a] - y
            terms["q"] = float((resid * resid).sum() * scale)
            d_out = np.zeros_like(out)
            d_out[np.arange(B), a] = 2.0 * resid * scale
        loss = sum(terms.values())
        if not np.isfinite(loss) or not np.all(np.isfinite(out)):
            raise TrainingError(
                f"non-finite {kind.value} loss on a batch of {B}: loss={loss}, "
                f"max |output|={np.nanmax(np.abs(out))}"
            )
        grads = ParamStore()
        d_trunk = self._backprop(caches["policy"], d_out, grads)
        if d_value is not None:
            d_trunk = d_trunk + self._backprop(caches["value"], d_value, grads)
        elif self.spec.value_head is not None:
            for name, layer, p, _ in caches["value"]:
                for k in layer.params():
                    grads[f"{name}.{k}"] = np.zeros_like(p[k])
        self._backprop(caches["trunk"], d_trunk, grads)
        for k, v in grads.items():
            if v.dtype != dtype:
                grads[k] = v.astype(dtype)
        return loss, ParamStore({k: grads[k] for k in params}), terms
