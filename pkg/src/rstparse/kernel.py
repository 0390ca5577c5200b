"""Minimal reverse-mode numeric substrate on float64 numpy arrays.

A ``Var`` wraps an ndarray and remembers how it was computed; ``backward``
replays the tape in reverse topological order, accumulating gradients into
leaf ``Var``s. Parameters live in a ``ParameterStore`` with deterministic
seeded initialization, and ``adam_step`` applies a standard Adam update
with the quadratic penalty's gradient (2*lambda*theta) folded in.

Everything computes at float64; float32 appears only at I/O boundaries
(checkpoints, embedding files). Forward passes over an immutable store may
run concurrently; gradient accumulation and optimizer steps are a single
writer's job.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from typing import Callable, Iterable, Optional

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class NonFiniteError(ArithmeticError):
    """A gradient or update became NaN or infinite."""


class Var:
    """A node of the reverse-mode tape."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def const(value) -> Var:
    return Var(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Var, b: Var) -> Var:
    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return Var(a.value + b.value, (a, b), vjp)


def sub(a: Var, b: Var) -> Var:
    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return Var(a.value - b.value, (a, b), vjp)


def mul(a: Var, b: Var) -> Var:
    def vjp(g):
        return (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        )

    return Var(a.value * b.value, (a, b), vjp)


def scale(a: Var, s: float) -> Var:
    return Var(a.value * s, (a,), lambda g: (g * s,))


def neg(a: Var) -> Var:
    return scale(a, -1.0)


def matmul(a: Var, b: Var) -> Var:
    """Matrix product for the 1D/2D operand combinations numpy allows."""
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise DimensionError(f"matmul expects 1D/2D operands, got {av.shape} @ {bv.shape}")
    if av.shape[-1] != (bv.shape[0] if bv.ndim >= 1 else None):
        raise DimensionError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")

    def vjp(g):
        g = np.asarray(g)
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return g @ bv.T, np.outer(av, g)
        # av 2D, bv 1D
        return np.outer(g, bv), av.T @ g

    return Var(av @ bv, (a, b), vjp)


def dot(a: Var, b: Var) -> Var:
    if a.value.ndim != 1 or b.value.ndim != 1 or a.value.shape != b.value.shape:
        raise DimensionError(f"dot expects equal 1D shapes, got {a.shape}, {b.shape}")
    return matmul(a, b)


def tanh(a: Var) -> Var:
    out = np.tanh(a.value)
    return Var(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Var) -> Var:
    out = 1.0 / (1.0 + np.exp(-a.value))
    return Var(out, (a,), lambda g: (g * out * (1.0 - out),))


def elu(a: Var) -> Var:
    """Exponential linear unit with unit saturation: x>0 -> x, else exp(x)-1."""
    x = a.value
    out = np.where(x > 0, x, np.expm1(x))
    deriv = np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))
    return Var(out, (a,), lambda g: (g * deriv,))


def exp(a: Var) -> Var:
    out = np.exp(a.value)
    return Var(out, (a,), lambda g: (g * out,))


def log(a: Var) -> Var:
    return Var(np.log(a.value), (a,), lambda g: (g / a.value,))


def sum_all(a: Var) -> Var:
    return Var(a.value.sum(), (a,), lambda g: (np.full_like(a.value, float(g)),))


def mean_rows(a: Var, i: int, j: int) -> Var:
    """Mean of rows ``a[i:j]`` of a 2D Var; returns a 1D Var."""
    if not 0 <= i < j <= a.value.shape[0]:
        raise DimensionError(f"row range [{i},{j}) out of bounds for {a.shape}")
    k = j - i

    def vjp(g):
        out = np.zeros_like(a.value)
        out[i:j] = g / k
        return (out,)

    return Var(a.value[i:j].mean(axis=0), (a,), vjp)


def rows(a: Var, i: int, j: int) -> Var:
    """Rows ``a[i:j]`` of a 2D Var (or a segment of a 1D Var)."""

    def vjp(g):
        out = np.zeros_like(a.value)
        out[i:j] = g
        return (out,)

    return Var(a.value[i:j], (a,), vjp)


def row(a: Var, i: int) -> Var:
    def vjp(g):
        out = np.zeros_like(a.value)
        out[i] = g
        return (out,)

    return Var(a.value[i], (a,), vjp)


def gather_rows(a: Var, indices) -> Var:
    """Rows of a 2D Var selected by an integer index array (may repeat)."""
    idx = np.asarray(indices, dtype=np.intp)

    def vjp(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return Var(a.value[idx], (a,), vjp)


def concat(parts: list[Var]) -> Var:
    """Concatenate 1D Vars into one 1D Var."""
    sizes = [p.value.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[offsets[t] : offsets[t + 1]] for t in range(len(parts)))

    return Var(np.concatenate([p.value for p in parts]), tuple(parts), vjp)


def stack_rows(parts: list[Var]) -> Var:
    """Stack 1D Vars into a 2D Var, one per row."""

    def vjp(g):
        return tuple(g[t] for t in range(len(parts)))

    return Var(np.stack([p.value for p in parts]), tuple(parts), vjp)


def log_softmax(a: Var) -> Var:
    """Numerically stable log-softmax of a 1D Var."""
    x = a.value
    shift = x - x.max()
    logz = math.log(np.exp(shift).sum())
    out = shift - logz
    softmax = np.exp(out)

    def vjp(g):
        return (g - softmax * g.sum(),)

    return Var(out, (a,), vjp)


def pick(a: Var, index: int) -> Var:
    """Scalar element ``a[index]`` of a 1D Var."""

    def vjp(g):
        out = np.zeros_like(a.value)
        out[index] = g
        return (out,)

    return Var(a.value[index], (a,), vjp)


def bilinear3(el: Var, w: Var, er: Var) -> Var:
    """The 3-way form ``out[r] = el @ w[:, :, r] @ er`` of a (d, d, R) tensor."""
    d1, d2, _ = w.value.shape
    if el.value.shape != (d1,) or er.value.shape != (d2,):
        raise DimensionError(
            f"bilinear3 shape mismatch: {el.shape}, {w.shape}, {er.shape}"
        )
    out = np.einsum("i,ijr,j->r", el.value, w.value, er.value)

    def vjp(g):
        return (
            np.einsum("ijr,j,r->i", w.value, er.value, g),
            np.einsum("i,j,r->ijr", el.value, er.value, g),
            np.einsum("i,ijr,r->j", el.value, w.value, g),
        )

    return Var(out, (el, w, er), vjp)


def dropout(a: Var, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Var:
    """Inverted dropout; identity at evaluation time or rate 0."""
    if not training or rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    mask = (rng.random(a.value.shape) >= rate) / (1.0 - rate)
    return mul(a, const(mask))


def backward(root: Var) -> None:
    """Accumulate d(root)/d(leaf) into every reachable leaf's ``grad``."""
    if root.value.shape != ():
        raise DimensionError(f"backward needs a scalar root, got shape {root.shape}")
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(root): np.ones((), dtype=np.float64)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is None:
            # Leaf: accumulate into the persistent buffer.
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
            node.grad += g
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = np.asarray(pg, dtype=np.float64)


# ---------------------------------------------------------------------------
# layers


def linear(x: Var, w: Var, b: Optional[Var] = None) -> Var:
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


def gru_cell(x: Var, h: Var, p: dict[str, Var]) -> Var:
    """One GRU step: update/reset gates and a tanh candidate.

    ``h' = (1 - z) * hh + z * h`` so that zero parameters halve the state.
    """
    z = sigmoid(add(add(matmul(x, p["wz"]), matmul(h, p["uz"])), p["bz"]))
    r = sigmoid(add(add(matmul(x, p["wr"]), matmul(h, p["ur"])), p["br"]))
    hh = tanh(add(add(matmul(x, p["wh"]), matmul(mul(r, h), p["uh"])), p["bh"]))
    one_minus_z = sub(const(np.ones_like(z.value)), z)
    return add(mul(one_minus_z, hh), mul(z, h))


def gru_sequence(xs: list[Var], p: dict[str, Var], h0: Optional[Var] = None) -> list[Var]:
    """Run a GRU over a list of 1D inputs; returns the state after each step."""
    hidden = p["bz"].value.shape[0]
    h = h0 if h0 is not None else const(np.zeros(hidden))
    states = []
    for x in xs:
        h = gru_cell(x, h, p)
        states.append(h)
    return states


def bi_gru(xs: list[Var], fw: dict[str, Var], bw: dict[str, Var]) -> tuple[list[Var], Var]:
    """Bidirectional GRU over a sequence of 1D Vars.

    Returns per-step concatenated states [forward_t; backward_t] and the
    concatenation of the two final states (the sequence summary).
    """
    f_states = gru_sequence(xs, fw)
    b_states = gru_sequence(list(reversed(xs)), bw)
    b_states = list(reversed(b_states))
    per_step = [concat([f, b]) for f, b in zip(f_states, b_states)]
    summary = concat([f_states[-1], b_states[0]])
    return per_step, summary


def biaffine(el: Var, er: Var, wl: Var, wr: Var, wlr: Var, b: Var) -> Var:
    """Bi-affine logits: el@wl + el@wlr@er + er@wr + b, one per label."""
    return add(add(add(matmul(el, wl), bilinear3(el, wlr, er)), matmul(er, wr)), b)


def softmax(values: np.ndarray) -> np.ndarray:
    """Plain-array softmax used for reporting distributions."""
    shift = values - values.max()
    e = np.exp(shift)
    return e / e.sum()


# ---------------------------------------------------------------------------
# parameters and optimization


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class ParameterStore:
    """Named trainable tensors with persistent gradient buffers.

    Creation order is part of the store's identity: given the same seed and
    the same sequence of ``add`` calls, initialization is bit-reproducible.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Var] = {}

    def add(self, name: str, shape: tuple[int, ...], init: str = "glorot") -> Var:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        if init == "glorot":
            value = _glorot(self._rng, shape)
        elif init == "zeros":
            value = np.zeros(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        var = Var(value)
        self._params[name] = var
        return var

    def add_gru(self, prefix: str, in_dim: int, hidden: int) -> dict[str, Var]:
        gates = {}
        for gate in ("z", "r", "h"):
            gates[f"w{gate}"] = self.add(f"{prefix}.w{gate}", (in_dim, hidden))
            gates[f"u{gate}"] = self.add(f"{prefix}.u{gate}", (hidden, hidden))
            gates[f"b{gate}"] = self.add(f"{prefix}.b{gate}", (hidden,), init="zeros")
        return gates

    def __getitem__(self, name: str) -> Var:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> tuple[str, ...]:
        return tuple(self._params)

    def items(self) -> Iterable[tuple[str, Var]]:
        return self._params.items()

    def zero_grad(self) -> None:
        for var in self._params.values():
            var.grad = None

    def n_params(self) -> int:
        return sum(v.value.size for v in self._params.values())

    def squared_norm(self) -> float:
        return float(sum((v.value**2).sum() for v in self._params.values()))

    def l2_penalty(self, lam: float) -> Var:
        """On-tape lambda * sum of squared parameters."""
        total = const(0.0)
        for var in self._params.values():
            total = add(total, sum_all(mul(var, var)))
        return scale(total, lam)


class AdamState:
    """First/second moment accumulators for one ParameterStore."""

    def __init__(
        self,
        store: ParameterStore,
        learning_rate: float = 0.001,
        weight_decay: float = 0.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(v.value) for name, v in store.items()}
        self.v = {name: np.zeros_like(v.value) for name, v in store.items()}


def adam_step(store: ParameterStore, state: AdamState) -> None:
    """One Adam update over all parameters.

    The quadratic penalty lambda*||theta||^2 contributes 2*lambda*theta to
    every gradient (parameters not touched by the loss still decay).
    """
    state.step_count += 1
    t = state.step_count
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    for name, var in store.items():
        g = var.grad if var.grad is not None else np.zeros_like(var.value)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
        if state.weight_decay != 0.0:
            g = g + 2.0 * state.weight_decay * var.value
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (state.learning_rate / bias1) * m / (np.sqrt(v / bias2) + state.eps)
        var.value = var.value - update


def grad_check(
    loss_fn: Callable[[], Var],
    store: ParameterStore,
    epsilon: float = 1e-4,
    param_names: Optional[list[str]] = None,
) -> dict[str, float]:
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` must be a deterministic closure over the store. Parameters
    the loss never touches report an error of 0 (their gradient is zero on
    both routes). The default step balances truncation against float64
    rounding for losses of order 1..100.
    """
    store.zero_grad()
    backward(loss_fn())
    analytic = {
        name: (var.grad.copy() if var.grad is not None else np.zeros_like(var.value))
        for name, var in store.items()
    }
    names = param_names if param_names is not None else list(store.names())
    report: dict[str, float] = {}
    for name in names:
        var = store[name]
        worst = 0.0
        flat = var.value.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + epsilon
            up = float(loss_fn().value)
            flat[idx] = keep - epsilon
            down = float(loss_fn().value)
            flat[idx] = keep
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(abs(a_flat[idx]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[idx] - numeric) / denom)
        report[name] = worst
    return report


# ---------------------------------------------------------------------------
# checkpoint container

_CKPT_MAGIC = b"CKP1"
_CKPT_VERSION = 1


def save_checkpoint(path, store: ParameterStore, meta: dict) -> None:
    """Write a named-tensor container: JSON header + float32 payload."""
    tensors = [
        {"name": name, "shape": list(var.value.shape)} for name, var in store.items()
    ]
    header = dict(meta)
    header["version"] = _CKPT_VERSION
    header["tensors"] = tensors
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, var in store.items():
            fh.write(np.ascontiguousarray(var.value, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint back as float64 arrays plus its header metadata."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _CKPT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {data[:4]!r}")
    (blob_len,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8 : 8 + blob_len].decode("utf-8"))
    if header.get("version") != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    pos = 8 + blob_len
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += count * 4
        tensors[entry["name"]] = values.reshape(shape).astype(np.float64)
    meta = {k: v for k, v in header.items() if k not in ("tensors", "version")}
    return tensors, meta


def config_hash(config_obj: dict) -> str:
    """Short stable digest of a resolved configuration."""
    canon = json.dumps(config_obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
