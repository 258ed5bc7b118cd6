"""Dense tensors with reverse-mode automatic differentiation on an explicit tape.

Values are numpy arrays, float64 by default with float32 selectable per
tensor. Recording happens on a Tape activated as a context manager;
operations executed outside any active tape compute values only and are
detached from every graph. A Tape and the tensors recorded on it belong
to one worker at a time (the tape stack is thread local).
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DTYPE = np.float64

# Default pass threshold for grad_check, central differences at step 1e-5
# resolve well below this in 64-bit.
GRAD_TOL = 1e-4

_tls = threading.local()


def _tape_stack() -> list:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = []
        _tls.stack = stack
    return stack


def active_tape():
    """Innermost active Tape, or None when nothing is recording."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense array plus a gradient accumulator.

    grad starts unmaterialized (None) and is created as a same-shape zero
    array on first accumulation. Operations always allocate fresh output
    storage, a Tensor never aliases another Tensor's values.
    """

    __slots__ = ("values", "requires_grad", "grad", "tape")

    def __init__(self, values, requires_grad: bool = False, dtype=None):
        self.values = np.array(values, dtype=dtype or DEFAULT_DTYPE, copy=True)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.tape = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        return Tensor(self.values, requires_grad=False, dtype=self.values.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    # ---- operator sugar ----------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        if _is_scalar(other):
            return smul(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if _is_scalar(other):
            return smul(self, 1.0 / float(other))
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return smul(self, -1.0)

    def exp(self):
        return apply("exp", [self])

    def log(self):
        return apply("log", [self])

    def relu(self):
        return apply("relu", [self])

    def sigmoid(self):
        return apply("sigmoid", [self])

    def clip(self, lo: float, hi: float):
        return apply("clip", [self], {"lo": float(lo), "hi": float(hi)})

    def sum(self, axis=None, keepdims=False):
        return apply("sum", [self], {"axis": axis, "keepdims": keepdims})

    def mean(self, axis=None, keepdims=False):
        return apply("mean", [self], {"axis": axis, "keepdims": keepdims})

    def l2norm(self, axis: int, keepdims=False):
        return apply("l2norm", [self], {"axis": axis, "keepdims": keepdims})

    def logsumexp(self, axis: int, keepdims=False):
        return apply("logsumexp", [self], {"axis": axis, "keepdims": keepdims})

    def logmeanexp(self, axis: int, keepdims=False):
        return apply("logmeanexp", [self], {"axis": axis, "keepdims": keepdims})

    def gather_rows(self, idx):
        return apply("gather_rows", [self], {"idx": np.asarray(idx, dtype=np.int64)})

    def transpose(self):
        return apply("transpose", [self])

    @property
    def T(self):
        return self.transpose()

    def reshape(self, shape):
        return apply("reshape", [self], {"shape": tuple(shape)})

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


def _is_scalar(x) -> bool:
    return isinstance(x, (int, float)) or (isinstance(x, np.generic) and np.ndim(x) == 0)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x), requires_grad=False, dtype=dtype)


def const(x, dtype=None) -> Tensor:
    """Constant tensor, never recorded."""
    return Tensor(x, requires_grad=False, dtype=dtype)


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    attrs: dict


class Tape:
    """Ordered record of applied primitives, consumed by one backward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        top = _tape_stack().pop()
        assert top is self, "tape stack corrupted"
        return False


# ---------------------------------------------------------------------------
# primitives


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g over the axes numpy broadcasting introduced for an input of shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _check_same_or_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"shape mismatch for {op}: {a.shape} vs {b.shape}") from None


def _fw_matmul(vals, attrs):
    a, b = vals
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch for matmul: {a.shape} vs {b.shape}")
    return a @ b


def _vjp_matmul(g, vals, out, attrs):
    a, b = vals
    return [g @ b.T, a.T @ g]


def _fw_add(vals, attrs):
    _check_same_or_broadcast("add", *vals)
    return vals[0] + vals[1]


def _vjp_add(g, vals, out, attrs):
    return [_unbroadcast(g, vals[0].shape), _unbroadcast(g, vals[1].shape)]


def _fw_sub(vals, attrs):
    _check_same_or_broadcast("sub", *vals)
    return vals[0] - vals[1]


def _vjp_sub(g, vals, out, attrs):
    return [_unbroadcast(g, vals[0].shape), _unbroadcast(-g, vals[1].shape)]


def _fw_mul(vals, attrs):
    _check_same_or_broadcast("mul", *vals)
    return vals[0] * vals[1]


def _vjp_mul(g, vals, out, attrs):
    a, b = vals
    return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]


def _fw_div(vals, attrs):
    _check_same_or_broadcast("div", *vals)
    return vals[0] / vals[1]


def _vjp_div(g, vals, out, attrs):
    a, b = vals
    return [_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)]


def _fw_smul(vals, attrs):
    return vals[0] * attrs["c"]


def _vjp_smul(g, vals, out, attrs):
    return [g * attrs["c"]]


def _fw_exp(vals, attrs):
    return np.exp(vals[0])


def _vjp_exp(g, vals, out, attrs):
    return [g * out]


def _fw_log(vals, attrs):
    return np.log(vals[0])


def _vjp_log(g, vals, out, attrs):
    return [g / vals[0]]


def _fw_relu(vals, attrs):
    return np.maximum(vals[0], 0.0)


def _vjp_relu(g, vals, out, attrs):
    return [g * (vals[0] > 0)]


def _fw_sigmoid(vals, attrs):
    x = vals[0]
    # exp(-|x|) keeps both branches overflow free
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _vjp_sigmoid(g, vals, out, attrs):
    return [g * out * (1.0 - out)]


def _fw_clip(vals, attrs):
    return np.clip(vals[0], attrs["lo"], attrs["hi"])


def _vjp_clip(g, vals, out, attrs):
    x = vals[0]
    inside = (x > attrs["lo"]) & (x < attrs["hi"])
    return [g * inside]


def _expand_reduced(g, in_shape, axis, keepdims):
    g = np.asarray(g)
    if axis is None:
        return np.broadcast_to(g, in_shape).copy()
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, in_shape).copy()


def _fw_sum(vals, attrs):
    return np.sum(vals[0], axis=attrs["axis"], keepdims=attrs["keepdims"])


def _vjp_sum(g, vals, out, attrs):
    return [_expand_reduced(g, vals[0].shape, attrs["axis"], attrs["keepdims"])]


def _fw_mean(vals, attrs):
    return np.mean(vals[0], axis=attrs["axis"], keepdims=attrs["keepdims"])


def _vjp_mean(g, vals, out, attrs):
    x = vals[0]
    axis = attrs["axis"]
    count = x.size if axis is None else x.shape[axis]
    return [_expand_reduced(g, x.shape, axis, attrs["keepdims"]) / count]


def _fw_l2norm(vals, attrs):
    x = vals[0]
    return np.sqrt(np.sum(x * x, axis=attrs["axis"], keepdims=attrs["keepdims"]))


def _vjp_l2norm(g, vals, out, attrs):
    x = vals[0]
    axis = attrs["axis"]
    norm = _expand_reduced(out, x.shape, axis, attrs["keepdims"])
    ge = _expand_reduced(g, x.shape, axis, attrs["keepdims"])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(norm > 0, x / np.where(norm > 0, norm, 1.0), 0.0)
    return [ge * ratio]


def _lse_core(x, axis, keepdims, mean_reduce):
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    agg = np.mean(e, axis=axis, keepdims=True) if mean_reduce else np.sum(e, axis=axis, keepdims=True)
    out = m + np.log(agg)
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out


def _lse_vjp_core(g, x, axis, keepdims):
    # softmax along axis, identical for sum and mean reductions
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    soft = e / np.sum(e, axis=axis, keepdims=True)
    return _expand_reduced(g, x.shape, axis, keepdims) * soft


def _fw_logsumexp(vals, attrs):
    return _lse_core(vals[0], attrs["axis"], attrs["keepdims"], mean_reduce=False)


def _vjp_logsumexp(g, vals, out, attrs):
    return [_lse_vjp_core(g, vals[0], attrs["axis"], attrs["keepdims"])]


def _fw_logmeanexp(vals, attrs):
    return _lse_core(vals[0], attrs["axis"], attrs["keepdims"], mean_reduce=True)


def _vjp_logmeanexp(g, vals, out, attrs):
    return [_lse_vjp_core(g, vals[0], attrs["axis"], attrs["keepdims"])]


def _fw_concat(vals, attrs):
    return np.concatenate(vals, axis=attrs["axis"])


def _vjp_concat(g, vals, out, attrs):
    axis = attrs["axis"]
    sizes = [v.shape[axis] for v in vals]
    splits = np.cumsum(sizes)[:-1]
    return [piece.copy() for piece in np.split(g, splits, axis=axis)]


def _fw_gather_rows(vals, attrs):
    idx = attrs["idx"]
    x = vals[0]
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ValueError(f"gather_rows index out of range for shape {x.shape}")
    return x[idx]


def _vjp_gather_rows(g, vals, out, attrs):
    z = np.zeros_like(vals[0])
    np.add.at(z, attrs["idx"], g)
    return [z]


def _fw_transpose(vals, attrs):
    x = vals[0]
    if x.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got shape {x.shape}")
    return x.T.copy()


def _vjp_transpose(g, vals, out, attrs):
    return [g.T.copy()]


def _fw_reshape(vals, attrs):
    return vals[0].reshape(attrs["shape"]).copy()


def _vjp_reshape(g, vals, out, attrs):
    return [g.reshape(vals[0].shape).copy()]


@dataclass(frozen=True)
class Primitive:
    name: str
    forward: object
    vjp: object
    arity: int  # -1 for variadic


PRIMITIVES: dict[str, Primitive] = {
    p.name: p
    for p in [
        Primitive("matmul", _fw_matmul, _vjp_matmul, 2),
        Primitive("add", _fw_add, _vjp_add, 2),
        Primitive("sub", _fw_sub, _vjp_sub, 2),
        Primitive("mul", _fw_mul, _vjp_mul, 2),
        Primitive("div", _fw_div, _vjp_div, 2),
        Primitive("smul", _fw_smul, _vjp_smul, 1),
        Primitive("exp", _fw_exp, _vjp_exp, 1),
        Primitive("log", _fw_log, _vjp_log, 1),
        Primitive("relu", _fw_relu, _vjp_relu, 1),
        Primitive("sigmoid", _fw_sigmoid, _vjp_sigmoid, 1),
        Primitive("clip", _fw_clip, _vjp_clip, 1),
        Primitive("sum", _fw_sum, _vjp_sum, 1),
        Primitive("mean", _fw_mean, _vjp_mean, 1),
        Primitive("l2norm", _fw_l2norm, _vjp_l2norm, 1),
        Primitive("logsumexp", _fw_logsumexp, _vjp_logsumexp, 1),
        Primitive("logmeanexp", _fw_logmeanexp, _vjp_logmeanexp, 1),
        Primitive("concat", _fw_concat, _vjp_concat, -1),
        Primitive("gather_rows", _fw_gather_rows, _vjp_gather_rows, 1),
        Primitive("transpose", _fw_transpose, _vjp_transpose, 1),
        Primitive("reshape", _fw_reshape, _vjp_reshape, 1),
    ]
}


def apply(op: str, inputs, attrs: dict | None = None) -> Tensor:
    """Run a primitive and record it on the active tape when a gradient is needed."""
    prim = PRIMITIVES.get(op)
    if prim is None:
        raise ValueError(f"unknown primitive {op!r}")
    inputs = list(inputs)
    if prim.arity >= 0 and len(inputs) != prim.arity:
        raise ValueError(f"{op} expects {prim.arity} inputs, got {len(inputs)}")
    attrs = dict(attrs) if attrs else {}
    out_vals = prim.forward([t.values for t in inputs], attrs)
    out = Tensor.__new__(Tensor)
    out.values = np.asarray(out_vals)
    out.requires_grad = False
    out.grad = None
    out.tape = None
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape = tape
        tape.nodes.append(Node(op, tuple(inputs), out, attrs))
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d loss / d leaf into every requires_grad leaf, consuming the tape.

    Leaves are tensors not produced on the loss's tape; their grad fields
    accumulate with +=, so repeated backward passes over fresh tapes sum.
    """
    if loss.values.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.values.shape}")
    tape = loss.tape
    if tape is None:
        raise ValueError("loss is not recorded on any tape")
    if tape.consumed:
        raise ValueError("tape already consumed by a previous backward")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.values.dtype)}
    for node in reversed(tape.nodes):
        g_out = grads.pop(id(node.output), None)
        if g_out is None:
            continue
        prim = PRIMITIVES[node.op]
        in_grads = prim.vjp(g_out, [t.values for t in node.inputs], node.output.values, node.attrs)
        for t, g in zip(node.inputs, in_grads):
            if g is None or not t.requires_grad:
                continue
            if t.tape is tape:
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
            else:
                t.accumulate_grad(g)
    tape.nodes.clear()
    tape.consumed = True


# ---- functional aliases ---------------------------------------------------


def matmul(a, b):
    return apply("matmul", [a, b])


def add(a, b):
    return apply("add", [a, b])


def sub(a, b):
    return apply("sub", [a, b])


def mul(a, b):
    return apply("mul", [a, b])


def div(a, b):
    return apply("div", [a, b])


def smul(a, c: float):
    return apply("smul", [a], {"c": float(c)})


def concat(tensors, axis=0):
    return apply("concat", list(tensors), {"axis": axis})


# ---------------------------------------------------------------------------
# parameter collections


class ParamStore:
    """Ordered, named collection of trainable tensors."""

    def __init__(self, params: dict[str, Tensor] | None = None):
        self._params: dict[str, Tensor] = dict(params or {})

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def n_scalars(self) -> int:
        return sum(t.values.size for t in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.values.copy() for k, t in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, t in self._params.items():
            t.values[...] = snap[k]

    def block_hash(self) -> str:
        """Stable digest of all parameter values, used for phase isolation audits."""
        h = hashlib.sha256()
        for name in sorted(self._params):
            t = self._params[name]
            h.update(name.encode())
            h.update(str(t.values.shape).encode())
            h.update(np.ascontiguousarray(t.values).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference(f, arrays, step: float = 1e-5):
    """Central-difference gradients of scalar f with respect to each array.

    f takes the list of arrays and returns a float; arrays are mutated in
    place during probing and restored before returning.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f(arrays)
            flat[i] = orig - step
            fm = f(arrays)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Elementwise |a-b| / max(1, |a|, |b|), reduced to the maximum."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    den = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / den))


def check_gradients(build, arrays, step: float = 1e-5) -> float:
    """Max relative error between tape gradients and finite differences.

    build maps a list of Tensors to a scalar Tensor and must be a pure
    function of the input values.
    """
    leaves = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    with Tape():
        loss = build(leaves)
        backward(loss)
    tape_grads = [
        t.grad if t.grad is not None else np.zeros_like(t.values) for t in leaves
    ]

    def f(arrs):
        return float(build([Tensor(a, dtype=np.float64) for a in arrs]).values)

    fd_grads = finite_difference(f, [a.astype(np.float64).copy() for a in arrays], step)
    return max(max_rel_error(g, h) for g, h in zip(tape_grads, fd_grads))


def _nudge_away(x: np.ndarray, points, margin: float = 2e-3) -> np.ndarray:
    """Shift entries of x that sit within margin of any excluded point."""
    x = x.copy()
    for p in points:
        close = np.abs(x - p) < margin
        x[close] = p + np.where(x[close] >= p, margin, -margin) * 1.5
    return x


def _gc_cases(op: str, rng: np.random.Generator):
    """Random inputs and attrs for one grad_check trial of a primitive."""
    def dims(k=2, lo=2, hi=5):
        return tuple(int(rng.integers(lo, hi + 1)) for _ in range(k))

    def u(shape, lo=-2.0, hi=2.0):
        return rng.uniform(lo, hi, size=shape)

    m, n = dims()
    if op == "matmul":
        k = int(rng.integers(2, 6))
        return [u((m, k)), u((k, n))], {}
    if op in ("add", "sub", "mul"):
        variant = rng.integers(3)
        if variant == 0:
            return [u((m, n)), u((m, n))], {}
        if variant == 1:
            return [u((m, n)), u((n,))], {}
        return [u((m, 1)), u((1, n))], {}
    if op == "div":
        den = rng.uniform(0.5, 2.5, size=(m, n)) * rng.choice([-1.0, 1.0], size=(m, n))
        return [u((m, n)), den], {}
    if op == "smul":
        return [u((m, n))], {"c": float(rng.uniform(-2, 2))}
    if op == "exp":
        return [u((m, n))], {}
    if op == "log":
        return [rng.uniform(0.1, 3.0, size=(m, n))], {}
    if op == "relu":
        return [_nudge_away(u((m, n)), [0.0])], {}
    if op == "sigmoid":
        return [u((m, n), -4, 4)], {}
    if op == "clip":
        return [_nudge_away(u((m, n)), [-1.0, 1.0])], {"lo": -1.0, "hi": 1.0}
    if op in ("sum", "mean"):
        axis = [None, 0, 1][int(rng.integers(3))]
        return [u((m, n))], {"axis": axis, "keepdims": bool(rng.integers(2)) if axis is not None else False}
    if op == "l2norm":
        x = u((m, n))
        # keep every slice norm well away from the nondifferentiable origin
        while min(np.linalg.norm(x, axis=0).min(), np.linalg.norm(x, axis=1).min()) < 0.1:
            x = u((m, n))
        return [x], {"axis": int(rng.integers(2)), "keepdims": bool(rng.integers(2))}
    if op in ("logsumexp", "logmeanexp"):
        return [u((m, n))], {"axis": int(rng.integers(2)), "keepdims": bool(rng.integers(2))}
    if op == "concat":
        parts = int(rng.integers(2, 4))
        axis = int(rng.integers(2))
        if axis == 0:
            return [u((int(rng.integers(1, 4)), n)) for _ in range(parts)], {"axis": 0}
        return [u((m, int(rng.integers(1, 4)))) for _ in range(parts)], {"axis": 1}
    if op == "gather_rows":
        k = int(rng.integers(1, 7))
        idx = rng.integers(0, m, size=k)  # repeats exercise scatter accumulation
        return [u((m, n))], {"idx": idx}
    if op == "transpose":
        return [u((m, n))], {}
    if op == "reshape":
        return [u((m, n))], {"shape": (n * m,) if rng.integers(2) else (1, m * n)}
    raise ValueError(f"no grad_check case for {op!r}")


@dataclass
class GradCheckReport:
    op: str
    tol: float
    errors: list = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.errors)

    def __str__(self):
        verdict = "ok" if self.passed else "FAIL"
        return f"grad_check[{self.op}] {verdict} trials={len(self.errors)} max_err={self.max_error:.3e}"


def grad_check(op: str, trials: int = 100, seed: int = 0, tol: float = GRAD_TOL) -> GradCheckReport:
    """Compare tape gradients of one primitive against central finite differences."""
    if op not in PRIMITIVES:
        raise ValueError(f"unknown primitive {op!r}")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    report = GradCheckReport(op=op, tol=tol)
    for _ in range(trials):
        arrays, attrs = _gc_cases(op, rng)
        # random projection fixes a scalar objective probing all jacobian rows
        probe = apply(op, [Tensor(a) for a in arrays], attrs)
        proj = rng.uniform(-1.0, 1.0, size=probe.values.shape)

        def build(leaves, _attrs=attrs, _proj=proj):
            out = apply(op, leaves, _attrs)
            return mul(out, const(_proj)).sum()

        report.errors.append(check_gradients(build, arrays))
    return report
