"""Black-box model oracles: the in-repo zoo, budget accounting, and the
client side of the audit wire protocol.

Binary labels are always +-1 internally; multiclass labels are 0..K-1.
Every backend is deterministic: the same point always gets the same label.
"""

from __future__ import annotations

import json
import socket
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    as_point_batch,
    check_dimension,
    point_index,
    subset_from_members,
    subset_members,
)
from .errors import (
    BudgetExceededError,
    InvalidParameterError,
    InvalidSpecError,
    TransportError,
)


@dataclass
class AuditBudget:
    """Monotone query accounting: ``consumed`` never exceeds ``max_queries``."""

    max_queries: int
    consumed: int = 0

    def __post_init__(self):
        if self.max_queries < 1:
            raise InvalidParameterError("budget must allow at least one query")
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return self.max_queries - self.consumed

    def charge(self, count: int) -> None:
        with self._lock:
            if self.consumed + count > self.max_queries:
                raise BudgetExceededError(
                    f"batch of {count} exceeds remaining budget "
                    f"{self.max_queries - self.consumed}",
                    shortfall=count - (self.max_queries - self.consumed),
                )
            self.consumed += count

    def refund(self, count: int) -> None:
        with self._lock:
            self.consumed = max(0, self.consumed - count)


class ModelOracle:
    """Base query interface. Subclasses implement ``_predict``."""

    def __init__(self, n: int, arity: int = 2):
        self.n = check_dimension(n)
        if arity < 2:
            raise InvalidParameterError("label arity must be >= 2")
        self.arity = arity
        self.query_counter = 0

    def query_batch(self, xs, budget: AuditBudget | None = None) -> np.ndarray:
        """Label a batch; the counter advances by exactly the labels issued."""
        arr = as_point_batch(xs, self.n)
        if budget is not None:
            budget.charge(arr.shape[0])
        try:
            ys = self._predict(arr)
        except TransportError as exc:
            if budget is not None:
                budget.refund(arr.shape[0] - exc.acknowledged)
            self.query_counter += exc.acknowledged
            raise
        self.query_counter += arr.shape[0]
        return ys

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class LookupTable(ModelOracle):
    """Explicit truth table over all 2^n points (enumerate_points order)."""

    def __init__(self, table, arity: int = 2):
        table = np.asarray(table, dtype=np.int64)
        n = int(table.shape[0]).bit_length() - 1
        if table.ndim != 1 or table.shape[0] != (1 << n):
            raise InvalidSpecError("truth table must have length 2^n")
        super().__init__(n, arity)
        if arity == 2:
            if not np.all(np.abs(table) == 1):
                raise InvalidSpecError("binary truth table entries must be +-1")
        elif np.any(table < 0) or np.any(table >= arity):
            raise InvalidSpecError("multiclass labels must lie in 0..K-1")
        self.table = table

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        return self.table[point_index(xs)]


class LinearThreshold(ModelOracle):
    """sign(w . x + b), with sign(0) = +1."""

    def __init__(self, weights, bias: float = 0.0):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.isfinite(bias):
            raise InvalidSpecError("weights and bias must be finite")
        super().__init__(w.shape[0])
        self.weights = w
        self.bias = float(bias)

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        score = xs.astype(np.float64) @ self.weights + self.bias
        return np.where(score >= 0.0, 1, -1).astype(np.int64)


class Junta(ModelOracle):
    """Depends only on the coordinates in ``members`` via an inner table.

    ``inner_table`` has length 2^k and is indexed like a k-dimensional
    lookup table over the selected coordinates (in ascending order).
    """

    def __init__(self, n: int, members: Sequence[int], inner_table, arity: int = 2):
        super().__init__(n, arity)
        members = tuple(sorted(members))
        mask = subset_from_members(members, n)
        k = len(members)
        inner = np.asarray(inner_table, dtype=np.int64)
        if inner.shape != (1 << k,):
            raise InvalidSpecError("inner table must have length 2^k")
        if arity == 2 and not np.all(np.abs(inner) == 1):
            raise InvalidSpecError("binary inner table entries must be +-1")
        self.members = members
        self.mask = mask
        self.inner_table = inner

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        cols = [c - 1 for c in self.members]
        sub = xs[:, cols] if cols else xs[:, :0]
        idx = (sub < 0).astype(np.int64) @ (1 << np.arange(len(cols), dtype=np.int64))
        return self.inner_table[idx]


@dataclass(frozen=True)
class StumpNode:
    """Internal node of an axis-aligned tree: branch on one coordinate."""

    coordinate: int  # 1-based
    when_minus: "StumpNode | int"
    when_plus: "StumpNode | int"


class DecisionStumpTree(ModelOracle):
    """Axis-aligned binary decision tree with +-1 leaves."""

    def __init__(self, n: int, root: StumpNode | int):
        super().__init__(n)
        self._check_total(root)
        self.root = root

    def _check_total(self, node) -> None:
        if isinstance(node, StumpNode):
            if not 1 <= node.coordinate <= self.n:
                raise InvalidSpecError(f"tree branches on coordinate {node.coordinate}")
            self._check_total(node.when_minus)
            self._check_total(node.when_plus)
        elif node not in (-1, 1):
            raise InvalidSpecError("tree leaves must be -1 or +1")

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        out = np.empty(xs.shape[0], dtype=np.int64)

        def walk(node, rows: np.ndarray) -> None:
            if not isinstance(node, StumpNode):
                out[rows] = node
                return
            minus = xs[rows, node.coordinate - 1] < 0
            walk(node.when_minus, rows[minus])
            walk(node.when_plus, rows[~minus])

        walk(self.root, np.arange(xs.shape[0]))
        return out


# ---------------------------------------------------------------------------
# external models over the wire protocol
# ---------------------------------------------------------------------------

PROTOCOL_TIMEOUT_SECONDS = 30.0
MAX_POINTS_PER_MESSAGE = 65536


class ExternalModel(ModelOracle):
    """Client for a served model: newline-delimited JSON over a pipe or TCP.

    The server speaks first with ``{"n": ..., "labels": ...}``; afterwards
    each request ``{"id", "xs"}`` is answered by ``{"id", "ys"}`` or
    ``{"id", "error"}``. Request ids increase strictly per connection.
    """

    def __init__(self, endpoint: str, timeout: float = PROTOCOL_TIMEOUT_SECONDS):
        self._timeout = timeout
        self._next_id = 1
        self._proc = None
        self._sock = None
        try:
            if endpoint.startswith("tcp:"):
                _, host, port = endpoint.split(":", 2)
                self._sock = socket.create_connection((host, int(port)), timeout=timeout)
                self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
                self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
            elif endpoint.startswith("stdio:"):
                argv = endpoint[len("stdio:"):].split()
                self._proc = subprocess.Popen(
                    argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
                )
                self._reader = self._proc.stdout
                self._writer = self._proc.stdin
            else:
                raise InvalidParameterError(
                    f"endpoint must look like tcp:host:port or stdio:cmd, got {endpoint!r}"
                )
            hello = self._read_message()
        except (OSError, ValueError) as exc:
            raise TransportError(f"could not reach endpoint {endpoint!r}: {exc}") from exc
        if "n" not in hello or "labels" not in hello:
            raise TransportError(f"malformed handshake: {hello!r}")
        super().__init__(int(hello["n"]), int(hello["labels"]))
        self.endpoint = endpoint

    def _read_message(self) -> dict:
        line = self._reader.readline()
        if not line:
            raise TransportError("connection closed by server")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"unparseable server message: {line!r}") from exc
        if not isinstance(msg, dict):
            raise TransportError(f"unexpected server message: {msg!r}")
        return msg

    def _predict(self, xs: np.ndarray) -> np.ndarray:
        out = np.empty(xs.shape[0], dtype=np.int64)
        done = 0
        for start in range(0, xs.shape[0], MAX_POINTS_PER_MESSAGE):
            block = xs[start : start + MAX_POINTS_PER_MESSAGE]
            req_id = self._next_id
            self._next_id += 1
            try:
                self._writer.write(
                    json.dumps({"id": req_id, "xs": block.tolist()}) + "\n"
                )
                self._writer.flush()
                msg = self._read_message()
            except (OSError, TransportError) as exc:
                raise TransportError(str(exc), acknowledged=done) from exc
            if msg.get("id") != req_id:
                raise TransportError(
                    f"response id {msg.get('id')!r} does not match request {req_id}",
                    acknowledged=done,
                )
            if "error" in msg:
                raise TransportError(
                    f"server error: {msg['error']}", acknowledged=done
                )
            ys = msg.get("ys")
            if not isinstance(ys, list) or len(ys) != block.shape[0]:
                raise TransportError(
                    f"response carries {len(ys) if isinstance(ys, list) else '?'} labels "
                    f"for {block.shape[0]} points",
                    acknowledged=done,
                )
            labels = np.asarray(ys, dtype=np.int64)
            if self.arity == 2:
                if not np.all(np.abs(labels) == 1):
                    raise TransportError("binary labels must be +-1", acknowledged=done)
            elif np.any(labels < 0) or np.any(labels >= self.arity):
                raise TransportError("multiclass labels out of range", acknowledged=done)
            out[start : start + block.shape[0]] = labels
            done += block.shape[0]
        return out

    def close(self) -> None:
        for handle in (self._writer, self._reader, self._sock):
            try:
                if handle is not None:
                    handle.close()
            except OSError:
                pass
        if self._proc is not None:
            self._proc.terminate()
            self._proc.wait(timeout=5)


# ---------------------------------------------------------------------------
# model construction: string specs, JSON files, and the random zoo
# ---------------------------------------------------------------------------

def _parity_table(n: int, members: Sequence[int], sign: int) -> Junta:
    k = len(members)
    idx = np.arange(1 << k)
    bits = np.zeros(1 << k, dtype=np.int64)
    for j in range(k):
        bits += (idx >> j) & 1
    inner = sign * np.where(bits % 2 == 0, 1, -1)
    return Junta(n, members, inner)


def _majority_table(n: int, members: Sequence[int]) -> Junta:
    k = len(members)
    if k % 2 == 0:
        raise InvalidSpecError("majority needs an odd number of coordinates")
    idx = np.arange(1 << k)
    ones = k - sum(((idx >> j) & 1 for j in range(k)))  # bits set mean -1
    inner = np.where(2 * ones > k, 1, -1).astype(np.int64)
    return Junta(n, members, inner)


def build_model(spec: str | dict, n: int | None = None) -> ModelOracle:
    """Construct a zoo model from a compact string or a parsed JSON object.

    String forms: ``constant:+1``, ``dictator:3``, ``parity:1,2,3``,
    ``xor:1,2`` (the fixed sign convention h(+1,+1) = -1, i.e. the negated
    parity), ``maj3``, ``majority:1,2,3``, ``ltf:w1,w2,...;b``, or
    ``file:path.json``. ``n`` embeds the model in a larger cube when the
    spec itself does not pin the dimension.
    """
    if isinstance(spec, dict):
        return _model_from_json(spec)
    if ":" in spec:
        kind, arg = spec.split(":", 1)
    else:
        kind, arg = spec, ""
    kind = kind.strip().lower()
    if kind == "file":
        with open(arg) as fh:
            return _model_from_json(json.load(fh))
    if kind == "constant":
        sign = 1 if arg.strip() in ("+1", "1", "") else -1
        return Junta(n or 1, (), np.array([sign]))
    if kind == "dictator":
        coord = int(arg)
        dim = n or coord
        return Junta(dim, (coord,), np.array([1, -1]))
    if kind in ("parity", "xor", "majority"):
        members = tuple(int(c) for c in arg.split(","))
        dim = n or max(members)
        if kind == "parity":
            return _parity_table(dim, members, +1)
        if kind == "xor":
            return _parity_table(dim, members, -1)
        return _majority_table(dim, members)
    if kind == "maj3":
        return _majority_table(n or 3, (1, 2, 3))
    if kind == "ltf":
        if ";" in arg:
            w_part, b_part = arg.split(";", 1)
            bias = float(b_part)
        else:
            w_part, bias = arg, 0.0
        weights = [float(v) for v in w_part.split(",")]
        if n is not None and n > len(weights):
            weights = weights + [0.0] * (n - len(weights))
        return LinearThreshold(weights, bias)
    raise InvalidSpecError(f"unknown model spec {spec!r}")


def _model_from_json(obj: dict) -> ModelOracle:
    kind = obj.get("kind")
    if kind == "lookup":
        return LookupTable(obj["table"], arity=int(obj.get("labels", 2)))
    if kind == "ltf":
        return LinearThreshold(obj["weights"], float(obj.get("bias", 0.0)))
    if kind == "junta":
        return Junta(
            int(obj["n"]), obj["members"], obj["table"], arity=int(obj.get("labels", 2))
        )
    if kind == "tree":
        def parse(node):
            if isinstance(node, dict):
                return StumpNode(
                    int(node["coordinate"]), parse(node["minus"]), parse(node["plus"])
                )
            return int(node)

        return DecisionStumpTree(int(obj["n"]), parse(obj["root"]))
    raise InvalidSpecError(f"unknown model kind {kind!r}")


def random_ltf(n: int, rng, sparse: int | None = None) -> LinearThreshold:
    g = rng.generator()
    w = g.normal(size=n)
    if sparse is not None:
        keep = g.choice(n, size=sparse, replace=False)
        mask = np.zeros(n)
        mask[keep] = 1.0
        w *= mask
    return LinearThreshold(w, float(g.normal() * 0.25))


def random_junta(n: int, k: int, rng) -> Junta:
    g = rng.generator()
    members = tuple(int(c) + 1 for c in g.choice(n, size=k, replace=False))
    inner = (1 - 2 * g.integers(0, 2, size=1 << k)).astype(np.int64)
    return Junta(n, members, inner)


def random_tree(n: int, depth: int, rng) -> DecisionStumpTree:
    g = rng.generator()

    def grow(d: int) -> StumpNode | int:
        if d == 0:
            return int(1 - 2 * g.integers(0, 2))
        coord = int(g.integers(1, n + 1))
        return StumpNode(coord, grow(d - 1), grow(d - 1))

    return DecisionStumpTree(n, grow(depth))


def random_lookup(n: int, rng) -> LookupTable:
    g = rng.generator()
    return LookupTable((1 - 2 * g.integers(0, 2, size=1 << n)).astype(np.int64))


def zoo_models(n: int, rng) -> list[tuple[str, ModelOracle]]:
    """The fixed test menagerie at dimension n: named deterministic models
    plus a few seeded random ones."""
    models: list[tuple[str, ModelOracle]] = [
        ("constant", build_model("constant:+1", n)),
        ("dictator-1", build_model("dictator:1", n)),
    ]
    if n >= 2:
        models.append(("parity-12", build_model("parity:1,2", n)))
        models.append(("xor-12", build_model("xor:1,2", n)))
    if n >= 3:
        models.append(("maj3", build_model("maj3", n)))
        models.append(("parity-123", build_model("parity:1,2,3", n)))
    models.append(("random-ltf", random_ltf(n, rng.split())))
    models.append(("random-junta", random_junta(n, min(3, n), rng.split())))
    models.append(("random-tree", random_tree(n, min(2, n), rng.split())))
    if n <= 10:
        models.append(("random-lookup", random_lookup(n, rng.split())))
    return models
