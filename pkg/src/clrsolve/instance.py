"""Instance model for capacitated location routing.

An instance consists of depots (with opening costs and optional per-vehicle
fixed costs), customers (with positive demands), a vehicle capacity, and a
metric travel cost. Costs come either from plane coordinates (Euclidean,
double precision, never rounded) or from an explicit symmetric matrix.

The module also provides the two derived views the solvers need:

* ``build_cost_matrix`` folds each depot's per-vehicle fixed cost ``F`` into
  the metric by adding ``F/2`` to every edge incident to the depot (a tour
  uses exactly two such edges), and validates the triangle inequality.
* ``derive_ufl`` builds the scaled facility-location instance with edge
  costs ``(2/k)*w`` and opening costs ``alpha*phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import MetricViolation, ParseError, ValidationError

METRIC_TOL = 1e-9


@dataclass(frozen=True)
class Depot:
    id: int
    x: Optional[float]
    y: Optional[float]
    opening_cost: float
    vehicle_fixed_cost: float = 0.0


@dataclass(frozen=True)
class Customer:
    id: int
    x: Optional[float]
    y: Optional[float]
    demand: float


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Symmetric metric costs over all vertices, addressed by vertex id.

    Rows/columns follow ``ids`` (depots first, then customers, in instance
    order). Entries are validated to be symmetric with a zero diagonal; the
    triangle inequality is validated by :func:`build_cost_matrix`.
    """

    ids: tuple[int, ...]
    entries: np.ndarray
    _pos: dict[int, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        n = len(self.ids)
        if self.entries.shape != (n, n):
            raise ValidationError("cost matrix shape does not match vertex count")
        if np.any(self.entries < 0):
            raise ValidationError("cost matrix has negative entries")
        if np.any(np.abs(self.entries - self.entries.T) > METRIC_TOL):
            raise ValidationError("cost matrix is not symmetric")
        if np.any(np.abs(np.diag(self.entries)) > 0):
            raise ValidationError("cost matrix diagonal is not zero")
        object.__setattr__(self, "_pos", {v: i for i, v in enumerate(self.ids)})

    @property
    def size(self) -> int:
        return len(self.ids)

    def cost(self, a: int, b: int) -> float:
        return float(self.entries[self._pos[a], self._pos[b]])

    def index_of(self, vertex_id: int) -> int:
        return self._pos[vertex_id]

    def submatrix(self, ids: Sequence[int]) -> np.ndarray:
        idx = [self._pos[v] for v in ids]
        return self.entries[np.ix_(idx, idx)]

    def check_triangle(self, tol: float = METRIC_TOL) -> None:
        """Raise :class:`MetricViolation` on the worst violating triple."""
        w = self.entries
        worst = 0.0
        worst_triple = None
        for j in range(len(self.ids)):
            slack = w - (w[:, j][:, None] + w[j, :][None, :])
            k = int(np.argmax(slack))
            i, l = divmod(k, len(self.ids))
            if slack[i, l] > worst:
                worst = float(slack[i, l])
                worst_triple = (self.ids[i], self.ids[j], self.ids[l])
        if worst > tol and worst_triple is not None:
            raise MetricViolation(*worst_triple, slack=worst)


@dataclass(frozen=True, eq=False)
class ClrInstance:
    """A capacitated location routing instance.

    Invariants enforced at construction: positive demands and capacity,
    disjoint depot/customer id spaces, and (when given) an explicit base
    matrix that is symmetric with a zero diagonal. Triangle-inequality
    validation happens in :func:`build_cost_matrix`, which is the only way
    costs are consumed.
    """

    depots: tuple[Depot, ...]
    customers: tuple[Customer, ...]
    capacity: float
    explicit_costs: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if not self.depots:
            raise ValidationError("instance needs at least one depot")
        if self.capacity <= 0:
            raise ValidationError("capacity must be positive")
        for c in self.customers:
            if c.demand <= 0:
                raise ValidationError(f"customer {c.id} has nonpositive demand")
        for d in self.depots:
            if d.opening_cost < 0:
                raise ValidationError(f"depot {d.id} has negative opening cost")
            if d.vehicle_fixed_cost < 0:
                raise ValidationError(f"depot {d.id} has negative fixed cost")
        depot_ids = [d.id for d in self.depots]
        cust_ids = [c.id for c in self.customers]
        if len(set(depot_ids)) != len(depot_ids) or len(set(cust_ids)) != len(cust_ids):
            raise ValidationError("duplicate vertex ids")
        if set(depot_ids) & set(cust_ids):
            raise ValidationError("depot and customer id spaces overlap")
        if self.explicit_costs is not None:
            m = np.asarray(self.explicit_costs, dtype=float)
            n = len(depot_ids) + len(cust_ids)
            if m.shape != (n, n):
                raise ValidationError("explicit cost matrix has wrong shape")
            if np.any(np.abs(m - m.T) > METRIC_TOL):
                raise ValidationError("explicit cost matrix is not symmetric")
            if np.any(np.abs(np.diag(m)) > 0):
                raise ValidationError("explicit cost matrix diagonal is not zero")
            object.__setattr__(self, "explicit_costs", m)
        else:
            missing = [v.id for v in (*self.depots, *self.customers) if v.x is None or v.y is None]
            if missing:
                raise ValidationError(f"vertices without coordinates and no matrix: {missing}")

    @property
    def n_depots(self) -> int:
        return len(self.depots)

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def depot_ids(self) -> tuple[int, ...]:
        return tuple(d.id for d in self.depots)

    @property
    def customer_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.customers)

    @property
    def vertex_ids(self) -> tuple[int, ...]:
        return self.depot_ids + self.customer_ids

    def demand(self, customer_id: int) -> float:
        return self._demands()[customer_id]

    def _demands(self) -> dict[int, float]:
        return {c.id: c.demand for c in self.customers}

    def demands(self) -> dict[int, float]:
        return self._demands()

    def opening_cost(self, depot_id: int) -> float:
        return self._phi()[depot_id]

    def _phi(self) -> dict[int, float]:
        return {d.id: d.opening_cost for d in self.depots}

    def opening_costs(self) -> dict[int, float]:
        return self._phi()

    def total_demand(self) -> float:
        return sum(c.demand for c in self.customers)


def build_cost_matrix(inst: ClrInstance) -> CostMatrix:
    """Metric over all vertices with vehicle fixed costs folded in.

    The base costs (Euclidean or explicit) gain ``F_u/2`` on every edge
    incident to depot ``u``. The shift cannot itself break the triangle
    inequality, so any :class:`MetricViolation` points at the base matrix.
    """
    ids = inst.vertex_ids
    if inst.explicit_costs is not None:
        base = inst.explicit_costs.copy()
    else:
        pts = np.array(
            [(v.x, v.y) for v in (*inst.depots, *inst.customers)], dtype=float
        )
        diff = pts[:, None, :] - pts[None, :, :]
        base = np.sqrt((diff ** 2).sum(axis=2))
    for i, d in enumerate(inst.depots):
        if d.vehicle_fixed_cost:
            half = d.vehicle_fixed_cost / 2.0
            base[i, :] += half
            base[:, i] += half
            base[i, i] = 0.0
    matrix = CostMatrix(ids=ids, entries=base)
    matrix.check_triangle()
    return matrix


@dataclass(frozen=True, eq=False)
class UflInstance:
    """Facility-location view of a routing instance.

    Edge costs are ``(2/k)`` times the routing metric and opening costs are
    ``alpha`` times the original ones; demands are copied unchanged.
    """

    source: ClrInstance
    costs: CostMatrix
    opening_costs: dict[int, float]
    alpha: float

    @property
    def depot_ids(self) -> tuple[int, ...]:
        return self.source.depot_ids

    @property
    def customer_ids(self) -> tuple[int, ...]:
        return self.source.customer_ids

    def demand(self, customer_id: int) -> float:
        return self.source.demand(customer_id)


def derive_ufl(
    inst: ClrInstance, alpha: float, cost_matrix: Optional[CostMatrix] = None
) -> UflInstance:
    """Scale the instance into its facility-location relaxation."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    w = cost_matrix if cost_matrix is not None else build_cost_matrix(inst)
    scaled = CostMatrix(ids=w.ids, entries=(2.0 / inst.capacity) * w.entries)
    phi = {d.id: alpha * d.opening_cost for d in inst.depots}
    return UflInstance(source=inst, costs=scaled, opening_costs=phi, alpha=alpha)


# ---------------------------------------------------------------------------
# Canonical text format
#
#   CLR <m> <n> <k>
#   D <id> <x> <y> <phi> <F>      (m lines)
#   C <id> <x> <y> <demand>       (n lines)
#   MATRIX                        (optional; (m+n)^2 costs, row-major by id)
#
# ``#`` starts a comment anywhere on a line.
# ---------------------------------------------------------------------------


def _strip(line: str) -> str:
    cut = line.find("#")
    if cut >= 0:
        line = line[:cut]
    return line.strip()


def parse_canonical(path: str | Path) -> ClrInstance:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = [(i + 1, _strip(raw)) for i, raw in enumerate(lines)]
    rows = [(no, text) for no, text in rows if text]
    if not rows:
        raise ParseError(1, "empty file")
    pos = 0

    no, text = rows[pos]
    head = text.split()
    if len(head) != 4 or head[0] != "CLR":
        raise ParseError(no, "expected header 'CLR <m> <n> <k>'")
    try:
        m, n, k = int(head[1]), int(head[2]), float(head[3])
    except ValueError:
        raise ParseError(no, "bad header numbers") from None
    pos += 1

    depots: list[Depot] = []
    customers: list[Customer] = []
    for _ in range(m):
        if pos >= len(rows):
            raise ParseError(len(lines), "missing depot line")
        no, text = rows[pos]
        f = text.split()
        if len(f) != 6 or f[0] != "D":
            raise ParseError(no, "expected 'D <id> <x> <y> <phi> <F>'")
        try:
            depots.append(
                Depot(int(f[1]), float(f[2]), float(f[3]), float(f[4]), float(f[5]))
            )
        except ValueError:
            raise ParseError(no, "bad depot fields") from None
        pos += 1
    for _ in range(n):
        if pos >= len(rows):
            raise ParseError(len(lines), "missing customer line")
        no, text = rows[pos]
        f = text.split()
        if len(f) != 5 or f[0] != "C":
            raise ParseError(no, "expected 'C <id> <x> <y> <demand>'")
        try:
            customers.append(Customer(int(f[1]), float(f[2]), float(f[3]), float(f[4])))
        except ValueError:
            raise ParseError(no, "bad customer fields") from None
        pos += 1

    explicit = None
    if pos < len(rows):
        no, text = rows[pos]
        if text != "MATRIX":
            raise ParseError(no, f"unexpected trailing content: {text!r}")
        pos += 1
        values: list[float] = []
        for no, text in rows[pos:]:
            for tok in text.split():
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ParseError(no, f"bad matrix entry {tok!r}") from None
        total = m + n
        if len(values) != total * total:
            raise ParseError(
                rows[-1][0], f"matrix needs {total * total} entries, got {len(values)}"
            )
        by_id = sorted([d.id for d in depots] + [c.id for c in customers])
        raw = np.array(values, dtype=float).reshape(total, total)
        # Rows in the file run in ascending id order; remap to instance order.
        order = [by_id.index(v) for v in [d.id for d in depots] + [c.id for c in customers]]
        explicit = raw[np.ix_(order, order)]

    try:
        return ClrInstance(
            depots=tuple(depots),
            customers=tuple(customers),
            capacity=k,
            explicit_costs=explicit,
            name=path.stem,
        )
    except ValidationError as exc:
        raise ValidationError(f"{path.name}: {exc}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


def write_canonical(inst: ClrInstance, path: str | Path) -> None:
    """Write the instance in canonical form (deterministic byte-for-byte)."""
    out = [f"CLR {inst.n_depots} {inst.n_customers} {_fmt(inst.capacity)}"]
    for d in inst.depots:
        out.append(
            f"D {d.id} {_fmt(d.x or 0.0)} {_fmt(d.y or 0.0)} "
            f"{_fmt(d.opening_cost)} {_fmt(d.vehicle_fixed_cost)}"
        )
    for c in inst.customers:
        out.append(f"C {c.id} {_fmt(c.x or 0.0)} {_fmt(c.y or 0.0)} {_fmt(c.demand)}")
    if inst.explicit_costs is not None:
        out.append("MATRIX")
        ids = inst.vertex_ids
        order = np.argsort(np.array(ids))
        mat = inst.explicit_costs[np.ix_(order, order)]
        for row in mat:
            out.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Benchmark importers
#
# The classic 45-instance collection circulates as plain numeric files with
# the following section order (blank lines between sections vary by mirror,
# so we parse the token stream and require the count to match exactly):
#
#   <n customers>
#   <m depots>
#   m lines: depot x y
#   n lines: customer x y
#   vehicle capacity
#   m lines: depot capacity          (ignored: depots are uncapacitated here)
#   n lines: customer demand
#   m lines: depot opening cost
#   route opening cost               (per-vehicle fixed cost, same for all)
#   cost type flag                   (0 = historic truncated costs, 1 = real;
#                                     parsed but distances are kept exact)
#
# Files that do not match this token count exactly are refused rather than
# guessed at.
# ---------------------------------------------------------------------------


def _parse_benchmark_tokens(path: Path) -> ClrInstance:
    tokens: list[tuple[int, str]] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = _strip(raw)
        for tok in text.split():
            tokens.append((lineno, tok))
    if len(tokens) < 2:
        raise ParseError(1, "file too short for a benchmark instance")

    cursor = 0

    def take(count: int) -> list[tuple[int, str]]:
        nonlocal cursor
        if cursor + count > len(tokens):
            raise ParseError(tokens[-1][0], "file ends before all sections are read")
        chunk = tokens[cursor : cursor + count]
        cursor += count
        return chunk

    def nums(count: int) -> list[float]:
        out = []
        for lineno, tok in take(count):
            try:
                out.append(float(tok))
            except ValueError:
                raise ParseError(lineno, f"expected a number, got {tok!r}") from None
        return out

    n = int(nums(1)[0])
    m = int(nums(1)[0])
    if n <= 0 or m <= 0:
        raise ParseError(tokens[0][0], "vertex counts must be positive")
    depot_xy = nums(2 * m)
    cust_xy = nums(2 * n)
    capacity = nums(1)[0]
    nums(m)  # depot capacities; not part of this model
    demands = nums(n)
    opening = nums(m)
    route_cost = nums(1)[0]
    nums(1)  # cost type flag
    if cursor != len(tokens):
        raise ParseError(
            tokens[cursor][0],
            f"{len(tokens) - cursor} unexpected trailing tokens; refusing ambiguous layout",
        )

    depots = tuple(
        Depot(i, depot_xy[2 * i], depot_xy[2 * i + 1], opening[i], route_cost)
        for i in range(m)
    )
    customers = tuple(
        Customer(m + j, cust_xy[2 * j], cust_xy[2 * j + 1], demands[j]) for j in range(n)
    )
    try:
        return ClrInstance(
            depots=depots, customers=customers, capacity=capacity, name=path.stem
        )
    except ValidationError as exc:
        raise ValidationError(f"{path.name}: {exc}") from exc


def parse_instance(path: str | Path, format: str = "canonical") -> ClrInstance:
    """Load an instance file in the declared layout and validate its metric."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "canonical":
        inst = parse_canonical(path)
    elif format in ("barreto", "tuzun"):
        inst = _parse_benchmark_tokens(path)
    else:
        raise ValidationError(f"unknown instance format {format!r}")
    build_cost_matrix(inst)  # metric validation on every load
    return inst
