"""Grid chip topology: qubits, couplers, gate indexing, grouping patterns, windows.

Gate index convention (shared by every module):

* indices ``[0, M*N)`` are single-qubit gates, one per qubit in row-major
  order (qubit ``q`` sits at row ``q // N``, column ``q % N``);
* indices ``[M*N, 3*M*N - M - N)`` are two-qubit gates, one per coupler, in
  "h-then-v-row-major" order: all horizontal grid edges row by row, then all
  vertical grid edges row by row.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property

Pair = tuple[int, int]

COUPLER_ORDER = "h-then-v-row-major"
GROUP_FAMILIES: dict[str, tuple[str, str, str, str]] = {
    "ABCD": ("A", "B", "C", "D"),
    "EFGH": ("E", "F", "G", "H"),
}


@dataclass(frozen=True)
class ChipTopology:
    """An M x N qubit grid with nearest-neighbour couplers.

    ``crosstalk_pairs`` is the default microwave-crosstalk support
    (neighbours plus next-neighbours); sampled chip physics may extend it
    with longer-range pairs.
    """

    rows: int
    cols: int
    couplers: tuple[Pair, ...]
    neighbor_pairs: tuple[Pair, ...]
    next_neighbor_pairs: tuple[Pair, ...]
    crosstalk_pairs: tuple[Pair, ...]

    @property
    def n_qubits(self) -> int:
        return self.rows * self.cols

    @property
    def n_couplers(self) -> int:
        return len(self.couplers)

    @property
    def gate_count(self) -> int:
        return self.n_qubits + self.n_couplers

    def site(self, qubit: int) -> Pair:
        return divmod(qubit, self.cols)

    def qubit_at(self, row: int, col: int) -> int:
        return row * self.cols + col

    @cached_property
    def _coupler_lookup(self) -> dict[Pair, int]:
        return {pair: k for k, pair in enumerate(self.couplers)}

    def coupler_index(self, a: int, b: int) -> int:
        """Coupler index for the unordered qubit pair (a, b)."""
        key = (a, b) if a < b else (b, a)
        try:
            return self._coupler_lookup[key]
        except KeyError:
            raise ValueError(f"qubits {a} and {b} are not coupled") from None

    def gate_qubits(self, gate: int) -> tuple[int, ...]:
        """Qubit(s) acted on by a gate index."""
        nq = self.n_qubits
        if 0 <= gate < nq:
            return (gate,)
        if nq <= gate < self.gate_count:
            return self.couplers[gate - nq]
        raise ValueError(f"gate index {gate} outside [0, {self.gate_count})")

    def is_two_qubit(self, gate: int) -> bool:
        return gate >= self.n_qubits

    @cached_property
    def neighbors_of(self) -> tuple[tuple[int, ...], ...]:
        return _partner_lists(self.n_qubits, self.neighbor_pairs)

    @cached_property
    def next_neighbors_of(self) -> tuple[tuple[int, ...], ...]:
        return _partner_lists(self.n_qubits, self.next_neighbor_pairs)

    def with_crosstalk_pairs(self, pairs) -> "ChipTopology":
        canon = tuple(sorted((min(a, b), max(a, b)) for a, b in pairs))
        return replace(self, crosstalk_pairs=canon)


@dataclass(frozen=True)
class GroupPattern:
    """Partition of the couplers into four parallel-executable groups."""

    family: str
    assignment: dict[int, str]  # coupler index -> group label

    def groups(self) -> dict[str, tuple[int, ...]]:
        """Group label -> sorted coupler indices (empty groups included)."""
        out: dict[str, list[int]] = {label: [] for label in GROUP_FAMILIES[self.family]}
        for k in sorted(self.assignment):
            out[self.assignment[k]].append(k)
        return {label: tuple(v) for label, v in out.items()}


@dataclass(frozen=True)
class Window:
    """Square Chebyshev block of qubits centred on one qubit site.

    ``gate_set`` holds the single-qubit gates of every qubit in the block and
    the two-qubit gates whose couplers have both endpoints inside.
    """

    center: int
    radius: int
    gate_set: tuple[int, ...]


def _partner_lists(n_qubits: int, pairs) -> tuple[tuple[int, ...], ...]:
    out: list[list[int]] = [[] for _ in range(n_qubits)]
    for a, b in pairs:
        out[a].append(b)
        out[b].append(a)
    return tuple(tuple(sorted(p)) for p in out)


def build_grid(rows: int, cols: int) -> ChipTopology:
    """Construct the M x N grid topology with canonical gate indexing."""
    if not isinstance(rows, int) or not isinstance(cols, int):
        raise ValueError("rows and cols must be integers")
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {rows}x{cols}")

    def q(r: int, c: int) -> int:
        return r * cols + c

    horizontal = [(q(r, c), q(r, c + 1)) for r in range(rows) for c in range(cols - 1)]
    vertical = [(q(r, c), q(r + 1, c)) for r in range(rows - 1) for c in range(cols)]
    couplers = tuple(horizontal + vertical)

    next_neighbor = []
    for r in range(rows):
        for c in range(cols):
            a = q(r, c)
            # Manhattan distance 2: diagonal and straight two-step partners.
            for dr, dc in ((0, 2), (2, 0), (1, 1), (1, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    b = q(rr, cc)
                    next_neighbor.append((min(a, b), max(a, b)))
    next_neighbor = tuple(sorted(set(next_neighbor)))

    crosstalk = tuple(sorted(set(couplers) | set(next_neighbor)))
    return ChipTopology(
        rows=rows,
        cols=cols,
        couplers=couplers,
        neighbor_pairs=couplers,
        next_neighbor_pairs=next_neighbor,
        crosstalk_pairs=crosstalk,
    )


def assign_groups(topology: ChipTopology, family: str) -> GroupPattern:
    """Partition couplers into four matchings.

    ABCD staggers by site parity (r+c): horizontal couplers alternate A/B
    along each row with the stagger shifting row to row, vertical couplers
    alternate C/D likewise.  EFGH is the unstaggered complement: horizontal
    couplers split purely by column parity (E/F), vertical by row parity
    (G/H).  The two families give different partitions on any chip with at
    least two couplers in each direction.
    """
    if family not in GROUP_FAMILIES:
        raise ValueError(f"unknown group family {family!r}, expected ABCD or EFGH")
    h0, h1, v0, v1 = GROUP_FAMILIES[family]
    assignment: dict[int, str] = {}
    for k, (a, b) in enumerate(topology.couplers):
        ra, ca = topology.site(a)
        rb, cb = topology.site(b)
        if ra == rb:  # horizontal coupler, identified by its left site
            key = (ra + ca) % 2 if family == "ABCD" else ca % 2
            assignment[k] = h0 if key == 0 else h1
        else:  # vertical coupler, identified by its top site
            key = (ra + ca) % 2 if family == "ABCD" else ra % 2
            assignment[k] = v0 if key == 0 else v1
    return GroupPattern(family=family, assignment=assignment)


def count_parallel_scenarios(topology: ChipTopology, max_boundary_bits: int = 20) -> int:
    """Exact number of matchings of the coupler grid (empty set included).

    Transfer-matrix dynamic programming, cell by cell in column-major order.
    The state is a bitmask over one column boundary: bit r set means the most
    recently processed cell of row r is already matched.  Counts are exact
    arbitrary-precision integers.
    """
    m, n = topology.rows, topology.cols
    if m > n:
        m, n = n, m
    if m > max_boundary_bits:
        raise ValueError(
            f"boundary state space 2^{m} exceeds the 2^{max_boundary_bits} limit"
        )
    size = 1 << m
    counts = [0] * size
    counts[0] = 1
    for col in range(n):
        for row in range(m):
            nxt = [0] * size
            bit = 1 << row
            prev_bit = bit >> 1
            for state, c in enumerate(counts):
                if not c:
                    continue
                # leave (row, col) unmatched
                nxt[state & ~bit] += c
                # match it westwards to (row, col-1)
                if col > 0 and not state & bit:
                    nxt[state | bit] += c
                # match it northwards to (row-1, col)
                if row > 0 and not state & prev_bit:
                    nxt[state | bit | prev_bit] += c
            counts = nxt
    return sum(counts)


def make_window(topology: ChipTopology, center: int, radius: int) -> Window:
    """Window of Chebyshev ``radius`` around a qubit site, clipped at edges."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if not 0 <= center < topology.n_qubits:
        raise ValueError(f"center {center} is not a qubit site")
    r0, c0 = topology.site(center)
    rows = range(max(0, r0 - radius), min(topology.rows, r0 + radius + 1))
    cols = range(max(0, c0 - radius), min(topology.cols, c0 + radius + 1))
    block = {topology.qubit_at(r, c) for r in rows for c in cols}
    gates = sorted(block)
    nq = topology.n_qubits
    for k, (a, b) in enumerate(topology.couplers):
        if a in block and b in block:
            gates.append(nq + k)
    return Window(center=center, radius=radius, gate_set=tuple(gates))


def enumerate_windows(topology: ChipTopology, radius: int) -> list[Window]:
    """One window per qubit site, in row-major center order.

    Every gate belongs to at least one window for radius >= 1; radius-0
    windows hold only their center's single-qubit gate.
    """
    return [make_window(topology, q, radius) for q in range(topology.n_qubits)]


def window_ring_gates(topology: ChipTopology, window: Window) -> tuple[int, ...]:
    """Gates in the one-qubit-wider window but not in ``window`` itself."""
    outer = make_window(topology, window.center, window.radius + 1)
    inner = set(window.gate_set)
    return tuple(g for g in outer.gate_set if g not in inner)


def topology_to_json(topology: ChipTopology) -> str:
    doc = {
        "rows": topology.rows,
        "cols": topology.cols,
        "coupler_order": COUPLER_ORDER,
        "crosstalk_pairs": [list(p) for p in topology.crosstalk_pairs],
    }
    return json.dumps(doc, indent=2) + "\n"


def topology_from_json(text: str) -> ChipTopology:
    doc = json.loads(text)
    if doc.get("coupler_order") != COUPLER_ORDER:
        raise ValueError(f"unsupported coupler_order {doc.get('coupler_order')!r}")
    topo = build_grid(int(doc["rows"]), int(doc["cols"]))
    pairs = [tuple(p) for p in doc["crosstalk_pairs"]]
    return topo.with_crosstalk_pairs(pairs)
