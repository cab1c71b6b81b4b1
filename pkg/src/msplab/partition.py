"""Edge partitions of complete graphs and the algorithms that attack them.

Covers the random-ordering partition rule, validity characterizations
(triangle condition vs. brute-force cycle shattering), the parallel-Dynkin
runner, the deterministic adversary weights, the planted broom, and the
edge-degree machinery used by the low-degree counting bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

import numpy as np

from .engine import ArrivalSchedule, Decision, SecretaryAlgorithm
from .errors import CapacityError, MSPLabError, ParameterError, ValidityBreachError
from .matroids import (
    GraphicMatroid,
    complete_graph_edge_index,
    complete_graph_edges,
    weight_key,
)
from .rng import BROOM_TAG, PARTITION_TAG, TrialSeed, stream_array, stream_value

CYCLE_ENUM_CAP = 7


@dataclass(frozen=True)
class EdgePartition:
    """Assignment of every K_n edge (row-major upper-triangle ids) to a part."""

    n: int
    part_of_edge: tuple[int, ...]

    def __post_init__(self):
        m = self.n * (self.n - 1) // 2
        if len(self.part_of_edge) != m:
            raise ParameterError(f"partition must assign all {m} edges of K_{self.n}")

    @property
    def m(self) -> int:
        return len(self.part_of_edge)

    def part(self, u: int, v: int) -> int:
        return self.part_of_edge[complete_graph_edge_index(self.n, u, v)]

    def parts(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for e, p in enumerate(self.part_of_edge):
            out.setdefault(p, []).append(e)
        return out

    def as_array(self) -> np.ndarray:
        return np.array(self.part_of_edge, dtype=np.int64)

    @staticmethod
    def from_parts(n: int, parts: list[list[tuple[int, int]]]) -> "EdgePartition":
        m = n * (n - 1) // 2
        assign = [-1] * m
        for idx, part in enumerate(parts):
            for u, v in part:
                e = complete_graph_edge_index(n, u, v)
                if assign[e] != -1:
                    raise ParameterError(f"edge ({u},{v}) assigned twice")
                assign[e] = idx
        if any(a == -1 for a in assign):
            missing = [k for k, a in enumerate(assign) if a == -1]
            raise ParameterError(f"{len(missing)} edges of K_{n} left unassigned")
        return EdgePartition(n, tuple(assign))


def complete_graph_matroid(n: int) -> GraphicMatroid:
    return GraphicMatroid(n, complete_graph_edges(n))


def single_part_partition(n: int) -> EdgePartition:
    return EdgePartition(n, tuple([0] * (n * (n - 1) // 2)))


def singleton_parts_partition(n: int) -> EdgePartition:
    """Every edge its own part: maximally shattered (invalid for n >= 3)."""
    m = n * (n - 1) // 2
    return EdgePartition(n, tuple(range(m)))


def korula_pal_from_order(n: int, sigma: list[int]) -> EdgePartition:
    """Partition induced by a vertex ordering: edge {u,v} goes to the part
    of its sigma-earlier endpoint."""
    if sorted(sigma) != list(range(1, n + 1)) and sorted(sigma) != list(range(n)):
        raise ParameterError("sigma must be a permutation of the vertices")
    assign = []
    for u, v in complete_graph_edges(n):
        assign.append(u if sigma[u] < sigma[v] else v)
    return EdgePartition(n, tuple(assign))


def korula_pal_partition(n: int, seed: TrialSeed) -> EdgePartition:
    """Sample the random-vertex-ordering partition; the ordering is the rank
    order of one splitmix64 key per vertex (ties by vertex id)."""
    keys = stream_array(seed.substream(PARTITION_TAG), n)
    assign = []
    for u, v in complete_graph_edges(n):
        ku, kv = int(keys[u]), int(keys[v])
        assign.append(u if (ku, u) < (kv, v) else v)
    return EdgePartition(n, tuple(assign))


def find_shattered_triangle(p: EdgePartition) -> tuple[int, int, int] | None:
    """First vertex triple whose three edges land in three distinct parts."""
    for a, b, c in combinations(range(p.n), 3):
        x, y, z = p.part(a, b), p.part(a, c), p.part(b, c)
        if x != y and y != z and x != z:
            return (a, b, c)
    return None


def validate_partition_triangles(p: EdgePartition) -> bool:
    """Valid iff every triangle has at least two edges in one part."""
    return find_shattered_triangle(p) is None


def validate_partition_bruteforce(p: EdgePartition) -> bool:
    """Valid iff no cycle of any length has all edges in distinct parts.

    Enumerates every simple cycle of K_n, so capped at n = 7.
    """
    if p.n > CYCLE_ENUM_CAP:
        raise CapacityError(f"cycle enumeration capped at n = {CYCLE_ENUM_CAP}")
    for size in range(3, p.n + 1):
        for verts in combinations(range(p.n), size):
            first = verts[0]
            for rest in permutations(verts[1:]):
                if size > 3 and rest[0] > rest[-1]:
                    continue  # each cycle counted once per direction
                cycle = (first,) + rest
                parts = set()
                shattered = True
                for i in range(size):
                    q = p.part(cycle[i], cycle[(i + 1) % size])
                    if q in parts:
                        shattered = False
                        break
                    parts.add(q)
                if shattered:
                    return False
    return True


def dynkin_winner(
    elems: list[int],
    weights,
    schedule: ArrivalSchedule,
    t_threshold: int,
) -> int | None:
    """Element picked by the single-choice rule among ``elems`` under the
    global clock: first post-threshold arrival beating every earlier one."""
    order = sorted(elems, key=lambda e: (int(schedule.times[e]), e))
    best_key = None
    for e in order:
        key = weight_key(weights, e)
        if best_key is None or key < best_key:
            if int(schedule.times[e]) > t_threshold:
                return e
            best_key = key
    return None


def run_partition_dynkin(
    p: EdgePartition,
    weights,
    schedule: ArrivalSchedule,
    t_threshold: int,
) -> frozenset:
    """One parallel-Dynkin trial: the union of per-part selections.

    Raises ValidityBreachError if the union is dependent, which certifies
    that the partition was not valid.
    """
    accepted = []
    for elems in p.parts().values():
        winner = dynkin_winner(elems, weights, schedule, t_threshold)
        if winner is not None:
            accepted.append(winner)
    matroid = complete_graph_matroid(p.n)
    if not matroid.is_independent(accepted):
        raise ValidityBreachError(
            f"parallel Dynkin output {sorted(accepted)} contains a cycle; partition is invalid"
        )
    return frozenset(accepted)


class PartitionDynkinAlgorithm(SecretaryAlgorithm):
    """Engine adapter: parallel Dynkin on a fixed partition."""

    framework = False

    def __init__(self, partition: EdgePartition):
        self.partition = partition
        self.name = "partition-dynkin"

    def start(self, matroid, weights, t_threshold, seed=None):
        self.weights = weights
        self.t_threshold = t_threshold
        self._best: dict[int, tuple] = {}
        self._done: set[int] = set()

    def on_arrival(self, elem, weight, time_u64):
        part = self.partition.part_of_edge[elem]
        key = weight_key(self.weights, elem)
        prev = self._best.get(part)
        is_best = prev is None or key < prev
        if is_best:
            self._best[part] = key
        if time_u64 <= self.t_threshold:
            return Decision.SAMPLE, (), ()
        if is_best and part not in self._done:
            self._done.add(part)
            return Decision.ACCEPT, (elem,), ()
        return Decision.REJECT, (), ()


class KorulaPalAlgorithm(SecretaryAlgorithm):
    """Engine adapter: resample the vertex-ordering partition per trial from
    the trial seed, then run parallel Dynkin."""

    framework = False
    name = "korula-pal"

    def __init__(self, n_vertices: int):
        self.n_vertices = n_vertices

    def start(self, matroid, weights, t_threshold, seed=None):
        if seed is None:
            raise ParameterError("korula-pal needs the trial seed for its ordering")
        self._inner = PartitionDynkinAlgorithm(korula_pal_partition(self.n_vertices, seed))
        self._inner.start(matroid, weights, t_threshold, seed)
        self.partition = self._inner.partition

    def on_arrival(self, elem, weight, time_u64):
        return self._inner.on_arrival(elem, weight, time_u64)


def deterministic_adversary_weights(p: EdgePartition) -> tuple[list[Fraction], list[int]]:
    """Weights that defeat a fixed valid partition: weight 1 on a spanning
    forest inside one big part, 0 elsewhere.

    A valid partition with nonempty parts has at most n-1 parts, so some
    part holds at least n/2 edges; a spanning forest of that part's induced
    graph has at least sqrt(n/2)/2 edges, all fed to one Dynkin instance.
    """
    parts = p.parts()
    if not parts:
        raise ParameterError("partition has no parts")
    best = max(parts.values(), key=len)
    if 2 * len(best) < p.n:
        raise MSPLabError(
            "no part holds n/2 edges; the partition must have more than n-1 "
            "nonempty parts and therefore cannot be valid"
        )
    edges = complete_graph_edges(p.n)
    parent = list(range(p.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    forest = []
    for e in sorted(best):
        u, v = edges[e]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            forest.append(e)
    weights = [Fraction(0)] * p.m
    for e in forest:
        weights[e] = Fraction(1)
    return weights, forest


@dataclass(frozen=True)
class BroomInstance:
    """Two weight-1 stars joined by a weight-0 handle."""

    n: int
    handle: tuple[int, int]
    xs: tuple[int, ...]
    ys: tuple[int, ...]

    @property
    def leg_ids(self) -> list[int]:
        u, v = self.handle
        legs = [complete_graph_edge_index(self.n, u, x) for x in self.xs]
        legs += [complete_graph_edge_index(self.n, v, y) for y in self.ys]
        return legs

    @property
    def handle_id(self) -> int:
        return complete_graph_edge_index(self.n, *self.handle)


def plant_broom(n: int, seed: TrialSeed) -> tuple[list[Fraction], BroomInstance]:
    """Plant a random broom in K_n: random handle edge, the other vertices
    split evenly into the two star sides, legs weight 1, all else 0."""
    if n < 4 or n % 2:
        raise ParameterError("broom needs an even vertex count >= 4")
    m = n * (n - 1) // 2
    bseed = seed.substream(BROOM_TAG)
    handle_idx = stream_value(bseed, 0) % m
    u, v = complete_graph_edges(n)[handle_idx]
    side_keys = stream_array(bseed, n, start=1)
    others = sorted((z for z in range(n) if z != u and z != v), key=lambda z: (int(side_keys[z]), z))
    half = (n - 2) // 2
    xs = tuple(sorted(others[:half]))
    ys = tuple(sorted(others[half:]))
    inst = BroomInstance(n, (u, v), xs, ys)
    weights = [Fraction(0)] * m
    for e in inst.leg_ids:
        weights[e] = Fraction(1)
    return weights, inst


def edge_degree(p: EdgePartition, e: int) -> int:
    """Within-part degree of an edge: incident same-part edges at both
    endpoints, counting the edge itself once."""
    edges = complete_graph_edges(p.n)
    u, v = edges[e]
    part = p.part_of_edge[e]
    deg = 0
    for f, q in enumerate(p.part_of_edge):
        if q != part:
            continue
        a, b = edges[f]
        deg += (a == u or b == u) + (a == v or b == v)
    return deg - 1


def all_edge_degrees(p: EdgePartition) -> np.ndarray:
    """Vector of within-part degrees, computed in one pass."""
    edges = complete_graph_edges(p.n)
    deg_pv: dict[tuple[int, int], int] = {}
    for f, q in enumerate(p.part_of_edge):
        a, b = edges[f]
        deg_pv[(q, a)] = deg_pv.get((q, a), 0) + 1
        deg_pv[(q, b)] = deg_pv.get((q, b), 0) + 1
    out = np.zeros(p.m, dtype=np.int64)
    for f, q in enumerate(p.part_of_edge):
        a, b = edges[f]
        out[f] = deg_pv[(q, a)] + deg_pv[(q, b)] - 1
    return out


def count_low_degree(p: EdgePartition, degree_cutoff) -> int:
    """Number of edges with within-part degree strictly below the cutoff
    (an edge is high-degree when its degree reaches the cutoff)."""
    return int(np.sum(all_edge_degrees(p) < degree_cutoff))


# ---------------------------------------------------------------------------
# Partition file format: one line per part, space-separated "u-v" tokens
# ---------------------------------------------------------------------------


def parse_partition_file(text: str, n: int | None = None) -> EdgePartition:
    parts: list[list[tuple[int, int]]] = []
    max_vertex = -1
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        part = []
        for token in line.split():
            try:
                u_s, v_s = token.split("-")
                u, v = int(u_s), int(v_s)
            except ValueError as exc:
                raise ParameterError(f"bad edge token {token!r}; expected 'u-v'") from exc
            part.append((u, v))
            max_vertex = max(max_vertex, u, v)
        parts.append(part)
    if n is None:
        n = max_vertex + 1
    return EdgePartition.from_parts(n, parts)


def format_partition_file(p: EdgePartition) -> str:
    edges = complete_graph_edges(p.n)
    lines = []
    for _, elems in sorted(p.parts().items()):
        lines.append(" ".join(f"{edges[e][0]}-{edges[e][1]}" for e in sorted(elems)))
    return "\n".join(lines) + "\n"
