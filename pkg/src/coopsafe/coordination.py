"""Priority-based rewards and the exact solver for the avoidance-assignment MIP.

The MIP picks a binary matrix ``U`` maximizing ``sum c_ij u_ij`` subject to

* ``u_ij + u_ji <= 1`` (at most one vehicle of a pair avoids the other),
* ``sum_j u_ij <= 1`` (each vehicle avoids at most one other),
* optional side constraints ``u_ab + u_cd <= 1`` added by the SAMV step.

Forbidden entries (the diagonal, inactive vehicles) are kept as a boolean mask
rather than a floating ``-inf`` so they can never be selected by arithmetic
accident.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

Cell = tuple[int, int]


class _NegInf:
    """Marker for a reward entry that forbids the corresponding assignment."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NEG_INF"


NEG_INF = _NegInf()


@dataclass
class RewardMatrix:
    values: np.ndarray
    blocked: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        self.blocked = np.array(self.blocked, dtype=bool)
        self.values[self.blocked] = 0.0
        if not np.all(np.isfinite(self.values)):
            raise ValueError("finite reward entries must be finite")

    @classmethod
    def from_nested(cls, rows) -> "RewardMatrix":
        """Build from nested lists where ``None``, ``NEG_INF`` or ``-inf`` mark blocked cells."""
        n = len(rows)
        vals = np.zeros((n, n))
        blocked = np.zeros((n, n), dtype=bool)
        for i, row in enumerate(rows):
            for j, c in enumerate(row):
                if c is None or c is NEG_INF or (isinstance(c, float) and np.isneginf(c)):
                    blocked[i, j] = True
                else:
                    vals[i, j] = c
        return cls(vals, blocked)

    @property
    def n(self) -> int:
        return len(self.values)

    def __getitem__(self, ij):
        return NEG_INF if self.blocked[ij] else float(self.values[ij])

    def as_float(self) -> np.ndarray:
        """Copy with ``-inf`` in blocked cells, for display only."""
        out = self.values.copy()
        out[self.blocked] = -np.inf
        return out

    def copy(self) -> "RewardMatrix":
        return RewardMatrix(self.values.copy(), self.blocked.copy())

    def greater(self, a: Cell, b: Cell) -> bool:
        """``c_a > c_b`` with blocked entries ordered below every finite value."""
        if self.blocked[a]:
            return False
        if self.blocked[b]:
            return True
        return self.values[a] > self.values[b]


@dataclass
class MipInstance:
    reward: RewardMatrix
    extra_constraints: list[tuple[Cell, Cell]] = field(default_factory=list)

    def __post_init__(self):
        n = self.reward.n
        for a, b in self.extra_constraints:
            for i, j in (a, b):
                if not (0 <= i < n and 0 <= j < n and i != j):
                    raise ValueError(f"bad cell {(i, j)} in extra constraint")


def priority_matrix(n: int) -> np.ndarray:
    """Avoidance priorities, ``N**2 - N`` down to 1 along wrapped diagonals.

    Cells are visited diagonal by diagonal (offset ``k = 1 .. N-1``, cell
    ``(i, (i + k) mod N)``), rows ascending within a diagonal.  For three
    vehicles this gives ``[[*, 6, 3], [2, *, 5], [4, 1, *]]``.  The diagonal is 0.
    """
    if n < 2:
        raise ValueError("need at least two vehicles")
    P = np.zeros((n, n), dtype=np.int64)
    prio = n * n - n
    for k in range(1, n):
        for i in range(n):
            P[i, (i + k) % n] = prio
            prio -= 1
    return P


def build_reward_matrix(priorities: np.ndarray, safety_levels: np.ndarray, K: float,
                        active=None) -> RewardMatrix:
    """``c_ij = p_ij**2`` if ``s_ij <= K`` else ``-1``; diagonal and inactive cells blocked."""
    P = np.asarray(priorities, dtype=np.float64)
    S = np.asarray(safety_levels, dtype=np.float64)
    n = len(P)
    vals = np.where(S <= K, P ** 2, -1.0)
    blocked = np.eye(n, dtype=bool)
    if active is not None:
        active = np.asarray(active, dtype=bool)
        blocked |= ~active[:, None] | ~active[None, :]
    return RewardMatrix(vals, blocked)


def samv_modify(reward: RewardMatrix, common_sets: Sequence[Mapping | Iterable]) -> MipInstance:
    """Merge rewards of vehicles avoidable with one control and add the side constraints.

    ``common_sets[i]`` holds the groups of vehicle ``i`` (a mapping from control to
    index set, or just an iterable of index sets).  For each group ``G`` with at
    least two members, every ``c_ij, j in G`` becomes the group sum, and
    ``u_ji + u_ia <= 1`` is added for ``j != a`` in ``G`` whenever ``c_ij > c_ji``
    under the rewards as they were before merging.
    """
    base = reward
    out = reward.copy()
    extra: list[tuple[Cell, Cell]] = []
    for i, groups in enumerate(common_sets):
        if isinstance(groups, Mapping):
            groups = groups.values()
        for G in groups:
            G = sorted(G)
            if len(G) < 2:
                continue
            total = sum(base.values[i, a] for a in G)
            for j in G:
                out.values[i, j] = total
            for j in G:
                if not base.greater((i, j), (j, i)):
                    continue
                for a in G:
                    if a != j:
                        extra.append(((j, i), (i, a)))
    return MipInstance(out, extra)


def is_feasible(U: np.ndarray, instance: MipInstance) -> bool:
    U = np.asarray(U)
    if np.any(U[instance.reward.blocked]):
        return False
    if np.any(U.sum(axis=1) > 1) or np.any(np.diag(U)):
        return False
    if np.any((U + U.T) > 1):
        return False
    return all(U[a] + U[b] <= 1 for a, b in instance.extra_constraints)


def objective(U: np.ndarray, reward: RewardMatrix) -> float:
    U = np.asarray(U, dtype=bool)
    return float(reward.values[U].sum())


def solve_mip(instance: MipInstance) -> tuple[np.ndarray, float]:
    """Exact depth-first branch and bound over one column (or none) per row.

    A first pass tries high rewards first to pin down the optimal value; a
    second pass walks rows in lexicographic order and stops at the first
    assignment reaching it, so ties resolve to the lexicographically smallest
    flattened ``U``.
    """
    R = instance.reward
    n = R.n
    if n > 16:
        raise ValueError("exact solver limited to 16 vehicles")
    vals, blocked = R.values, R.blocked

    # non-positive rewards never help: every constraint is a packing constraint
    cols = [[j for j in range(n) if not blocked[i, j] and vals[i, j] > 0] for i in range(n)]
    greedy_order = [sorted(c, key=lambda j: -vals[i, j]) + [-1] for i, c in enumerate(cols)]
    # "none" first, then columns from last to first: lexicographic order of the flattened U
    lex_order = [[-1] + c[::-1] for c in cols]
    row_best = np.array([max([0.0] + [vals[i, j] for j in c]) for i, c in enumerate(cols)])
    tail_bound = np.concatenate([np.cumsum(row_best[::-1])[::-1], [0.0]])

    partner: dict[Cell, list[Cell]] = {}
    for a, b in instance.extra_constraints:
        partner.setdefault(a, []).append(b)
        partner.setdefault(b, []).append(a)

    choice = [-1] * n

    def ok(i, j):
        if j < i and choice[j] == i:
            return False
        for r, c in partner.get((i, j), ()):
            if r < i and choice[r] == c:
                return False
        return True

    best_val = 0.0

    def search_value(i, acc):
        nonlocal best_val
        if i == n:
            best_val = max(best_val, acc)
            return
        if acc + tail_bound[i] <= best_val:
            return
        for j in greedy_order[i]:
            if j >= 0 and not ok(i, j):
                continue
            choice[i] = j
            search_value(i + 1, acc + (vals[i, j] if j >= 0 else 0.0))
        choice[i] = -1

    search_value(0, 0.0)
    target = best_val - 1e-9 * max(1.0, abs(best_val))

    def search_lex(i, acc):
        if i == n:
            return acc >= target
        if acc + tail_bound[i] < target:
            return False
        for j in lex_order[i]:
            if j >= 0 and not ok(i, j):
                continue
            choice[i] = j
            if search_lex(i + 1, acc + (vals[i, j] if j >= 0 else 0.0)):
                return True
        choice[i] = -1
        return False

    found = search_lex(0, 0.0)
    assert found
    U = np.zeros((n, n), dtype=np.int8)
    for i, j in enumerate(choice):
        if j >= 0:
            U[i, j] = 1
    return U, objective(U, R)


def brute_force(instance: MipInstance) -> tuple[float, list[np.ndarray]]:
    """Optimal value and every optimal assignment by plain enumeration."""
    R = instance.reward
    n = R.n
    vals = R.values.tolist()
    blocked = R.blocked.tolist()
    extra = instance.extra_constraints
    best, arg = -np.inf, []
    for choice in itertools.product(range(-1, n), repeat=n):
        if any(j >= 0 and (j == i or blocked[i][j] or choice[j] == i) for i, j in enumerate(choice)):
            continue
        if any(choice[a[0]] == a[1] and choice[b[0]] == b[1] for a, b in extra):
            continue
        val = sum(vals[i][j] for i, j in enumerate(choice) if j >= 0)
        if val > best + 1e-9:
            best, arg = val, [choice]
        elif abs(val - best) <= 1e-9:
            arg.append(choice)
    optima = []
    for choice in arg:
        U = np.zeros((n, n), dtype=np.int8)
        for i, j in enumerate(choice):
            if j >= 0:
                U[i, j] = 1
        optima.append(U)
    return float(best), optima


def baseline_assignment(safety_levels: np.ndarray, K: float, active=None) -> np.ndarray:
    """Each vehicle avoids its lowest-safety conflict partner; mutual avoidance allowed."""
    S = np.array(safety_levels, dtype=np.float64)
    n = len(S)
    np.fill_diagonal(S, np.inf)
    if active is not None:
        active = np.asarray(active, dtype=bool)
        S[~active, :] = np.inf
        S[:, ~active] = np.inf
    U = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        if np.min(S[i]) <= K:
            U[i, int(np.argmin(S[i]))] = 1
    return U


# ---------------------------------------------------------------------------
# exhaustive checks of the three-vehicle guarantees

CYCLIC_PAIRS = ((0, 1), (1, 2), (2, 0))
_OFF_DIAG = [(i, j) for i in range(3) for j in range(3) if i != j]


@dataclass
class VerificationReport:
    name: str
    checked: int = 0
    counterexamples: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checked": self.checked,
                "counterexamples": self.counterexamples, "notes": self.notes}


def reward_patterns():
    """All 64 three-vehicle reward matrices: each off-diagonal entry ``p_ij**2`` or ``-1``."""
    P = priority_matrix(3)
    for bits in itertools.product((True, False), repeat=6):
        S = np.full((3, 3), np.inf)
        for (i, j), conflict in zip(_OFF_DIAG, bits):
            if conflict:
                S[i, j] = 0.0
        yield build_reward_matrix(P, S, 0.0)


def _fmt(R: RewardMatrix):
    return [[None if R.blocked[i, j] else R.values[i, j] for j in range(R.n)] for i in range(R.n)]


def verify_theorem1() -> VerificationReport:
    """Every optimum selects each cyclic pair whose reward is the conflict reward."""
    rep = VerificationReport("theorem1")
    P = priority_matrix(3)
    for R in reward_patterns():
        inst = MipInstance(R)
        U, val = solve_mip(inst)
        best, optima = brute_force(inst)
        rep.checked += 1
        if abs(best - val) > 1e-9:
            rep.counterexamples.append({"reward": _fmt(R), "reason": "solver not optimal"})
            continue
        for i, j in CYCLIC_PAIRS:
            if R.values[i, j] == P[i, j] ** 2 and not all(O[i, j] for O in optima):
                rep.counterexamples.append({"reward": _fmt(R), "pair": [i + 1, j + 1],
                                            "reason": "optimum does not mandate avoidance"})
    return rep


def _merge_options(R: RewardMatrix):
    """Rows that can be merged: both off-diagonal entries are conflict rewards."""
    return [i for i in range(3) if all(R.values[i, j] > 0 for j in range(3) if j != i)]


def classify_case(merged: Sequence[int]) -> str:
    return {3: "i", 2: "ii", 1: "iii", 0: "none"}[len(merged)]


def verify_theorem2() -> VerificationReport:
    """Enumerate base patterns crossed with every admissible choice of merged rows."""
    rep = VerificationReport("theorem2")
    case_counts = {"i": 0, "ii": 0, "iii": 0, "none": 0}
    optima_seen: dict[str, set] = {"i": set(), "ii_c31_pos": set(), "ii_c31_neg": set(),
                                   "iii_example": set()}
    for R in reward_patterns():
        mergeable = _merge_options(R)
        for k in range(len(mergeable) + 1):
            for merged in itertools.combinations(mergeable, k):
                groups = [[{j for j in range(3) if j != i}] if i in merged else [] for i in range(3)]
                inst = samv_modify(R, groups)
                U, val = solve_mip(inst)
                best, optima = brute_force(inst)
                rep.checked += 1
                case = classify_case(merged)
                case_counts[case] += 1
                if abs(best - val) > 1e-9 or not is_feasible(U, inst):
                    rep.counterexamples.append({"reward": _fmt(inst.reward), "merged": list(merged),
                                                "reason": "solver not optimal"})
                    continue
                for i, j in CYCLIC_PAIRS:
                    if R.values[i, j] <= 0:
                        continue
                    other = 3 - i - j
                    for O in optima:
                        if O[i, j] or (i in merged and O[i, other]):
                            continue
                        rep.counterexamples.append({
                            "reward": _fmt(inst.reward), "merged": [m + 1 for m in merged],
                            "pair": [i + 1, j + 1],
                            "optimum": O.tolist(), "reason": "mandated avoidance dropped"})
                        break
                if case == "i":
                    optima_seen["i"].add(val)
                    if any(O.sum(axis=1).min() < 1 for O in optima):
                        rep.counterexamples.append({"merged": [1, 2, 3],
                                                    "reason": "case (i) optimum leaves a row empty"})
                elif set(merged) == {0, 1}:
                    key = "ii_c31_pos" if R.values[2, 0] > 0 else "ii_c31_neg"
                    optima_seen[key].add(val)
                elif merged == (0,) and R.values[1, 2] > 0 and R.values[2, 0] < 0:
                    optima_seen["iii_example"].add(val)
    expected = {"i": {91.0}, "ii_c31_pos": {90.0}, "ii_c31_neg": {74.0}, "iii_example": {70.0}}
    for key, want in expected.items():
        if optima_seen[key] != want:
            rep.counterexamples.append({"case": key, "expected": sorted(want),
                                        "got": sorted(optima_seen[key])})
    rep.notes = {"case_counts": case_counts,
                 "optima": {k: sorted(v) for k, v in optima_seen.items()}}
    return rep


def random_instance(rng: np.random.Generator, n: int, n_extra: int | None = None) -> MipInstance:
    vals = rng.uniform(-10, 50, size=(n, n))
    R = RewardMatrix(vals, np.eye(n, dtype=bool))
    cells = [(i, j) for i in range(n) for j in range(n) if i != j]
    if n_extra is None:
        n_extra = int(rng.integers(0, n + 1))
    extra = []
    for _ in range(n_extra):
        a, b = rng.choice(len(cells), size=2, replace=False)
        extra.append((cells[a], cells[b]))
    return MipInstance(R, extra)


def verify_mip_oracle(trials: int = 500, seed: int = 0) -> VerificationReport:
    """Compare the branch-and-bound solver to plain enumeration on random instances."""
    rep = VerificationReport("mip-oracle")
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(3, 6))
        inst = random_instance(rng, n)
        U, val = solve_mip(inst)
        best, _ = brute_force(inst)
        rep.checked += 1
        if not is_feasible(U, inst) or abs(val - best) > 1e-9 or abs(objective(U, inst.reward) - val) > 1e-9:
            rep.counterexamples.append({"trial": t, "n": n, "solver": val, "oracle": best})
    return rep
