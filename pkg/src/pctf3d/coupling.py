"""Couplings: sets of variable triplets viewed as 3-uniform hypergraphs.

Variables are 1-based throughout (``1..M``). A triplet is a sorted tuple
``(j, k, l)`` with ``j < k < l``.
"""

import hashlib
import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np


class CouplingError(ValueError):
    """Invalid coupling, or parameters outside a strategy's domain."""


class GenerationError(RuntimeError):
    """Random generation could not produce a valid coupling."""


STRATEGIES = ("plus2", "plus1", "random", "balanced", "full")

RANDOM_RETRY_BUDGET = 10_000


def _canon(triplet):
    t = tuple(sorted(int(x) for x in triplet))
    if len(t) != 3:
        raise CouplingError(f"a triplet needs exactly 3 indices, got {triplet!r}")
    if len(set(t)) != 3:
        raise CouplingError(f"triplet indices must be distinct: {triplet!r}")
    return t


@dataclass(frozen=True)
class Coupling:
    """An ordered, duplicate-free set of triplets over variables ``1..M``."""

    M: int
    triplets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.M < 3:
            raise CouplingError(f"M must be at least 3, got {self.M}")
        canon = tuple(_canon(t) for t in self.triplets)
        if len(set(canon)) != len(canon):
            raise CouplingError("duplicate triplet in coupling")
        for t in canon:
            if t[0] < 1 or t[2] > self.M:
                raise CouplingError(f"triplet {t} out of range 1..{self.M}")
        object.__setattr__(self, "triplets", canon)

    @property
    def T(self):
        return len(self.triplets)

    def __len__(self):
        return len(self.triplets)

    def __iter__(self):
        return iter(self.triplets)

    def __contains__(self, t):
        return tuple(sorted(t)) in set(self.triplets)

    def as_set(self):
        return set(self.triplets)

    def containing(self, m):
        """Triplets that include variable ``m``."""
        return [t for t in self.triplets if m in t]

    def digest(self):
        return hashlib.sha256(format_coupling(self).encode()).hexdigest()[:16]


def degree_sequence(c):
    """Number of triplets containing each variable, as a length-M int array."""
    d = np.zeros(c.M, dtype=int)
    for t in c.triplets:
        for v in t:
            d[v - 1] += 1
    return d


def step(c):
    d = degree_sequence(c)
    return int(d.max() - d.min())


def is_connected(c):
    """Valid-coupling test: every variable covered and the hypergraph connected."""
    if c.T == 0:
        return False
    parent = list(range(c.M + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    covered = set()
    for j, k, l in c.triplets:
        covered.update((j, k, l))
        rj = find(j)
        for v in (k, l):
            rv = find(v)
            if rv != rj:
                parent[rv] = rj
    if len(covered) != c.M:
        return False
    root = find(1)
    return all(find(v) == root for v in range(2, c.M + 1))


# --- deterministic strategies -------------------------------------------------

def _wrap(v, M):
    return (v - 1) % M + 1


def gen_plus2(M):
    """Chain of triplets overlapping on a single variable, ``floor(M/2)`` of them.

    Even ``M`` closes the chain back onto variable 1.
    """
    if M < 4:
        raise CouplingError(f"'+2' coupling requires M >= 4, got {M}")
    trips = [(2 * i + 1, 2 * i + 2, _wrap(2 * i + 3, M)) for i in range(M // 2)]
    return Coupling(M, tuple(trips))


def gen_plus1(M):
    """Cyclic windows ``{m, m+1, m+2}``; every variable has degree 3."""
    if M < 4:
        raise CouplingError(f"'+1' coupling requires M >= 4, got {M}")
    return Coupling(M, tuple((m, _wrap(m + 1, M), _wrap(m + 2, M))
                             for m in range(1, M + 1)))


def gen_full(M):
    if M < 3:
        raise CouplingError(f"full coupling requires M >= 3, got {M}")
    return Coupling(M, tuple(itertools.combinations(range(1, M + 1), 3)))


def t_bounds(M):
    """Admissible range of T for random and balanced couplings."""
    return M // 2, comb(M, 3)


def _check_T(M, T):
    lo, hi = t_bounds(M)
    if M < 3:
        raise CouplingError(f"M must be at least 3, got {M}")
    if not lo <= T <= hi:
        raise CouplingError(f"T={T} outside admissible range [{lo}, {hi}] for M={M}")


def gen_random(M, T, seed=None):
    """Uniformly drawn T-subset of triplets, conditioned on validity.

    Rejection sampling: a fresh T-subset is drawn until one is connected.
    """
    _check_T(M, T)
    rng = np.random.default_rng(seed)
    all_trips = list(itertools.combinations(range(1, M + 1), 3))
    for _ in range(RANDOM_RETRY_BUDGET):
        idx = np.sort(rng.choice(len(all_trips), size=T, replace=False))
        c = Coupling(M, tuple(all_trips[i] for i in idx))
        if is_connected(c):
            return c
    raise GenerationError(
        f"no connected coupling found for M={M}, T={T} after "
        f"{RANDOM_RETRY_BUDGET} draws")


# --- Lyndon words and balanced couplings ---------------------------------------

def lyndon_words(M):
    """Binary Lyndon words of length M with exactly three ones, ascending.

    A word with three ones is ``0^g1 1 0^g2 1 0^g3 1`` up to rotation. It is the
    Lyndon representative of its class exactly when the gap tuple
    ``(g1, g2, g3)`` is strictly larger than both of its cyclic shifts.
    """
    if M < 3:
        raise CouplingError(f"M must be at least 3, got {M}")
    n0 = M - 3
    words = []
    for g1 in range(n0 + 1):
        for g2 in range(n0 - g1 + 1):
            g = (g1, g2, n0 - g1 - g2)
            if g > (g[1], g[2], g[0]) and g > (g[2], g[0], g[1]):
                words.append("".join("0" * gi + "1" for gi in g))
    return sorted(words)


def word_to_triplet(word):
    return tuple(i + 1 for i, ch in enumerate(word) if ch == "1")


def rotate(word, s):
    """Right circular shift by ``s``: a one at position p moves to p + s."""
    s %= len(word)
    return word[len(word) - s:] + word[:len(word) - s] if s else word


def orbit(word):
    """Triplets of the M circular permutations of ``word``, in shift order."""
    return [word_to_triplet(rotate(word, s)) for s in range(len(word))]


def periodic_word(M):
    """The period-M/3 word ``(0^{M/3-1} 1)^3``; only defined for 3 | M."""
    if M % 3:
        raise CouplingError(f"periodic word needs 3 | M, got M={M}")
    return ("0" * (M // 3 - 1) + "1") * 3


def _reserved_shifts(M):
    """Shift order for rotations of ``0^{M-3}1^3``.

    Successive blocks of three consecutive variables tile the cycle leftwards
    from ``{M-2, M-1, M}``, so any prefix of the order covers variables as
    evenly as possible. When 3 | M each full lap is offset by one more shift.
    """
    if M % 3:
        return [(-3 * k) % M for k in range(M)]
    lap = M // 3
    return [(-3 * k - k // lap) % M for k in range(M)]


def _complete_low_degree(c, T):
    """Add triplets to ``c`` until it has ``T`` of them, keeping step <= 1.

    Each addition picks the unused triplet that minimizes the resulting step,
    then the current degree sum of its vertices, then lexicographic order.
    """
    M = c.M
    used = c.as_set()
    trips = list(c.triplets)
    d = degree_sequence(c)
    cand = np.array(list(itertools.combinations(range(1, M + 1), 3)))
    avail = np.array([tuple(t) not in used for t in cand])
    while len(trips) < T:
        dd = d[cand - 1]
        after_max = np.maximum(d.max(), (dd + 1).max(axis=1))
        # min after adding: untouched vertices keep their degree
        after = np.broadcast_to(d, (len(cand), M)).copy()
        rows = np.arange(len(cand))[:, None]
        after[rows, cand - 1] += 1
        after_step = after_max - after.min(axis=1)
        key_sum = dd.sum(axis=1)
        big = np.iinfo(np.int64).max // 4
        score = np.where(avail, after_step * (3 * T + 10) + key_sum, big)
        i = int(np.argmin(score))  # first minimum = lexicographic order
        t = tuple(int(x) for x in cand[i])
        trips.append(t)
        used.add(t)
        avail[i] = False
        d[np.array(t) - 1] += 1
    return Coupling(M, tuple(trips))


def gen_balanced(M, T, seed=None):
    """Step-1 (balanced) coupling with ``T`` triplets.

    For ``T >= M`` the coupling is built from whole rotation orbits of Lyndon
    words (ascending order, skipping ``0^{M-3}1^3``), then rotations of the
    periodic word when ``3 | M``, then rotations of ``0^{M-3}1^3``. For
    ``T < M`` the '+2' coupling is completed greedily.

    ``seed`` is accepted for interface symmetry; the construction is
    deterministic.
    """
    _check_T(M, T)
    if M == 3:
        return gen_full(3)
    if T < M:
        return _complete_low_degree(gen_plus2(M), T)

    reserved = "0" * (M - 3) + "111"
    others = [w for w in lyndon_words(M) if w != reserved]
    trips = []
    for w in others[:min(T // M, len(others))]:
        trips.extend(orbit(w))
    if M % 3 == 0 and len(trips) < T:
        pw = periodic_word(M)
        for s in range(M // 3):
            if len(trips) == T:
                break
            trips.append(word_to_triplet(rotate(pw, s)))
    for s in _reserved_shifts(M):
        if len(trips) == T:
            break
        trips.append(word_to_triplet(rotate(reserved, s)))
    if len(trips) != T:
        raise GenerationError(f"balanced construction stalled at {len(trips)} of {T}")
    return Coupling(M, tuple(trips))


def generate(strategy, M, T=None, seed=None):
    """Dispatch to a coupling strategy by name."""
    if strategy == "plus2":
        return gen_plus2(M)
    if strategy == "plus1":
        return gen_plus1(M)
    if strategy == "full":
        return gen_full(M)
    if strategy in ("random", "balanced"):
        if T is None:
            raise CouplingError(f"strategy {strategy!r} requires T")
        fn = gen_random if strategy == "random" else gen_balanced
        return fn(M, T, seed)
    raise CouplingError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


# --- text format -----------------------------------------------------------

def format_coupling(c):
    lines = [f"M={c.M}"]
    lines += [f"{j} {k} {l}" for j, k, l in c.triplets]
    return "\n".join(lines) + "\n"


def parse_coupling(text):
    """Parse ``M=<int>`` followed by one ``j k l`` line per triplet.

    Blank lines and lines starting with ``#`` are ignored.
    """
    M = None
    trips = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if M is None:
            key, sep, val = line.partition("=")
            if not sep or key.strip() != "M":
                raise CouplingError(f"line {lineno}: expected 'M=<int>', got {line!r}")
            try:
                M = int(val)
            except ValueError:
                raise CouplingError(f"line {lineno}: bad M value {val!r}") from None
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CouplingError(f"line {lineno}: expected 3 indices, got {line!r}")
        try:
            t = tuple(int(p) for p in parts)
        except ValueError:
            raise CouplingError(f"line {lineno}: non-integer index in {line!r}") from None
        if len(set(t)) != 3:
            raise CouplingError(f"line {lineno}: indices must be distinct: {line!r}")
        trips.append(t)
    if M is None:
        raise CouplingError("missing 'M=<int>' header")
    return Coupling(M, tuple(trips))


def read_coupling(path):
    with open(path, encoding="utf-8") as f:
        return parse_coupling(f.read())


def write_coupling(c, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_coupling(c))
