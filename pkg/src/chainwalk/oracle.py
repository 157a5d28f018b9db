"""Random function tables, query accounting, and collision bookkeeping.

Everything downstream treats the function f: {0,1}^n -> {0,1}^m as an explicit
table. Counted accesses go through :meth:`FunctionTable.query` (or the bulk
:meth:`FunctionTable.charge` for superposition reads); ground-truth scans used
for verification go through :meth:`FunctionTable.value` and are deliberately
not counted.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CapacityError,
    DomainError,
    ParameterError,
    ValidationError,
)


@dataclass(frozen=True)
class Params:
    """Problem size: n input bits, m output bits, 2^k collision tuples wanted.

    Valid ranges are 1 <= n <= m <= 2n and 0 <= k <= 2n - m, so that a random
    function is expected to carry about 2^(2n-m) collisions and the target is
    not larger than that.
    """

    n: int
    m: int
    k: int = 0

    def __post_init__(self) -> None:
        if not (1 <= self.n <= self.m <= 2 * self.n):
            raise ParameterError(
                f"need 1 <= n <= m <= 2n, got n={self.n}, m={self.m}"
            )
        if not (0 <= self.k <= 2 * self.n - self.m):
            raise ParameterError(
                f"need 0 <= k <= 2n - m = {2 * self.n - self.m}, got k={self.k}"
            )

    @property
    def domain_size(self) -> int:
        return 1 << self.n

    @property
    def codomain_size(self) -> int:
        return 1 << self.m


class FunctionTable:
    """Explicit value table for f with a thread-safe query counter.

    The table itself is immutable.  `query_count` only reflects counted
    accesses: per-point `query` calls and bulk `charge` amounts.
    """

    def __init__(self, params: Params, values) -> None:
        arr = np.asarray(values, dtype=np.int64)
        if arr.shape != (params.domain_size,):
            raise ParameterError(
                f"table needs {params.domain_size} entries, got shape {arr.shape}"
            )
        if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= params.codomain_size):
            raise ParameterError("table value out of codomain range")
        arr.setflags(write=False)
        self.params = params
        self._values = arr
        self._count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    def _check_point(self, x: int) -> None:
        if not (0 <= x < self.params.domain_size):
            raise DomainError(f"point {x} outside domain of size {self.params.domain_size}")

    def query(self, x: int) -> int:
        """Counted lookup of f(x)."""
        self._check_point(x)
        with self._lock:
            self._count += 1
        return int(self._values[x])

    def value(self, x: int) -> int:
        """Ground-truth lookup, not counted.  For verification scans only."""
        self._check_point(x)
        return int(self._values[x])

    def charge(self, amount: int) -> None:
        """Account for `amount` superposition queries without a point lookup."""
        if amount < 0:
            raise ParameterError("charge amount must be nonnegative")
        with self._lock:
            self._count += amount

    def values(self) -> np.ndarray:
        """Read-only view of the full table."""
        return self._values


def generate_function(params: Params, seed: int) -> FunctionTable:
    """Draw a uniformly random table, reproducible from the integer seed."""
    rng = np.random.default_rng(seed)
    values = rng.integers(0, params.codomain_size, size=params.domain_size, dtype=np.int64)
    return FunctionTable(params, values)


class CollisionTable:
    """Ordered map from image to the sorted tuple of its recorded preimages.

    Tables are value-like: `insert` returns a new table and never mutates.
    Insertion order is preserved, preimage tuples are sorted, every tuple has
    size at least 2, and no point appears under two images.
    """

    def __init__(self, entries=None) -> None:
        self._entries: dict[int, tuple[int, ...]] = {}
        if entries:
            for image, pre in entries:
                self._entries[int(image)] = tuple(sorted(int(x) for x in pre))

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, image: int) -> bool:
        return image in self._entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, CollisionTable):
            return NotImplemented
        return list(self._entries.items()) == list(other._entries.items())

    def items(self):
        return self._entries.items()

    def images(self) -> frozenset[int]:
        return frozenset(self._entries)

    def preimages(self, image: int) -> tuple[int, ...]:
        return self._entries[image]

    def all_preimages(self) -> frozenset[int]:
        out: set[int] = set()
        for pre in self._entries.values():
            out.update(pre)
        return frozenset(out)

    def insert(self, fn: FunctionTable, image: int, preimages) -> "CollisionTable":
        """Validated copy-and-insert of one collision tuple."""
        pre = tuple(sorted(int(x) for x in preimages))
        if len(pre) < 2:
            raise ValidationError("a collision tuple needs at least 2 preimages")
        if len(set(pre)) != len(pre):
            raise ValidationError("repeated preimage in tuple")
        if image in self._entries:
            raise ValidationError(f"image {image} already recorded")
        for x in pre:
            if fn.value(x) != image:
                raise ValidationError(f"point {x} does not map to image {image}")
        taken = self.all_preimages()
        overlap = taken.intersection(pre)
        if overlap:
            raise ValidationError(f"preimages {sorted(overlap)} already recorded")
        out = CollisionTable()
        out._entries = dict(self._entries)
        out._entries[int(image)] = pre
        return out

    def to_json(self) -> str:
        rows = [
            {"image": image, "preimages": list(pre)}
            for image, pre in self._entries.items()
        ]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str) -> "CollisionTable":
        rows = json.loads(text)
        table = cls()
        for row in rows:
            image = int(row["image"])
            pre = tuple(sorted(int(x) for x in row["preimages"]))
            if image in table._entries:
                raise ValidationError(f"duplicate image {image} in serialized table")
            table._entries[image] = pre
        return table


def table_insert(table: CollisionTable, fn: FunctionTable, image: int, preimages) -> CollisionTable:
    """Free-function spelling of :meth:`CollisionTable.insert`."""
    return table.insert(fn, image, preimages)


@dataclass(frozen=True)
class RestrictedFunction:
    """f with every recorded image's full preimage class carved out.

    `excluded_preimages` is the closure: all domain points whose image appears
    in the collision table, whether or not the table stored them.  The
    simulated algorithm never reads this set directly; it only shows up through
    which basis labels are allowed.
    """

    base: FunctionTable
    table: CollisionTable
    excluded_preimages: frozenset[int]
    excluded_images: frozenset[int]
    domain_points: tuple[int, ...]

    @property
    def domain_size(self) -> int:
        return len(self.domain_points)

    @property
    def codomain_size(self) -> int:
        return self.base.params.codomain_size - len(self.excluded_images)

    def allows(self, x: int) -> bool:
        return 0 <= x < self.base.params.domain_size and x not in self.excluded_preimages

    def value(self, x: int) -> int:
        """Ground-truth lookup restricted to the allowed domain."""
        if not self.allows(x):
            raise DomainError(f"point {x} excluded from restricted domain")
        return self.base.value(x)


def restrict(fn: FunctionTable, table: CollisionTable) -> RestrictedFunction:
    """Carve the recorded images and their full preimage classes out of f.

    Raises CapacityError when the closure reaches half the domain, since the
    downstream rejection sampling needs a majority of allowed points.
    """
    images = table.images()
    excluded: set[int] = set()
    if images:
        vals = fn.values()
        for x in range(fn.params.domain_size):
            if int(vals[x]) in images:
                excluded.add(x)
    half = fn.params.domain_size // 2
    if len(excluded) >= half:
        raise CapacityError(
            f"exclusion closure has {len(excluded)} points, "
            f"needs fewer than {half}"
        )
    domain = tuple(x for x in range(fn.params.domain_size) if x not in excluded)
    return RestrictedFunction(
        base=fn,
        table=table,
        excluded_preimages=frozenset(excluded),
        excluded_images=frozenset(images),
        domain_points=domain,
    )


def enumerate_multicollisions(fn, restriction: RestrictedFunction | None = None):
    """Ground-truth scan for every image with >= 2 preimages.

    Accepts a FunctionTable (scan the whole domain) or, via `restriction`, a
    restricted view (scan allowed points only).  A j-fold collision is one
    entry carrying all j preimages, not j-choose-2 separate pairs.  Entries
    come back sorted by image, preimages sorted inside each entry.
    """
    if restriction is not None:
        points = restriction.domain_points
        lookup = restriction.value
    elif isinstance(fn, RestrictedFunction):
        points = fn.domain_points
        lookup = fn.value
    else:
        points = range(fn.params.domain_size)
        lookup = fn.value
    groups: dict[int, list[int]] = {}
    for x in points:
        groups.setdefault(lookup(x), []).append(x)
    out = [
        (image, tuple(sorted(pre)))
        for image, pre in groups.items()
        if len(pre) >= 2
    ]
    out.sort(key=lambda entry: entry[0])
    return out


def function_table_to_text(fn: FunctionTable) -> str:
    """Serialize as a header line `n=<n> m=<m>` plus one hex image per line."""
    lines = [f"n={fn.params.n} m={fn.params.m}"]
    for v in fn.values():
        lines.append(format(int(v), "x"))
    return "\n".join(lines) + "\n"


def function_table_from_text(text: str) -> FunctionTable:
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines:
        raise ValidationError("empty function table text")
    header = lines[0].split()
    try:
        fields = dict(part.split("=", 1) for part in header)
        n = int(fields["n"])
        m = int(fields["m"])
    except (ValueError, KeyError) as exc:
        raise ValidationError(f"bad header line {lines[0]!r}") from exc
    params = Params(n=n, m=m)
    body = lines[1:]
    if len(body) != params.domain_size:
        raise ValidationError(
            f"expected {params.domain_size} value lines, got {len(body)}"
        )
    values = [int(line, 16) for line in body]
    return FunctionTable(params, values)


def save_function_table(fn: FunctionTable, path) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write(function_table_to_text(fn))


def load_function_table(path) -> FunctionTable:
    with open(path, "r", encoding="ascii") as handle:
        return function_table_from_text(handle.read())
