"""One-round federation: registry, upload codec, and cumulant aggregation.

Clients send their replicate cumulant tensors plus a sample count; the
server maps local variables into the global registry and averages each
cell over exactly the clients that hold both of its variables, weighted
by sample count. Nothing else crosses the wire.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cumulants import CumulantTable, ReplicateSet
from .errors import (
    AssumptionViolated,
    ChecksumMismatch,
    TruncatedPayload,
    VersionMismatch,
    WireFormatError,
)

WIRE_MAGIC = b"FISH"
WIRE_VERSION = 1


@dataclass(frozen=True, eq=False)
class VariableRegistry:
    """Global variable ordering plus per-client local-to-global index maps."""

    global_ids: tuple[str, ...]
    maps: tuple[tuple[int, ...], ...]

    @property
    def d(self) -> int:
        return len(self.global_ids)

    def positions(self, variable_ids: Sequence[str]) -> list[int]:
        """Global positions of the given ids, erroring on unknown names."""
        pos = {v: i for i, v in enumerate(self.global_ids)}
        try:
            return [pos[v] for v in variable_ids]
        except KeyError as exc:
            raise ValueError(f"variable {exc.args[0]!r} not in registry") from None


@dataclass(frozen=True, eq=False)
class ClientUpload:
    """One client's message: ids, sample count, and replicate tensor."""

    client_id: int
    n_k: int
    variable_ids: tuple[str, ...]
    tensor: ReplicateSet

    def __post_init__(self):
        object.__setattr__(
            self, "variable_ids", tuple(str(v) for v in self.variable_ids)
        )
        object.__setattr__(self, "client_id", int(self.client_id))
        object.__setattr__(self, "n_k", int(self.n_k))
        if self.n_k < 2:
            raise ValueError("n_k must be at least 2")
        if self.tensor.base.variable_ids != self.variable_ids:
            raise ValueError("tensor variable ids must match upload ids")

    @property
    def d_k(self) -> int:
        return len(self.variable_ids)

    @property
    def b(self) -> int:
        return self.tensor.b

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClientUpload):
            return NotImplemented
        return (
            self.client_id == other.client_id
            and self.n_k == other.n_k
            and self.variable_ids == other.variable_ids
            and self.tensor == other.tensor
        )


@dataclass(frozen=True, eq=False)
class GlobalCumulantTable:
    """Aggregated cumulants over the global variable set.

    One table per replicate index plus the base table; `coverage` records
    which clients contributed to each cell and `weights_used` the total
    sample count behind it.
    """

    base: CumulantTable
    replicates: tuple[CumulantTable, ...]
    coverage: tuple[tuple[frozenset[int], ...], ...]
    weights_used: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "replicates", tuple(self.replicates))
        object.__setattr__(
            self,
            "weights_used",
            np.asarray(self.weights_used, dtype=np.int64),
        )

    @property
    def variable_ids(self) -> tuple[str, ...]:
        return self.base.variable_ids

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def b(self) -> int:
        return len(self.replicates)

    @classmethod
    def from_table(
        cls,
        table: CumulantTable,
        replicates: Iterable[CumulantTable] | None = None,
        n: int = 0,
        client_id: int = 0,
    ) -> "GlobalCumulantTable":
        """Wrap a single table as a degenerate one-client federation."""
        reps = tuple(replicates) if replicates is not None else (table,)
        cov = tuple(
            tuple(frozenset({client_id}) for _ in range(table.d))
            for _ in range(table.d)
        )
        weights = np.full((table.d, table.d), int(n), dtype=np.int64)
        return cls(base=table, replicates=reps, coverage=cov, weights_used=weights)


def build_registry(variable_sets: Sequence[Sequence[str]]) -> VariableRegistry:
    """Union all client variable sets into one lexicographic global order."""
    if len(variable_sets) < 1:
        raise ValueError("need at least one client variable set")
    union: set[str] = set()
    for vs in variable_sets:
        vs = [str(v) for v in vs]
        if not vs:
            raise ValueError("client variable set may not be empty")
        if len(set(vs)) != len(vs):
            raise ValueError(f"duplicate identifiers within one client: {vs}")
        union.update(vs)
    global_ids = tuple(sorted(union))
    pos = {v: i for i, v in enumerate(global_ids)}
    maps = tuple(
        tuple(pos[str(v)] for v in vs) for vs in variable_sets
    )
    return VariableRegistry(global_ids=global_ids, maps=maps)


def aggregate(
    uploads: Sequence[ClientUpload], registry: VariableRegistry
) -> GlobalCumulantTable:
    """Weighted-average local cumulants into the global table.

    Each cell (i, j) is averaged over exactly the clients holding both
    variables, with weights n_k / sum n_k over that set; replicate b of
    every client is paired with replicate b of the others. Uploads are
    processed in client-id order so the result does not depend on arrival
    order.
    """
    if not uploads:
        raise ValueError("need at least one upload")
    uploads = sorted(uploads, key=lambda u: u.client_id)
    ids_seen = [u.client_id for u in uploads]
    if len(set(ids_seen)) != len(ids_seen):
        raise ValueError("duplicate client_id among uploads")
    b = uploads[0].b
    for u in uploads:
        if u.b != b:
            raise ValueError(
                f"mismatched replicate counts: client {u.client_id} sent {u.b}, "
                f"expected {b}"
            )
    d = registry.d
    n_tables = b + 1  # replicates then base
    num_c3 = np.zeros((n_tables, d))
    num_c21 = np.zeros((n_tables, d, d))
    counts = np.zeros((d, d), dtype=np.int64)
    coverage: list[list[set[int]]] = [
        [set() for _ in range(d)] for _ in range(d)
    ]
    for u in uploads:
        g = np.asarray(registry.positions(u.variable_ids))
        grid = np.ix_(g, g)
        counts[grid] += u.n_k
        for gi in g:
            for gj in g:
                coverage[gi][gj].add(u.client_id)
        tables = list(u.tensor.replicates) + [u.tensor.base]
        for t_idx, table in enumerate(tables):
            num_c3[t_idx][g] += u.n_k * table.c3
            num_c21[t_idx][grid] += u.n_k * table.c21
    for i in range(d):
        for j in range(d):
            if counts[i, j] == 0:
                raise AssumptionViolated(
                    (registry.global_ids[i], registry.global_ids[j])
                )
    diag = np.diagonal(counts).astype(np.float64)
    tables_out = []
    for t_idx in range(n_tables):
        c3 = num_c3[t_idx] / diag
        c21 = num_c21[t_idx] / counts
        tables_out.append(
            CumulantTable.from_c21(registry.global_ids, c3, c21)
        )
    cov = tuple(tuple(frozenset(cell) for cell in row) for row in coverage)
    return GlobalCumulantTable(
        base=tables_out[-1],
        replicates=tuple(tables_out[:-1]),
        coverage=cov,
        weights_used=counts,
    )


def aggregate_correlations(
    entries: Sequence[tuple[Sequence[str], int, np.ndarray]],
    registry: VariableRegistry,
) -> np.ndarray:
    """Same pairwise-coverage weighting applied to per-client correlation grids.

    Used for the Gaussian fallback report; entries are
    (variable_ids, n_k, correlation matrix) per client.
    """
    d = registry.d
    num = np.zeros((d, d))
    counts = np.zeros((d, d), dtype=np.int64)
    for variable_ids, n_k, corr in entries:
        g = np.asarray(registry.positions(variable_ids))
        grid = np.ix_(g, g)
        counts[grid] += int(n_k)
        num[grid] += int(n_k) * np.asarray(corr, dtype=np.float64)
    for i in range(d):
        for j in range(d):
            if counts[i, j] == 0:
                raise AssumptionViolated(
                    (registry.global_ids[i], registry.global_ids[j])
                )
    corr = num / counts
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return corr


def _table_doc(table: CumulantTable) -> dict:
    return {
        "c3": table.c3.tolist(),
        "c12": table.c12.tolist(),
        "c21": table.c21.tolist(),
    }


def _table_from_doc(doc: dict, variable_ids: tuple[str, ...]) -> CumulantTable:
    return CumulantTable(
        variable_ids=variable_ids,
        c3=np.array(doc["c3"], dtype=np.float64),
        c12=np.array(doc["c12"], dtype=np.float64),
        c21=np.array(doc["c21"], dtype=np.float64),
    )


def encode_upload(upload: ClientUpload) -> bytes:
    """Serialize an upload: magic, version byte, canonical JSON, CRC32.

    Floats are rendered with round-trip-exact formatting, so
    decode(encode(u)) reproduces u bit for bit.
    """
    doc = {
        "client_id": upload.client_id,
        "n_k": upload.n_k,
        "variable_ids": list(upload.variable_ids),
        "B": upload.b,
        "seed": upload.tensor.seed,
        "base": _table_doc(upload.tensor.base),
        "replicates": [_table_doc(t) for t in upload.tensor.replicates],
    }
    body = json.dumps(
        doc, sort_keys=True, separators=(",", ":"), allow_nan=False
    ).encode("utf-8")
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return WIRE_MAGIC + bytes([WIRE_VERSION]) + body + crc.to_bytes(4, "big")


def decode_upload(payload: bytes) -> ClientUpload:
    """Inverse of encode_upload, validating framing, version, and checksum."""
    header = len(WIRE_MAGIC) + 1
    if len(payload) < header + 4:
        raise TruncatedPayload(
            f"payload of {len(payload)} bytes is shorter than the framing"
        )
    if payload[: len(WIRE_MAGIC)] != WIRE_MAGIC:
        raise VersionMismatch("bad magic bytes; not an upload payload")
    version = payload[len(WIRE_MAGIC)]
    if version != WIRE_VERSION:
        raise VersionMismatch(
            f"unsupported wire version {version}, expected {WIRE_VERSION}"
        )
    body = payload[header:-4]
    crc_stored = int.from_bytes(payload[-4:], "big")
    crc_actual = zlib.crc32(body) & 0xFFFFFFFF
    if crc_stored != crc_actual:
        raise ChecksumMismatch(
            f"checksum {crc_actual:#010x} does not match stored {crc_stored:#010x}"
        )
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireFormatError(f"malformed upload body: {exc}") from exc
    try:
        variable_ids = tuple(str(v) for v in doc["variable_ids"])
        tensor = ReplicateSet(
            replicates=tuple(
                _table_from_doc(t, variable_ids) for t in doc["replicates"]
            ),
            base=_table_from_doc(doc["base"], variable_ids),
            seed=int(doc["seed"]),
        )
        upload = ClientUpload(
            client_id=int(doc["client_id"]),
            n_k=int(doc["n_k"]),
            variable_ids=variable_ids,
            tensor=tensor,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise WireFormatError(f"invalid upload document: {exc}") from exc
    if upload.b != int(doc["B"]):
        raise WireFormatError(
            f"declared replicate count {doc['B']} != actual {upload.b}"
        )
    return upload


@dataclass(frozen=True)
class CommunicationCost:
    """Per-client accounting: scalar count by formula and measured bytes."""

    client_id: int
    d_k: int
    replicates: int
    scalar_count: int
    encoded_bytes: int


def communication_cost(upload: ClientUpload) -> CommunicationCost:
    """Scalars a client ships: d_k * (2 d_k - 1) per replicate table, plus n_k."""
    d_k = upload.d_k
    b = upload.b
    return CommunicationCost(
        client_id=upload.client_id,
        d_k=d_k,
        replicates=b,
        scalar_count=d_k * (2 * d_k - 1) * b + 1,
        encoded_bytes=len(encode_upload(upload)),
    )
