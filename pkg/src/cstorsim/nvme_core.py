"""Simulated NVMe substrate.

Models the host<->device command plane: submission/completion queue pairs with
doorbells, single-page PRP data buffers, MSI completion events, namespaces,
and the two-PCIe-function visibility split (the firmware function sees both
the private and sharable namespaces, the host function only the sharable one).

Timing is optional: a CostTable-style dict may charge nanoseconds for fetch
and completion; by default all transport is free and only ordering matters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .simclock import Clock

PAGE_SIZE = 4096
DEFAULT_SQ_DEPTH = 64

OP_WRITE = 0x01
OP_READ = 0x02
OP_TX_FRAME = 0xE0  # vendor: transmit Ethernet frame
OP_RX_FRAME = 0xE1  # vendor: receive Ethernet frame (pre-armed upcall)

BLOCK_OPCODES = frozenset({OP_READ, OP_WRITE})
VENDOR_OPCODES = frozenset({OP_TX_FRAME, OP_RX_FRAME})
VALID_OPCODES = BLOCK_OPCODES | VENDOR_OPCODES

# nsid 0 marks commands that do not address a namespace (the vendor
# frame-tunnel commands); it is visible through either function.
NSID_NONE = 0


class NvmeError(Exception):
    pass


class QueueFull(NvmeError):
    pass


class DuplicateCommandId(NvmeError):
    pass


class NamespaceNotVisible(NvmeError):
    pass


class Empty(NvmeError):
    pass


class UnknownCommand(NvmeError):
    pass


class OverlappingRanges(NvmeError):
    pass


class MissingKind(NvmeError):
    pass


class InvalidCommand(NvmeError):
    pass


class PcieFunction(Enum):
    FW = "fw"
    HOST = "host"


class NsKind(Enum):
    PRIVATE = "private"
    SHARABLE = "sharable"


class Page:
    """One 4096-byte, page-aligned buffer in the simulated address space."""

    __slots__ = ("addr", "data")

    def __init__(self, addr: int):
        if addr % PAGE_SIZE != 0:
            raise ValueError("page address must be 4096-byte aligned")
        self.addr = addr
        self.data = bytearray(PAGE_SIZE)

    def write(self, payload: bytes, offset: int = 0) -> None:
        if offset + len(payload) > PAGE_SIZE:
            raise ValueError("payload exceeds page")
        self.data[offset:offset + len(payload)] = payload

    def read(self, length: int, offset: int = 0) -> bytes:
        return bytes(self.data[offset:offset + length])


class PageAllocator:
    """Hands out aligned pages; addresses are stable across a run."""

    def __init__(self, base: int = 0x100000):
        self._next = base

    def alloc(self) -> Page:
        page = Page(self._next)
        self._next += PAGE_SIZE
        return page


@dataclass(frozen=True)
class NvmeCommand:
    opcode: int
    command_id: int
    nsid: int = NSID_NONE
    prp: Optional[Page] = None
    lba: int = 0
    length: int = 0
    dw12: int = 0

    def __post_init__(self):
        if self.opcode not in VALID_OPCODES:
            raise InvalidCommand(f"opcode 0x{self.opcode:02X} not supported")
        if not 0 <= self.command_id <= 0xFFFF:
            raise InvalidCommand("command_id must fit 16 bits")
        if self.length > PAGE_SIZE:
            raise InvalidCommand("single-PRP commands carry at most one page")

    def is_block(self) -> bool:
        return self.opcode in BLOCK_OPCODES


@dataclass(frozen=True)
class CompletionEntry:
    command_id: int
    status: int  # 0 = success


@dataclass(frozen=True)
class MsiEvent:
    time_ns: int
    qid: int
    command_id: int
    status: int


@dataclass(frozen=True)
class CommandTicket:
    qid: int
    command_id: int


@dataclass(frozen=True)
class Namespace:
    nsid: int
    kind: NsKind
    block_start: int
    block_end: int  # exclusive

    def contains(self, lba: int) -> bool:
        return self.block_start <= lba < self.block_end

    @property
    def block_count(self) -> int:
        return self.block_end - self.block_start


class NamespaceTable:
    """Namespace definitions plus the per-PCIe-function visibility sets."""

    def __init__(self, namespaces: Iterable[Namespace]):
        self.namespaces = {ns.nsid: ns for ns in namespaces}
        self._fw_visible = frozenset(self.namespaces)
        self._host_visible = frozenset(
            nsid for nsid, ns in self.namespaces.items()
            if ns.kind is NsKind.SHARABLE
        )

    def visible(self, nsid: int, function: PcieFunction) -> bool:
        if nsid == NSID_NONE:
            return True
        if function is PcieFunction.FW:
            return nsid in self._fw_visible
        return nsid in self._host_visible

    def get(self, nsid: int) -> Namespace:
        return self.namespaces[nsid]

    def by_kind(self, kind: NsKind) -> Namespace:
        for ns in self.namespaces.values():
            if ns.kind is kind:
                return ns
        raise MissingKind(kind.value)

    def visible_nsids(self, function: PcieFunction) -> frozenset:
        return self._fw_visible if function is PcieFunction.FW else self._host_visible


def define_namespaces(layout: Iterable[dict]) -> NamespaceTable:
    """Build a NamespaceTable from [{"kind": ..., "blocks": (start, end)}, ...].

    Requires exactly one private and one sharable namespace and disjoint
    block ranges.
    """
    namespaces = []
    next_nsid = 1
    for entry in layout:
        kind = NsKind(entry["kind"]) if not isinstance(entry["kind"], NsKind) else entry["kind"]
        start, end = entry["blocks"]
        if end <= start:
            raise OverlappingRanges(f"empty or inverted block range ({start}, {end})")
        namespaces.append(Namespace(next_nsid, kind, int(start), int(end)))
        next_nsid += 1

    spans = sorted((ns.block_start, ns.block_end) for ns in namespaces)
    for (a_start, a_end), (b_start, b_end) in zip(spans, spans[1:]):
        if b_start < a_end:
            raise OverlappingRanges(
                f"[{a_start},{a_end}) overlaps [{b_start},{b_end})")

    kinds = [ns.kind for ns in namespaces]
    for required in (NsKind.PRIVATE, NsKind.SHARABLE):
        if kinds.count(required) != 1:
            raise MissingKind(
                f"exactly one {required.value} namespace required, got {kinds.count(required)}")

    return NamespaceTable(namespaces)


@dataclass(frozen=True)
class AccessRecord:
    time_ns: int
    function: PcieFunction
    nsid: int
    ns_kind: Optional[NsKind]
    opcode: int
    lba: int
    length: int
    ok: bool
    reason: str = ""


class QueuePair:
    """One SQ/CQ pair with a fixed SQ depth and monotonic doorbells."""

    def __init__(self, qid: int, depth: int = DEFAULT_SQ_DEPTH):
        if depth < 1:
            raise ValueError("queue depth must be positive")
        self.qid = qid
        self.depth = depth
        self.sq: list[NvmeCommand] = []     # grows forever; cursor marks fetch point
        self.cq: list[CompletionEntry] = []
        self.sq_doorbell = 0
        self.cq_doorbell = 0
        self._fetch_cursor = 0
        self.outstanding: dict[int, NvmeCommand] = {}
        self.fetched_ids: set[int] = set()
        self.submitted = 0
        self.completed = 0

    @property
    def outstanding_count(self) -> int:
        return len(self.outstanding)

    def sq_free(self) -> int:
        return self.depth - self.outstanding_count

    def check_conservation(self) -> bool:
        return self.submitted == self.completed + self.outstanding_count


class BlockStore:
    """Per-namespace 4096-byte block contents, absent blocks read as zeros."""

    def __init__(self):
        self._blocks: dict[tuple[int, int], bytes] = {}

    def read_block(self, nsid: int, lba: int) -> bytes:
        return self._blocks.get((nsid, lba), b"\x00" * PAGE_SIZE)

    def write_block(self, nsid: int, lba: int, data: bytes) -> None:
        if len(data) > PAGE_SIZE:
            raise ValueError("block writes carry at most one page")
        padded = bytes(data) + b"\x00" * (PAGE_SIZE - len(data))
        self._blocks[(nsid, lba)] = padded

    def snapshot(self) -> dict:
        return dict(self._blocks)


class NvmeController:
    """Device-side control logic: fetch, execute and complete commands.

    Owned by the single-threaded simulation loop; all mutation happens
    through the methods below, in call order.
    """

    def __init__(self, ns_table: NamespaceTable, clock: Optional[Clock] = None,
                 costs: Optional[dict] = None, sq_depth: int = DEFAULT_SQ_DEPTH):
        self.ns_table = ns_table
        self.clock = clock if clock is not None else Clock()
        self.costs = dict(costs or {})
        self.sq_depth = sq_depth
        self.qps: dict[int, QueuePair] = {}
        self.block_store = BlockStore()
        self.page_alloc = PageAllocator()
        self.access_log: list[AccessRecord] = []
        self.msi_log: list[MsiEvent] = []
        self._msi_seq = itertools.count()

    # -- queue management ---------------------------------------------------

    def create_qp(self, qid: int, depth: Optional[int] = None) -> QueuePair:
        if qid in self.qps:
            raise ValueError(f"queue {qid} already exists")
        qp = QueuePair(qid, depth if depth is not None else self.sq_depth)
        self.qps[qid] = qp
        return qp

    # -- host-side operations -----------------------------------------------

    def submit(self, qp: QueuePair, cmd: NvmeCommand,
               function: PcieFunction) -> CommandTicket:
        """Enqueue a command and ring the SQ doorbell (doorbells cost 0 ns)."""
        if qp.sq_free() <= 0:
            raise QueueFull(f"SQ {qp.qid} has {qp.depth} outstanding commands")
        if cmd.command_id in qp.outstanding:
            raise DuplicateCommandId(f"command_id {cmd.command_id} outstanding on SQ {qp.qid}")
        if not self.ns_table.visible(cmd.nsid, function):
            self._log_access(function, cmd, ok=False, reason="not-visible")
            raise NamespaceNotVisible(
                f"nsid {cmd.nsid} is not visible through the {function.value} function")
        if cmd.is_block():
            ns = self.ns_table.get(cmd.nsid)
            if not ns.contains(cmd.lba):
                self._log_access(function, cmd, ok=False, reason="lba-out-of-range")
                raise InvalidCommand(f"lba {cmd.lba} outside namespace {cmd.nsid}")
            self._log_access(function, cmd, ok=True)

        qp.sq.append(cmd)
        qp.sq_doorbell += 1
        qp.submitted += 1
        qp.outstanding[cmd.command_id] = cmd
        return CommandTicket(qp.qid, cmd.command_id)

    def poll(self, ticket: CommandTicket) -> Optional[CompletionEntry]:
        qp = self.qps[ticket.qid]
        for entry in qp.cq:
            if entry.command_id == ticket.command_id:
                return entry
        return None

    # -- device-side operations ---------------------------------------------

    def device_fetch(self, qp: QueuePair) -> NvmeCommand:
        """Pop the oldest unfetched command; FIFO order per SQ."""
        if qp._fetch_cursor >= qp.sq_doorbell:
            raise Empty(f"SQ {qp.qid} has no unfetched commands")
        cmd = qp.sq[qp._fetch_cursor]
        qp._fetch_cursor += 1
        qp.fetched_ids.add(cmd.command_id)
        self.clock.advance(self.costs.get("fetch_ns", 0))
        return cmd

    def device_complete(self, qp: QueuePair, command_id: int,
                        status: int = 0) -> MsiEvent:
        """Append a CQ entry and raise the MSI for a fetched command."""
        if command_id not in qp.outstanding or command_id not in qp.fetched_ids:
            raise UnknownCommand(f"command_id {command_id} not outstanding+fetched on SQ {qp.qid}")
        del qp.outstanding[command_id]
        qp.fetched_ids.discard(command_id)
        qp.completed += 1
        self.clock.advance(self.costs.get("complete_ns", 0))
        qp.cq.append(CompletionEntry(command_id, status))
        qp.cq_doorbell += 1
        event = MsiEvent(self.clock.now_ns, qp.qid, command_id, status)
        self.msi_log.append(event)
        return event

    def execute_block(self, cmd: NvmeCommand, function: PcieFunction) -> None:
        """Move data between the PRP page and the block store for a fetched
        block command. Reads fill the page; writes persist its prefix."""
        if not cmd.is_block():
            raise InvalidCommand("execute_block requires a block opcode")
        if cmd.prp is None:
            raise InvalidCommand("block command without a PRP page")
        self.clock.advance(self.costs.get("storage_ns", 0))
        length = cmd.length or PAGE_SIZE
        if cmd.opcode == OP_READ:
            cmd.prp.write(self.block_store.read_block(cmd.nsid, cmd.lba)[:length])
        else:
            self.block_store.write_block(cmd.nsid, cmd.lba, cmd.prp.read(length))

    def serve_block(self, qp: QueuePair, function: PcieFunction) -> MsiEvent:
        """Fetch, execute and complete the next command on a block queue."""
        cmd = self.device_fetch(qp)
        self.execute_block(cmd, function)
        return self.device_complete(qp, cmd.command_id)

    # -- auditing -----------------------------------------------------------

    def _log_access(self, function: PcieFunction, cmd: NvmeCommand,
                    ok: bool, reason: str = "") -> None:
        kind = None
        if cmd.nsid in self.ns_table.namespaces:
            kind = self.ns_table.get(cmd.nsid).kind
        self.access_log.append(AccessRecord(
            self.clock.now_ns, function, cmd.nsid, kind,
            cmd.opcode, cmd.lba, cmd.length, ok, reason))

    def audit_private_isolation(self) -> list[AccessRecord]:
        """Return every successful host-function access to a private-NS block.

        An empty list is the pass condition: the host function must never
        reach private namespace content.
        """
        return [
            rec for rec in self.access_log
            if rec.ok and rec.function is PcieFunction.HOST
            and rec.ns_kind is NsKind.PRIVATE
        ]
