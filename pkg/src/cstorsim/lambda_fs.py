"""In-storage filesystem spanning the private and sharable namespaces.

The private tree (mounted at /images and /containers) holds container
runtime state and is reachable only through the firmware PCIe function.
Every other top-level directory lives on the sharable namespace, visible to
both sides.

Concurrent host/container access to sharable files is arbitrated by
reference-counted inode locks: a side may open a file only while the
opposing side's count on the file inode *and* its immediate parent
directory inode is zero. Blocked opens queue FIFO and are granted when the
counts drop to zero. Locks are volatile: a crash clears them all while
leaving file data untouched.

File contents are stored through the NVMe block layer 4096 bytes at a
time, so namespace visibility and capacity are enforced by the same
machinery the host uses.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

from .ether_on import ETHERTYPE_LOCK_SYNC, EthernetFrame
from .nvme_core import (
    PAGE_SIZE,
    BlockStore,
    NamespaceNotVisible,
    NamespaceTable,
    NsKind,
    PcieFunction,
)

BLOCK_SIZE = PAGE_SIZE
PRIVATE_ROOTS = ("images", "containers")

MINI_DOCKER_LAYOUT = ("/images/blobs", "/images/manifest", "/containers")


class LambdaFsError(Exception):
    pass


class NamespaceMissing(LambdaFsError):
    pass


class PathNotFound(LambdaFsError):
    pass


class PathExists(LambdaFsError):
    pass


class PrivatePathBind(LambdaFsError):
    pass


class DoubleClose(LambdaFsError):
    pass


class StorageFull(LambdaFsError):
    pass


class NotAFile(LambdaFsError):
    pass


class Side(Enum):
    HOST = "host"
    CONTAINER = "container"

    @property
    def opposing(self) -> "Side":
        return Side.CONTAINER if self is Side.HOST else Side.HOST


class InodeKind(Enum):
    FILE = "file"
    DIR = "dir"
    SYMLINK = "symlink"


@dataclass
class Inode:
    ino: int
    kind: InodeKind
    parent: int
    size: int = 0
    blocks: list = field(default_factory=list)
    children: dict = field(default_factory=dict)  # dirs: name -> ino
    target: str = ""                              # symlinks
    version: int = 0                              # bumped on every write


@dataclass
class InodeLock:
    """Volatile reference counter gating cross-side access to one inode."""

    ino: int
    refcount: int = 0
    holder_side: Optional[Side] = None

    def grantable_to(self, side: Side) -> bool:
        # the opposing side's count must be zero
        return self.refcount == 0 or self.holder_side is side

    def acquire(self, side: Side) -> None:
        assert self.grantable_to(side)
        self.holder_side = side
        self.refcount += 1

    def release(self, side: Side) -> None:
        if self.refcount <= 0 or self.holder_side is not side:
            raise DoubleClose(f"lock on ino {self.ino} not held by {side.value}")
        self.refcount -= 1
        if self.refcount == 0:
            self.holder_side = None


@dataclass
class Handle:
    handle_id: int
    side: Side
    path: str
    ino: int
    parent_ino: int
    closed: bool = False


class Blocked:
    """FIFO-queued open waiting for the opposing side's counts to hit zero."""

    def __init__(self, side: Side, path: str, ino: int, parent_ino: int):
        self.side = side
        self.path = path
        self.ino = ino
        self.parent_ino = parent_ino
        self.handle: Optional[Handle] = None

    @property
    def granted(self) -> bool:
        return self.handle is not None


class VfsCacheModel:
    """Host-side VFS inode cache; container-side grants invalidate entries."""

    def __init__(self):
        self.entries: dict[int, dict] = {}
        self.valid: dict[int, bool] = {}
        self.invalidations = 0

    def fill(self, ino: int, metadata: dict) -> None:
        self.entries[ino] = dict(metadata)
        self.valid[ino] = True

    def invalidate(self, ino: int) -> None:
        if ino in self.valid and self.valid[ino]:
            self.invalidations += 1
        self.valid[ino] = False

    def lookup(self, ino: int) -> Optional[dict]:
        if self.valid.get(ino):
            return self.entries.get(ino)
        return None


class _BlockAllocator:
    def __init__(self, start: int, end: int):
        self._next = start
        self._end = end
        self._free: list[int] = []

    def alloc(self) -> int:
        if self._free:
            return self._free.pop()
        if self._next >= self._end:
            raise StorageFull("namespace block range exhausted")
        lba = self._next
        self._next += 1
        return lba

    def free(self, lba: int) -> None:
        self._free.append(lba)

    @property
    def available(self) -> int:
        return (self._end - self._next) + len(self._free)


def split_path(path: str) -> list[str]:
    if not path.startswith("/"):
        raise PathNotFound(f"paths are absolute, got {path!r}")
    return [c for c in path.split("/") if c]


def is_private_path(path: str) -> bool:
    parts = split_path(path)
    return bool(parts) and parts[0] in PRIVATE_ROOTS


class FsImage:
    """The filesystem instance owned by the device event loop."""

    def __init__(self, ns_table: NamespaceTable, block_store: Optional[BlockStore] = None,
                 sync_transport: Optional[Callable[[EthernetFrame], bool]] = None):
        self.ns_table = ns_table
        self.block_store = block_store if block_store is not None else BlockStore()
        self.sync_transport = sync_transport
        self.sync_packets: list[EthernetFrame] = []

        self._inodes: dict[int, Inode] = {}
        self._ino_seq = itertools.count(1)
        self._handle_seq = itertools.count(1)
        self.locks: dict[int, InodeLock] = {}
        self.wait_queue: deque[Blocked] = deque()
        self.vfs_cache = VfsCacheModel()
        self.bound_paths: dict[str, InodeLock] = {}

        private = ns_table.by_kind(NsKind.PRIVATE)
        sharable = ns_table.by_kind(NsKind.SHARABLE)
        self._ns_for_tree = {True: private, False: sharable}
        self._alloc = {
            private.nsid: _BlockAllocator(private.block_start, private.block_end),
            sharable.nsid: _BlockAllocator(sharable.block_start, sharable.block_end),
        }
        self.private_root = self._new_inode(InodeKind.DIR, parent=0)
        self.sharable_root = self._new_inode(InodeKind.DIR, parent=0)

    # -- inode plumbing -----------------------------------------------------

    def _new_inode(self, kind: InodeKind, parent: int) -> Inode:
        node = Inode(next(self._ino_seq), kind, parent)
        self._inodes[node.ino] = node
        return node

    def inode(self, ino: int) -> Inode:
        return self._inodes[ino]

    def _root_for(self, path: str) -> Inode:
        return self.private_root if is_private_path(path) else self.sharable_root

    def _ns_for(self, path: str):
        return self._ns_for_tree[is_private_path(path)]

    def _check_visibility(self, path: str, function: PcieFunction) -> None:
        if is_private_path(path) and function is PcieFunction.HOST:
            raise NamespaceNotVisible(
                f"{path} lives on the private namespace, invisible to the host function")

    def resolve(self, path: str, function: PcieFunction = PcieFunction.FW) -> Inode:
        """Walk ``path`` component by component and return its inode."""
        self._check_visibility(path, function)
        node = self._root_for(path)
        for comp in split_path(path):
            if node.kind is not InodeKind.DIR or comp not in node.children:
                raise PathNotFound(path)
            node = self._inodes[node.children[comp]]
        return node

    def lookup_child(self, dir_ino: int, name: str) -> Optional[int]:
        """Single-component lookup, the unit the path-walk cache memoizes."""
        node = self._inodes[dir_ino]
        if node.kind is not InodeKind.DIR:
            return None
        return node.children.get(name)

    def exists(self, path: str, function: PcieFunction = PcieFunction.FW) -> bool:
        try:
            self.resolve(path, function)
            return True
        except (PathNotFound, NamespaceNotVisible):
            return False

    # -- directory / file operations ----------------------------------------

    def mkdir(self, path: str, function: PcieFunction = PcieFunction.FW,
              parents: bool = False) -> Inode:
        self._check_visibility(path, function)
        parts = split_path(path)
        node = self._root_for(path)
        for i, comp in enumerate(parts):
            child = node.children.get(comp)
            if child is not None:
                node = self._inodes[child]
                if node.kind is not InodeKind.DIR:
                    raise PathExists(f"{'/'.join(parts[:i + 1])} is not a directory")
                continue
            if i < len(parts) - 1 and not parents:
                raise PathNotFound("/" + "/".join(parts[:i + 1]))
            fresh = self._new_inode(InodeKind.DIR, parent=node.ino)
            node.children[comp] = fresh.ino
            node = fresh
        return node

    def write_file(self, path: str, data: bytes,
                   function: PcieFunction = PcieFunction.FW,
                   create_parents: bool = False) -> Inode:
        self._check_visibility(path, function)
        parts = split_path(path)
        if not parts:
            raise NotAFile("cannot write the root directory")
        parent_path = "/" + "/".join(parts[:-1])
        if create_parents and parts[:-1]:
            self.mkdir(parent_path, function, parents=True)
        parent = self.resolve(parent_path if parts[:-1] else "/", function) \
            if parts[:-1] else self._root_for(path)
        if parent.kind is not InodeKind.DIR:
            raise NotAFile(f"{parent_path} is not a directory")
        name = parts[-1]
        if name in parent.children:
            node = self._inodes[parent.children[name]]
            if node.kind is not InodeKind.FILE:
                raise NotAFile(f"{path} is not a regular file")
        else:
            node = self._new_inode(InodeKind.FILE, parent=parent.ino)
            parent.children[name] = node.ino
        self._store_content(path, node, data)
        return node

    def append_file(self, path: str, data: bytes,
                    function: PcieFunction = PcieFunction.FW) -> Inode:
        existing = b""
        if self.exists(path, function):
            existing = self.read_file(path, function)
        return self.write_file(path, existing + data, function, create_parents=True)

    def _store_content(self, path: str, node: Inode, data: bytes) -> None:
        ns = self._ns_for(path)
        alloc = self._alloc[ns.nsid]
        needed = max(1, (len(data) + BLOCK_SIZE - 1) // BLOCK_SIZE)
        while len(node.blocks) < needed:
            node.blocks.append(alloc.alloc())
        while len(node.blocks) > needed:
            alloc.free(node.blocks.pop())
        for i, lba in enumerate(node.blocks):
            chunk = data[i * BLOCK_SIZE:(i + 1) * BLOCK_SIZE]
            self.block_store.write_block(ns.nsid, lba, chunk)
        node.size = len(data)
        node.version += 1

    def read_file(self, path: str, function: PcieFunction = PcieFunction.FW) -> bytes:
        node = self.resolve(path, function)
        if node.kind is not InodeKind.FILE:
            raise NotAFile(path)
        ns = self._ns_for(path)
        out = bytearray()
        for lba in node.blocks:
            out += self.block_store.read_block(ns.nsid, lba)
        return bytes(out[:node.size])

    def listdir(self, path: str, function: PcieFunction = PcieFunction.FW) -> list[str]:
        node = self.resolve(path, function)
        if node.kind is not InodeKind.DIR:
            raise NotAFile(f"{path} is not a directory")
        return sorted(node.children)

    def remove(self, path: str, function: PcieFunction = PcieFunction.FW,
               recursive: bool = False) -> None:
        parts = split_path(path)
        node = self.resolve(path, function)
        parent = self._inodes[node.parent]
        if node.kind is InodeKind.DIR and node.children:
            if not recursive:
                raise LambdaFsError(f"{path} is not empty")
            for name in list(node.children):
                self.remove(path.rstrip("/") + "/" + name, function, recursive=True)
        ns = self._ns_for(path)
        for lba in node.blocks:
            self._alloc[ns.nsid].free(lba)
        del parent.children[parts[-1]]
        del self._inodes[node.ino]
        self.locks.pop(node.ino, None)

    def used_blocks(self, kind: NsKind) -> int:
        ns = self.ns_table.by_kind(kind)
        alloc = self._alloc[ns.nsid]
        return ns.block_count - alloc.available

    # -- inode-lock protocol --------------------------------------------------

    def _lock_for(self, ino: int) -> InodeLock:
        lock = self.locks.get(ino)
        if lock is None:
            lock = InodeLock(ino)
            self.locks[ino] = lock
        return lock

    def _send_sync(self, kind: str, path: str, side: Side) -> bool:
        """Emit one lock-sync packet and wait for its acknowledgment."""
        payload = f"{kind}:{side.value}:{path}".encode()
        frame = EthernetFrame(bytes(6), bytes(6), ETHERTYPE_LOCK_SYNC, payload)
        self.sync_packets.append(frame)
        if self.sync_transport is not None:
            acked = self.sync_transport(frame)
            if not acked:
                raise LambdaFsError("lock-sync packet was not acknowledged")
            return True
        return True

    def bind(self, path: str) -> InodeLock:
        """Register a host FS file or directory for container-side processing.

        Idempotent per path. Sends one acknowledged sync packet so the host
        VFS learns about the shared counter before any grant can happen.
        """
        if is_private_path(path):
            raise PrivatePathBind(f"{path} is private namespace content")
        if path in self.bound_paths:
            return self.bound_paths[path]
        node = self.resolve(path, PcieFunction.FW)
        lock = self._lock_for(node.ino)
        self._send_sync("bind", path, Side.CONTAINER)
        self.bound_paths[path] = lock
        return lock

    def open(self, side: Side, path: str):
        """Open ``path`` from ``side``; returns a Handle or a Blocked token.

        A grant requires the opposing side's refcount to be zero on both the
        file inode and its immediate parent directory inode.
        """
        function = PcieFunction.HOST if side is Side.HOST else PcieFunction.FW
        node = self.resolve(path, function)
        parent_ino = node.parent if node.parent else node.ino
        file_lock = self._lock_for(node.ino)
        dir_lock = self._lock_for(parent_ino)
        if file_lock.grantable_to(side) and dir_lock.grantable_to(side):
            return self._grant(side, path, node.ino, parent_ino)
        waiter = Blocked(side, path, node.ino, parent_ino)
        self.wait_queue.append(waiter)
        return waiter

    def _grant(self, side: Side, path: str, ino: int, parent_ino: int) -> Handle:
        file_lock = self._lock_for(ino)
        dir_lock = self._lock_for(parent_ino)
        file_lock.acquire(side)
        if parent_ino != ino:
            dir_lock.acquire(side)
        handle = Handle(next(self._handle_seq), side, path, ino, parent_ino)
        if side is Side.CONTAINER:
            # the host VFS must stop trusting its cached view of this inode
            self.vfs_cache.invalidate(ino)
            self.vfs_cache.invalidate(parent_ino)
            self._send_sync("open", path, side)
        else:
            node = self._inodes[ino]
            self.vfs_cache.fill(ino, {"size": node.size, "version": node.version})
        return handle

    def close(self, handle: Handle) -> None:
        """Release a handle: decrement both counters, then hand any freed
        locks to FIFO waiters (head-of-line order keeps runs deterministic)."""
        if handle.closed:
            raise DoubleClose(f"handle {handle.handle_id} already closed")
        handle.closed = True
        self._lock_for(handle.ino).release(handle.side)
        if handle.parent_ino != handle.ino:
            self._lock_for(handle.parent_ino).release(handle.side)
        if handle.side is Side.CONTAINER:
            self._send_sync("close", handle.path, handle.side)
        self._process_wait_queue()

    def _process_wait_queue(self) -> None:
        while self.wait_queue:
            waiter = self.wait_queue[0]
            file_lock = self._lock_for(waiter.ino)
            dir_lock = self._lock_for(waiter.parent_ino)
            if file_lock.grantable_to(waiter.side) and dir_lock.grantable_to(waiter.side):
                self.wait_queue.popleft()
                waiter.handle = self._grant(waiter.side, waiter.path,
                                            waiter.ino, waiter.parent_ino)
            else:
                break

    def read_via_handle(self, handle: Handle) -> bytes:
        if handle.closed:
            raise DoubleClose("read on a closed handle")
        if handle.side is Side.HOST:
            # a valid cache entry answers metadata; content always reflects
            # the device because invalidation forces a re-fetch on grant
            cached = self.vfs_cache.lookup(handle.ino)
            node = self._inodes[handle.ino]
            if cached is None:
                self.vfs_cache.fill(handle.ino, {"size": node.size, "version": node.version})
        return self.read_file(handle.path, PcieFunction.FW)

    def write_via_handle(self, handle: Handle, data: bytes) -> None:
        if handle.closed:
            raise DoubleClose("write on a closed handle")
        self.write_file(handle.path, data, PcieFunction.FW)
        if handle.side is Side.CONTAINER:
            self.vfs_cache.invalidate(handle.ino)

    def refcount(self, path: str, side: Optional[Side] = None) -> int:
        try:
            node = self.resolve(path, PcieFunction.FW)
        except PathNotFound:
            return 0
        lock = self.locks.get(node.ino)
        if lock is None:
            return 0
        if side is not None and lock.holder_side is not side:
            return 0
        return lock.refcount

    def crash_recover(self) -> "FsImage":
        """Power-failure semantics: every lock and queued waiter evaporates;
        file data and directory structure persist unchanged."""
        self.locks.clear()
        self.wait_queue.clear()
        self.bound_paths.clear()
        self.vfs_cache = VfsCacheModel()
        return self


def mkfs(ns_table: NamespaceTable, block_store: Optional[BlockStore] = None,
         sync_transport: Optional[Callable[[EthernetFrame], bool]] = None) -> FsImage:
    """Initialize the device filesystem with the container-engine layout on
    the private namespace and an empty sharable root."""
    try:
        ns_table.by_kind(NsKind.PRIVATE)
        ns_table.by_kind(NsKind.SHARABLE)
    except Exception as exc:
        raise NamespaceMissing(str(exc)) from exc
    fs = FsImage(ns_table, block_store, sync_transport)
    for path in MINI_DOCKER_LAYOUT:
        fs.mkdir(path, PcieFunction.FW, parents=True)
    return fs


# -- textual trace format -------------------------------------------------------
#
# One event per line:   open|close|bind|crash <side> <path> [-> grant|block]
# ``close`` releases the most recent live handle that side holds on the path.


@dataclass
class TraceOutcome:
    line: str
    outcome: str
    expected: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.expected is None or self.outcome == self.expected


def run_trace(fs: FsImage, lines: Iterable[str]) -> list[TraceOutcome]:
    live: dict[tuple[Side, str], list[Handle]] = {}
    waiters: list[Blocked] = []
    results = []
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        expected = None
        if "->" in line:
            line, expected = (part.strip() for part in line.split("->", 1))
        fields = line.split()
        op = fields[0]
        side = Side(fields[1]) if len(fields) > 1 else Side.HOST
        path = fields[2] if len(fields) > 2 else "/"

        if op == "open":
            result = fs.open(side, path)
            if isinstance(result, Handle):
                live.setdefault((side, path), []).append(result)
                outcome = "grant"
            else:
                waiters.append(result)
                outcome = "block"
        elif op == "close":
            handles = live.get((side, path), [])
            if not handles:
                outcome = "error:DoubleClose"
            else:
                fs.close(handles.pop())
                outcome = "ok"
                for waiter in waiters[:]:
                    if waiter.granted:
                        live.setdefault((waiter.side, waiter.path), []).append(waiter.handle)
                        waiters.remove(waiter)
        elif op == "bind":
            try:
                fs.bind(path)
                outcome = "ok"
            except (PrivatePathBind, PathNotFound) as exc:
                outcome = f"error:{type(exc).__name__}"
        elif op == "crash":
            fs.crash_recover()
            live.clear()
            waiters.clear()
            outcome = "ok"
        else:
            raise ValueError(f"unknown trace op {op!r}")
        results.append(TraceOutcome(line, outcome, expected))
    return results


# -- exhaustive lock-protocol model check ---------------------------------------


@dataclass
class ModelCheckReport:
    program_pairs: int = 0
    interleavings: int = 0
    steps: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _well_formed_programs(length: int) -> list[tuple[str, ...]]:
    """All open/close sequences of exactly ``length`` ops where no close
    precedes its open (prefix closes never exceed prefix opens)."""
    programs = []
    for bits in itertools.product(("open", "close"), repeat=length):
        depth = 0
        for op in bits:
            depth += 1 if op == "open" else -1
            if depth < 0:
                break
        else:
            programs.append(bits)
    return programs


class _SideState:
    def __init__(self, side: Side, program: tuple[str, ...]):
        self.side = side
        self.program = program
        self.pc = 0
        self.handles: list[Handle] = []
        self.waiter: Optional[Blocked] = None

    def poll_waiter(self) -> None:
        if self.waiter is not None and self.waiter.granted:
            self.handles.append(self.waiter.handle)
            self.waiter = None
            self.pc += 1

    @property
    def stalled(self) -> bool:
        return self.waiter is not None

    @property
    def done(self) -> bool:
        return self.pc >= len(self.program) and not self.stalled


def _fresh_fs() -> tuple[FsImage, str]:
    from .nvme_core import define_namespaces

    table = define_namespaces([
        {"kind": "private", "blocks": (0, 64)},
        {"kind": "sharable", "blocks": (64, 256)},
    ])
    fs = mkfs(table)
    fs.mkdir("/data")
    fs.write_file("/data/f", b"shared")
    return fs, "/data/f"


def _run_interleaving(host_prog, cont_prog, order, report: ModelCheckReport) -> None:
    fs, path = _fresh_fs()
    node = fs.resolve(path)
    sides = {
        Side.HOST: _SideState(Side.HOST, host_prog),
        Side.CONTAINER: _SideState(Side.CONTAINER, cont_prog),
    }

    def live_on_file(side: Side) -> int:
        return sum(1 for h in sides[side].handles if not h.closed and h.ino == node.ino)

    for turn in order:
        state = sides[turn]
        state.poll_waiter()
        if state.stalled or state.pc >= len(state.program):
            continue  # stalled side skips its turn; trailing turns may be spent
        op = state.program[state.pc]
        if op == "open":
            opposing = turn.opposing
            opposing_count = fs.refcount(path, opposing) + (
                fs.locks.get(node.parent).refcount
                if fs.locks.get(node.parent) and fs.locks[node.parent].holder_side is opposing
                else 0)
            result = fs.open(turn, path)
            if isinstance(result, Handle):
                if opposing_count != 0:
                    report.violations.append(
                        (host_prog, cont_prog, order, "grant with opposing refcount != 0"))
                state.handles.append(result)
                state.pc += 1
            else:
                if opposing_count == 0:
                    report.violations.append(
                        (host_prog, cont_prog, order, "block with opposing refcount == 0"))
                state.waiter = result
        else:  # close
            open_handles = [h for h in state.handles if not h.closed]
            if not open_handles:
                state.pc += 1  # nothing to close on this branch of the merge
                continue
            fs.close(open_handles[-1])
            state.pc += 1
            for s in sides.values():
                s.poll_waiter()
        report.steps += 1

        # (a) no simultaneous cross-side handles on the same inode
        if live_on_file(Side.HOST) > 0 and live_on_file(Side.CONTAINER) > 0:
            report.violations.append(
                (host_prog, cont_prog, order, "simultaneous cross-side handles"))
        # refcount soundness at every step
        for side in (Side.HOST, Side.CONTAINER):
            if fs.refcount(path, side) != sum(
                    1 for h in sides[side].handles if not h.closed and h.ino == node.ino):
                report.violations.append(
                    (host_prog, cont_prog, order, "refcount != live handle count"))

    # (c) crash clears all counters no matter where the run ended
    fs.crash_recover()
    if any(lock.refcount for lock in fs.locks.values()):
        report.violations.append((host_prog, cont_prog, order, "refcount after crash"))


def model_check(max_events: int = 8) -> ModelCheckReport:
    """Exhaustively enumerate every pair of well-formed host/container
    open-close programs with at most ``max_events`` total events, and every
    interleaving of each pair."""
    report = ModelCheckReport()
    for host_len in range(max_events + 1):
        for cont_len in range(max_events + 1 - host_len):
            host_programs = _well_formed_programs(host_len)
            cont_programs = _well_formed_programs(cont_len)
            orders = [
                order for order in _merge_orders(host_len, cont_len)
            ]
            for hp in host_programs:
                for cp in cont_programs:
                    report.program_pairs += 1
                    for order in orders:
                        report.interleavings += 1
                        _run_interleaving(hp, cp, order, report)
    return report


def _merge_orders(a: int, b: int) -> Iterable[tuple[Side, ...]]:
    """Every way to interleave a host program of ``a`` events with a
    container program of ``b`` events (C(a+b, a) merge orders)."""
    for positions in itertools.combinations(range(a + b), a):
        order = [Side.CONTAINER] * (a + b)
        for p in positions:
            order[p] = Side.HOST
        yield tuple(order)
