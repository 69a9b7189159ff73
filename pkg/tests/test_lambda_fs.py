import random

import pytest

from cstorsim.lambda_fs import (
    Blocked,
    DoubleClose,
    FsImage,
    Handle,
    NamespaceMissing,
    PathNotFound,
    PrivatePathBind,
    Side,
    StorageFull,
    mkfs,
    model_check,
    run_trace,
)
from cstorsim.nvme_core import (
    NamespaceNotVisible,
    NamespaceTable,
    Namespace,
    NsKind,
    PcieFunction,
    define_namespaces,
)

LAYOUT = [
    {"kind": "private", "blocks": (0, 1000)},
    {"kind": "sharable", "blocks": (1000, 10000)},
]


@pytest.fixture
def fs():
    image = mkfs(define_namespaces(LAYOUT))
    image.mkdir("/data")
    image.write_file("/data/tpch", b"lineitem rows")
    image.write_file("/data/other", b"other bytes")
    return image


class TestMkfs:
    def test_layout_exists_on_fw_function(self, fs):
        for path in ("/images/blobs", "/images/manifest", "/containers"):
            assert fs.exists(path, PcieFunction.FW)

    def test_layout_invisible_to_host(self, fs):
        with pytest.raises(NamespaceNotVisible):
            fs.resolve("/images/blobs", PcieFunction.HOST)

    def test_sharable_root_empty_after_mkfs(self):
        image = mkfs(define_namespaces(LAYOUT))
        assert image.listdir("/", PcieFunction.HOST) == []

    def test_missing_private_namespace(self):
        table = NamespaceTable([Namespace(1, NsKind.SHARABLE, 0, 100)])
        with pytest.raises(NamespaceMissing):
            mkfs(table)


class TestFiles:
    def test_write_read_roundtrip(self, fs):
        data = bytes(range(256)) * 40  # spans multiple blocks
        fs.write_file("/data/big", data)
        assert fs.read_file("/data/big") == data

    def test_read_missing(self, fs):
        with pytest.raises(PathNotFound):
            fs.read_file("/data/nope")

    def test_storage_full(self):
        image = mkfs(define_namespaces([
            {"kind": "private", "blocks": (0, 4)},
            {"kind": "sharable", "blocks": (4, 8)},
        ]))
        with pytest.raises(StorageFull):
            image.write_file("/fat", b"x" * (4096 * 10))

    def test_block_accounting(self, fs):
        before = fs.used_blocks(NsKind.SHARABLE)
        fs.write_file("/data/two", b"y" * 5000)
        assert fs.used_blocks(NsKind.SHARABLE) == before + 2
        fs.remove("/data/two")
        assert fs.used_blocks(NsKind.SHARABLE) == before


class TestBind:
    def test_bind_registers_lock_and_sends_sync(self, fs):
        wire = []
        fs.sync_transport = lambda frame: (wire.append(frame), True)[1]
        lock = fs.bind("/data/tpch")
        assert lock.refcount == 0
        assert len(wire) == 1
        assert wire[0].payload == b"bind:container:/data/tpch"

    def test_bind_idempotent(self, fs):
        lock1 = fs.bind("/data/tpch")
        lock2 = fs.bind("/data/tpch")
        assert lock1 is lock2
        assert len(fs.sync_packets) == 1

    def test_bind_private_refused(self, fs):
        with pytest.raises(PrivatePathBind):
            fs.bind("/images/blobs")

    def test_bind_missing(self, fs):
        with pytest.raises(PathNotFound):
            fs.bind("/data/missing")


class TestLockProtocol:
    def test_container_open_when_host_idle(self, fs):
        handle = fs.open(Side.CONTAINER, "/data/tpch")
        assert isinstance(handle, Handle)
        assert fs.refcount("/data/tpch", Side.CONTAINER) == 1
        assert fs.refcount("/data", Side.CONTAINER) == 1

    def test_container_grant_invalidates_host_cache(self, fs):
        h = fs.open(Side.HOST, "/data/tpch")
        node = fs.resolve("/data/tpch")
        assert fs.vfs_cache.lookup(node.ino) is not None
        fs.close(h)
        fs.open(Side.CONTAINER, "/data/tpch")
        assert fs.vfs_cache.lookup(node.ino) is None

    def test_open_blocks_while_opposing_holds(self, fs):
        host = fs.open(Side.HOST, "/data/tpch")
        blocked = fs.open(Side.CONTAINER, "/data/tpch")
        assert isinstance(blocked, Blocked)
        fs.close(host)
        assert blocked.granted

    def test_parent_directory_lock_blocks_siblings(self, fs):
        host = fs.open(Side.HOST, "/data/tpch")
        blocked = fs.open(Side.CONTAINER, "/data/other")
        assert isinstance(blocked, Blocked)  # /data dir is host-held
        fs.close(host)
        assert blocked.granted

    def test_same_side_reentrant(self, fs):
        h1 = fs.open(Side.HOST, "/data/tpch")
        h2 = fs.open(Side.HOST, "/data/tpch")
        assert isinstance(h2, Handle)
        assert fs.refcount("/data/tpch", Side.HOST) == 2
        fs.close(h1)
        fs.close(h2)
        assert fs.refcount("/data/tpch") == 0

    def test_open_close_n_then_opposing_open(self, fs):
        for _ in range(5):
            h = fs.open(Side.HOST, "/data/tpch")
            fs.close(h)
        assert isinstance(fs.open(Side.CONTAINER, "/data/tpch"), Handle)

    def test_fifo_grant_order(self, fs):
        host = fs.open(Side.HOST, "/data/tpch")
        w1 = fs.open(Side.CONTAINER, "/data/tpch")
        w2 = fs.open(Side.CONTAINER, "/data/tpch")
        fs.close(host)
        # both container waiters are grantable once the host releases
        assert w1.granted and w2.granted
        assert w1.handle.handle_id < w2.handle.handle_id

    def test_double_close(self, fs):
        h = fs.open(Side.HOST, "/data/tpch")
        fs.close(h)
        with pytest.raises(DoubleClose):
            fs.close(h)

    def test_random_trace_refcount_equals_live_handles(self, fs):
        rng = random.Random(2024)
        live = {Side.HOST: [], Side.CONTAINER: []}
        waiters = []
        for _ in range(500):
            side = rng.choice([Side.HOST, Side.CONTAINER])
            if live[side] and rng.random() < 0.5:
                fs.close(live[side].pop(rng.randrange(len(live[side]))))
            else:
                got = fs.open(side, "/data/tpch")
                if isinstance(got, Handle):
                    live[side].append(got)
                else:
                    waiters.append(got)
            for w in waiters[:]:
                if w.granted:
                    live[w.side].append(w.handle)
                    waiters.remove(w)
            for s in (Side.HOST, Side.CONTAINER):
                assert fs.refcount("/data/tpch", s) == len(live[s])
            assert not (live[Side.HOST] and live[Side.CONTAINER])


class TestCoherence:
    def test_container_write_then_host_read_sees_new_content(self, fs):
        ch = fs.open(Side.CONTAINER, "/data/tpch")
        fs.write_via_handle(ch, b"rewritten by container")
        fs.close(ch)
        hh = fs.open(Side.HOST, "/data/tpch")
        assert fs.read_via_handle(hh) == b"rewritten by container"
        fs.close(hh)


class TestCrash:
    def test_crash_clears_refcounts(self, fs):
        for _ in range(3):
            fs.open(Side.HOST, "/data/tpch")
        assert fs.refcount("/data/tpch", Side.HOST) == 3
        fs.crash_recover()
        assert fs.refcount("/data/tpch") == 0
        assert all(lock.refcount == 0 for lock in fs.locks.values())

    def test_crash_without_locks_is_identity(self, fs):
        content = fs.read_file("/data/tpch")
        fs.crash_recover()
        assert fs.read_file("/data/tpch") == content
        assert fs.exists("/images/blobs")

    def test_post_crash_replay_never_blocks_on_old_handles(self, fs):
        fs.open(Side.HOST, "/data/tpch")
        fs.open(Side.HOST, "/data/tpch")
        fs.crash_recover()
        # pre-crash handles are gone; a fresh container open must grant
        got = fs.open(Side.CONTAINER, "/data/tpch")
        assert isinstance(got, Handle)


class TestTraceFormat:
    def test_annotated_trace(self, fs):
        trace = """
        # host takes the file, container must wait
        open host /data/tpch -> grant
        open container /data/tpch -> block
        close host /data/tpch
        open container /data/tpch -> grant
        """
        outcomes = run_trace(fs, trace.splitlines())
        assert all(o.ok for o in outcomes)

    def test_crash_line_resets(self, fs):
        trace = """
        open host /data/tpch -> grant
        crash host /
        open container /data/tpch -> grant
        """
        outcomes = run_trace(fs, trace.splitlines())
        assert all(o.ok for o in outcomes)

    def test_bind_line(self, fs):
        outcomes = run_trace(fs, ["bind container /data/tpch -> ok",
                                  "bind container /images/blobs -> error:PrivatePathBind"])
        assert all(o.ok for o in outcomes)


class TestModelCheck:
    def test_small_exhaustive_run_is_clean(self):
        report = model_check(max_events=5)
        assert report.ok, report.violations[:3]
        assert report.program_pairs > 0
        assert report.interleavings > report.program_pairs
