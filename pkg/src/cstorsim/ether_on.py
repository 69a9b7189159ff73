"""Ethernet tunneled over NVMe vendor commands.

Frames are serialized into a single 4096-byte PRP page and carried by two
vendor opcodes: 0xE0 transmits host->device, 0xE1 is a pre-armed receive
command the device completes to deliver an inbound frame (an upcall). Four
receive commands per SQ are kept armed; the driver re-arms one immediately
after each delivery so the device can keep talking.

Wire format of the page prefix (lengths in bytes, big-endian fields):

    [dst MAC 6][src MAC 6][ethertype 2][payload 0..1500][CRC-32 4]

The CRC-32 (zlib polynomial) covers header+payload. Total encoded size is
therefore 18..1518 bytes; the command's ``length`` field holds it.
"""

from __future__ import annotations

import ipaddress
import struct
import zlib
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .nvme_core import (
    NSID_NONE,
    OP_RX_FRAME,
    OP_TX_FRAME,
    PAGE_SIZE,
    MsiEvent,
    NvmeCommand,
    NvmeController,
    Page,
    PcieFunction,
    QueueFull,
    QueuePair,
)

HEADER_LEN = 14
FCS_LEN = 4
MIN_FRAME = HEADER_LEN + FCS_LEN          # empty payload
MAX_PAYLOAD = 1500
MAX_FRAME = HEADER_LEN + MAX_PAYLOAD + FCS_LEN  # 1518, fits one page

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_LOCK_SYNC = 0x88B5  # local-experimental ethertype: inode-lock sync packets

# Magic "reception code" placed in dword 12 of every armed receive command.
RECEPTION_CODE = 0x5258_4652

DEFAULT_UPCALL_SLOTS = 4


class EtherOnError(Exception):
    pass


class FrameTooLarge(EtherOnError):
    pass


class BadChecksum(EtherOnError):
    pass


class MalformedFrame(EtherOnError):
    pass


class WrongOpcode(EtherOnError):
    pass


class NoArmedSlot(EtherOnError):
    pass


class PendingOverflow(EtherOnError):
    pass


class SubnetExhausted(EtherOnError):
    pass


@dataclass(frozen=True)
class EthernetFrame:
    dst_mac: bytes
    src_mac: bytes
    ethertype: int
    payload: bytes = b""

    def __post_init__(self):
        if len(self.dst_mac) != 6 or len(self.src_mac) != 6:
            raise MalformedFrame("MAC addresses are 6 bytes")
        if not 0 <= self.ethertype <= 0xFFFF:
            raise MalformedFrame("ethertype must fit 16 bits")

    @property
    def encoded_size(self) -> int:
        return HEADER_LEN + len(self.payload) + FCS_LEN

    @property
    def fcs(self) -> int:
        return zlib.crc32(self._header() + self.payload) & 0xFFFFFFFF

    def _header(self) -> bytes:
        return self.dst_mac + self.src_mac + struct.pack(">H", self.ethertype)


def encode_frame(frame: EthernetFrame) -> bytes:
    """Serialize to wire bytes. Frames above the 1518-byte Ethernet maximum
    are rejected rather than fragmented (one frame <-> one page)."""
    if frame.encoded_size > MAX_FRAME:
        raise FrameTooLarge(
            f"encoded size {frame.encoded_size} exceeds {MAX_FRAME} bytes")
    body = frame._header() + frame.payload
    return body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_frame(buf: bytes) -> EthernetFrame:
    if len(buf) < MIN_FRAME:
        raise MalformedFrame(f"{len(buf)} bytes is below the {MIN_FRAME}-byte minimum")
    if len(buf) > MAX_FRAME:
        raise MalformedFrame(f"{len(buf)} bytes exceeds the {MAX_FRAME}-byte maximum")
    body, fcs_bytes = buf[:-FCS_LEN], buf[-FCS_LEN:]
    (fcs,) = struct.unpack(">I", fcs_bytes)
    if zlib.crc32(body) & 0xFFFFFFFF != fcs:
        raise BadChecksum("frame check sequence mismatch")
    dst, src = body[:6], body[6:12]
    (ethertype,) = struct.unpack(">H", body[12:14])
    return EthernetFrame(dst, src, ethertype, body[HEADER_LEN:])


def encode_tx(frame: EthernetFrame, command_id: int = 0,
              page: Optional[Page] = None) -> tuple[NvmeCommand, Page]:
    """Pack a frame into a transmit command (opcode 0xE0) plus its page."""
    wire = encode_frame(frame)
    if page is None:
        page = Page(0)
    page.write(wire, 0)
    cmd = NvmeCommand(opcode=OP_TX_FRAME, command_id=command_id,
                      nsid=NSID_NONE, prp=page, length=len(wire))
    return cmd, page


def decode(cmd: NvmeCommand, page: Page) -> EthernetFrame:
    """Recover the frame carried by a 0xE0/0xE1 command, verifying the FCS."""
    if cmd.opcode not in (OP_TX_FRAME, OP_RX_FRAME):
        raise WrongOpcode(f"opcode 0x{cmd.opcode:02X} is not a frame command")
    if not MIN_FRAME <= cmd.length <= MAX_FRAME:
        raise MalformedFrame(f"length {cmd.length} is not a legal frame size")
    return decode_frame(page.read(cmd.length))


# -- endpoints and addressing -------------------------------------------------


class EndpointRole(Enum):
    HOST = "host"
    DOCKERSSD = "dockerssd"


@dataclass(frozen=True)
class Endpoint:
    node_id: int
    ip: str
    mac: bytes
    role: EndpointRole


def mac_for_node(node_id: int) -> bytes:
    # locally administered unicast prefix 0x02
    return bytes([0x02, 0x00]) + struct.pack(">I", node_id)


def assign_ips(node_count: int, subnet: str = "10.0.0.0/24") -> list[Endpoint]:
    """Deterministic addressing for one host plus ``node_count`` devices.

    The host takes the first usable address; devices follow sequentially.
    """
    if node_count < 1:
        raise ValueError("pool needs at least one device node")
    net = ipaddress.ip_network(subnet, strict=True)
    hosts = net.num_addresses - 2  # network + broadcast
    if node_count + 1 > hosts:
        raise SubnetExhausted(
            f"{subnet} offers {hosts} usable addresses, need {node_count + 1}")
    base = int(net.network_address)
    endpoints = [Endpoint(0, str(ipaddress.ip_address(base + 1)),
                          mac_for_node(0), EndpointRole.HOST)]
    for i in range(1, node_count + 1):
        endpoints.append(Endpoint(i, str(ipaddress.ip_address(base + 1 + i)),
                                  mac_for_node(i), EndpointRole.DOCKERSSD))
    return endpoints


# -- upcall pool ---------------------------------------------------------------


class SlotState(Enum):
    ARMED = "armed"
    DELIVERING = "delivering"


@dataclass
class UpcallSlot:
    command_id: int
    page: Page
    state: SlotState = SlotState.ARMED
    rx_length: int = 0  # byte count reported through the completion path


@dataclass
class UpcallPool:
    """Device-held receive commands plus the pending buffer used when all
    slots are busy (inbound frames queue FIFO until a slot re-arms)."""

    qp: QueuePair
    capacity: int = DEFAULT_UPCALL_SLOTS
    slots: dict[int, UpcallSlot] = field(default_factory=dict)
    arm_order: deque = field(default_factory=deque)
    pending: deque = field(default_factory=deque)
    pending_bound: int = 1024
    delivered: int = 0

    def armed_count(self) -> int:
        return sum(1 for s in self.slots.values() if s.state is SlotState.ARMED)


class EtherOnDriver:
    """Host-side driver model for one device link.

    Owns command-id allocation on its SQ, keeps the upcall pool armed, and
    hands decoded inbound frames to ``rx_handler`` (or queues them on
    ``rx_queue``). ``auto_rearm=False`` models a driver that stops re-arming,
    which starves the pool (useful for the degenerate-pool tests).
    """

    def __init__(self, controller: NvmeController, qp: QueuePair,
                 endpoint: Endpoint, upcall_slots: int = DEFAULT_UPCALL_SLOTS,
                 auto_rearm: bool = True, pending_bound: int = 1024,
                 rx_handler: Optional[Callable[[EthernetFrame], None]] = None,
                 tx_sink: Optional[Callable[[EthernetFrame], None]] = None,
                 shared_queue: bool = False):
        self.controller = controller
        self.qp = qp
        self.endpoint = endpoint
        self.shared_queue = shared_queue
        self.auto_rearm = auto_rearm
        self.rx_handler = rx_handler
        self.tx_sink = tx_sink
        self.rx_queue: deque[EthernetFrame] = deque()
        self.device_rx: deque[EthernetFrame] = deque()
        self.tx_log: list[EthernetFrame] = []
        self._next_cid = 0
        self.pool = UpcallPool(qp, capacity=upcall_slots,
                               pending_bound=pending_bound)
        if upcall_slots:
            self.arm_upcalls(upcall_slots)

    def _alloc_cid(self) -> int:
        # 16-bit ids, skipping any still outstanding on this SQ
        for _ in range(0x10000):
            cid = self._next_cid
            self._next_cid = (self._next_cid + 1) & 0xFFFF
            if cid not in self.qp.outstanding:
                return cid
        raise QueueFull("no free command ids")

    # -- outbound (host -> device) ----------------------------------------

    def send(self, frame: EthernetFrame) -> None:
        """Translate a frame to a 0xE0 command and submit it; the device
        fetches, decodes and completes it on its next SQ service pass."""
        cmd, _page = encode_tx(frame, self._alloc_cid(),
                               self.controller.page_alloc.alloc())
        self.controller.submit(self.qp, cmd, PcieFunction.HOST)
        self.tx_log.append(frame)
        self._device_service_sq()

    def _device_service_sq(self) -> None:
        """Device side of the link: fetch every unfetched command in FIFO
        order. Transmit frames are decoded into the device inbox and
        completed; receive frames are held as armed upcall slots."""
        qp = self.qp
        while qp._fetch_cursor < qp.sq_doorbell:
            cmd = self.controller.device_fetch(qp)
            if cmd.opcode == OP_TX_FRAME:
                frame = decode(cmd, cmd.prp)
                if self.tx_sink is not None:
                    self.tx_sink(frame)
                else:
                    self.device_rx.append(frame)
                self.controller.device_complete(qp, cmd.command_id)
            elif cmd.opcode == OP_RX_FRAME:
                self.pool.slots[cmd.command_id] = UpcallSlot(cmd.command_id, cmd.prp)
                self.pool.arm_order.append(cmd.command_id)
            elif self.shared_queue and cmd.is_block():
                # block I/O sharing the frame queue (non-default config)
                self.controller.execute_block(cmd, PcieFunction.HOST)
                self.controller.device_complete(qp, cmd.command_id)
            else:
                raise WrongOpcode(
                    f"opcode 0x{cmd.opcode:02X} on a dedicated frame queue")

    # -- inbound (device -> host) ------------------------------------------

    def arm_upcalls(self, n: int) -> UpcallPool:
        """Pre-submit ``n`` receive-frame commands, each with its own page
        and the reception code in dword 12."""
        if n > self.qp.sq_free():
            raise QueueFull(
                f"SQ {self.qp.qid} lacks {n} free entries for receive frames")
        for _ in range(n):
            self._arm_one()
        return self.pool

    def _arm_one(self) -> None:
        cid = self._alloc_cid()
        page = self.controller.page_alloc.alloc()
        cmd = NvmeCommand(opcode=OP_RX_FRAME, command_id=cid, nsid=NSID_NONE,
                          prp=page, length=0, dw12=RECEPTION_CODE)
        self.controller.submit(self.qp, cmd, PcieFunction.HOST)
        # the device fetches and holds the command until a frame arrives
        self._device_service_sq()

    def on_upcall_complete(self, event: MsiEvent) -> EthernetFrame:
        """Driver-side completion handler: decode, forward, re-arm."""
        slot = self.pool.slots.pop(event.command_id)
        frame = decode_frame(slot.page.read(slot.rx_length))
        if self.rx_handler is not None:
            self.rx_handler(frame)
        else:
            self.rx_queue.append(frame)
        if self.auto_rearm:
            self._arm_one()
            self._drain_pending()
        return frame

    def _drain_pending(self) -> None:
        while self.pool.pending and self.pool.armed_count() > 0:
            frame = self.pool.pending.popleft()
            deliver_upcall(self.controller, self.pool, frame, driver=self)


def arm_upcalls(driver: EtherOnDriver, n: int) -> UpcallPool:
    return driver.arm_upcalls(n)


def deliver_upcall(controller: NvmeController, pool: UpcallPool,
                   frame: EthernetFrame,
                   driver: Optional[EtherOnDriver] = None) -> Optional[MsiEvent]:
    """Device-side delivery of one inbound frame.

    Consumes the oldest armed slot: the frame is serialized into the slot's
    kernel page and the outstanding receive command is completed, raising an
    MSI. With no armed slot the frame parks in the pending buffer (bounded)
    and is delivered on the next re-arm. Returns the MSI, or None if parked.
    """
    wire = encode_frame(frame)  # FrameTooLarge propagates before state changes
    cid = None
    while pool.arm_order:
        candidate = pool.arm_order[0]
        if candidate in pool.slots and pool.slots[candidate].state is SlotState.ARMED:
            cid = candidate
            break
        pool.arm_order.popleft()
    if cid is None:
        if len(pool.pending) >= pool.pending_bound:
            raise PendingOverflow(
                f"device pending buffer full ({pool.pending_bound} frames)")
        pool.pending.append(frame)
        return None

    pool.arm_order.popleft()
    slot = pool.slots[cid]
    slot.state = SlotState.DELIVERING
    slot.page.write(wire, 0)
    slot.rx_length = len(wire)
    event = controller.device_complete(pool.qp, cid, status=0)
    pool.delivered += 1
    if driver is not None:
        driver.on_upcall_complete(event)
    return event


# -- fabric --------------------------------------------------------------------


class NetworkFabric:
    """Static switching between endpoints; IP->MAC is a table built at pool
    construction, so no ARP traffic exists in the simulation."""

    def __init__(self, endpoints: list[Endpoint]):
        self.endpoints = {ep.mac: ep for ep in endpoints}
        self.by_ip = {ep.ip: ep for ep in endpoints}
        self._ports: dict[bytes, Callable[[EthernetFrame], None]] = {}
        if len(self.by_ip) != len(endpoints):
            raise ValueError("endpoint IPs must be unique across the pool")

    def attach(self, mac: bytes, deliver: Callable[[EthernetFrame], None]) -> None:
        self._ports[mac] = deliver

    def mac_of(self, ip: str) -> bytes:
        return self.by_ip[ip].mac

    def route(self, frame: EthernetFrame) -> None:
        port = self._ports.get(frame.dst_mac)
        if port is None:
            raise EtherOnError(f"no endpoint with MAC {frame.dst_mac.hex(':')}")
        port(frame)
