"""Per-node protocol agent.

Each node reacts to slot boundaries, frame deliveries and its own timers.
It never looks at the obstacle: everything it knows comes from frames it
heard (or failed to hear). Side effects go through a small ``net`` context
supplied by the engine (``send``, ``timer``, ``log``, ``note``).
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from .detection import (
    RoleKind,
    adjacent_nodes,
    classify_from_table,
    leader_detection_step,
    left_node_detection_step,
    probe_links,
    right_node_detection_step,
    role_of,
    Role,
)
from .messages import MULTICAST, BtdpPayload, Kind, Message, Mode, PrmPayload, make_btdp
from .npt import compute_npt
from .prep import decision_rows, pair_links
from .recovery import Unreachable, select_path
from .table import BlockLinkTable, LinkKey, LinkStatus

OMNI = "omni"
Antenna = Union[str, FrozenSet[int]]


class Phase(str, enum.Enum):
    NORMAL = "Normal"
    PREPARING = "Preparing"
    DETECTING = "Detecting"
    RECONFIGURING = "Reconfiguring"
    IDLE = "Idle"


def antenna_str(ant: Antenna) -> str:
    if ant == OMNI:
        return OMNI
    return "dir:" + ",".join(str(n) for n in sorted(ant))


@dataclass
class _Tx:
    attempts: int = 1
    acked: bool = False
    sts: bool = False


@dataclass
class LeaderState:
    t0: int
    npt: int
    rows: int
    frame: Optional[Kind] = None  # last frame from the predecessor in its current slot
    trouble: bool = False  # an LBS or STS came from upstream
    sts_sent: bool = False
    clear: set = field(default_factory=set)


@dataclass
class Session:
    btdp: BtdpPayload
    role: Role
    table: BlockLinkTable
    in_adj: bool
    prm: Optional[PrmPayload] = None


@dataclass
class _Prober:
    session: Tuple[int, int]
    links: Tuple[LinkKey, ...]
    window_end: int
    idx: int = 0
    stage: str = "btdp"
    token: int = 0
    outcomes: Dict[LinkKey, Optional[bool]] = field(default_factory=dict)


class BtdNode:
    def __init__(self, index: int, N: int, slot: int, control_slot: int, delta: int, net):
        self.index = index
        self.N = N
        self.slot = slot
        self.cs = control_slot
        self.delta = delta
        self.net = net

        self.route: Tuple[int, ...] = tuple(range(N))
        self.pred: Optional[int] = index - 1 if index > 0 else None
        self.succ: Optional[int] = index + 1 if index + 1 < N else None
        self.parity = index % 2
        self.phase = Phase.NORMAL
        self.antenna: Antenna = frozenset(n for n in (self.pred, self.succ) if n is not None)
        self.streaming = True  # every node starts backlogged
        self.seq = 0

        self.tx: Optional[_Tx] = None
        self.got_frame = False
        self.tracking = self.pred is not None
        self.upstream_blocked = False
        self.pending_sts = False
        self.left_stopped = False

        self.leader: Optional[LeaderState] = None
        self.deferred = False

        self.sessions: Dict[Tuple[int, int], Session] = {}
        self.prm_seen: Dict[Tuple[int, int], PrmPayload] = {}
        self.prm_mcast: set = set()
        self.prm_chain: set = set()
        self.prm_adopted: set = set()
        self.prober: Optional[_Prober] = None
        self.hs_token = 0  # handshake token while aligned to a prober

    # small helpers -------------------------------------------------------

    @property
    def is_sink(self) -> bool:
        return self.succ is None and self.index == self.route[-1]

    def _log(self, action: str, detail: str = "") -> None:
        self.net.log(self, action, detail)

    def _set_phase(self, phase: Phase) -> None:
        if phase != self.phase:
            self.phase = phase
            self._log("PHASE", phase.value)

    def _set_antenna(self, ant: Antenna) -> None:
        if ant != self.antenna:
            self.antenna = ant
            self._log("ANTENNA", antenna_str(ant))

    def _align_route(self) -> None:
        self._set_antenna(frozenset(n for n in (self.pred, self.succ) if n is not None))

    def _send(self, kind: Kind, to: int, airtime: int, **kw) -> None:
        mode = kw.pop("mode", Mode.OMNI if self.antenna == OMNI else Mode.DIRECTIONAL)
        msg = Message(kind=kind, sender=self.index, receiver=to, mode=mode, **kw)
        self.net.send(self, msg, airtime)

    def _multicast(self, kind: Kind, targets: Tuple[int, ...], **kw) -> None:
        self._set_antenna(OMNI)
        self._send(kind, MULTICAST, self.cs, mode=Mode.OMNI, targets=targets, **kw)

    # slot boundaries -----------------------------------------------------

    def on_slot_end(self, s: int, now: int) -> None:
        mine = s % 2 == self.parity
        if mine:
            if self.tx is not None:
                tx, self.tx = self.tx, None
                if not tx.acked:
                    self._onset(now)
                elif tx.sts:
                    # stop wave forwarded; listen omni from now on
                    self._set_antenna(OMNI)
        elif self.tracking and not self.got_frame:
            self._missing_frame(now)

        L = self.leader
        if L is not None and not self.deferred and self.phase == Phase.PREPARING:
            off = now - L.t0
            if not mine and off > 0 and off % (2 * self.slot) == self.slot:
                r = (off + self.slot) // (2 * self.slot)
                if r <= L.rows:
                    heard = L.frame
                    self._log("ROW", f"r={r} heard={heard.value if heard else 'null'}")
                    if heard in (Kind.DATA, Kind.LUS) and not L.trouble:
                        L.clear.update(pair_links(self.index, r))
                    else:
                        self._defer(now)
                        return
            if off == L.npt:
                if L.trouble:
                    self._defer(now)
                else:
                    self._start_btd(now)

    def on_slot_start(self, s: int, now: int) -> None:
        if s % 2 != self.parity:
            self.got_frame = False
            if self.leader is not None:
                self.leader.frame = None
            return
        if self.succ is None:
            return
        if self.pending_sts:
            self.pending_sts = False
            self._data(now, sts=True)
        elif self.phase == Phase.NORMAL and self.streaming:
            self._data(now)
        elif self.phase == Phase.PREPARING and self.left_stopped:
            kind = Kind.LBS if self.upstream_blocked else Kind.LUS
            self._send(kind, self.succ, self.cs)

    def _data(self, now: int, sts: bool = False) -> None:
        self.seq += 1
        self.tx = _Tx(sts=sts)
        self._send(Kind.DATA, self.succ, 0, seq=self.seq, sts=sts)
        self.net.timer(self, self.slot // 3, "retx", self.seq)

    # timers --------------------------------------------------------------

    def on_timer(self, tag: str, data, now: int) -> None:
        getattr(self, "_t_" + tag)(data, now)

    def _t_retx(self, seq: int, now: int) -> None:
        tx = self.tx
        if tx is None or tx.acked or seq != self.seq or tx.attempts >= 3:
            return
        tx.attempts += 1
        self._send(Kind.DATA, self.succ, 0, seq=seq, sts=tx.sts)
        if tx.attempts < 3:
            self.net.timer(self, self.slot // 3, "retx", seq)

    # preparation ---------------------------------------------------------

    def _onset(self, now: int) -> None:
        npt = compute_npt(self.index, self.N, self.slot)
        self.leader = LeaderState(t0=now, npt=npt, rows=decision_rows(self.index))
        self.deferred = False
        self.streaming = False
        self.pending_sts = False
        self.tracking = False
        self._set_phase(Phase.PREPARING)
        self._set_antenna(frozenset([self.pred]) if self.pred is not None else OMNI)
        self._log("ONSET", f"t0={now} npt={npt}")
        self.net.note("onset", node=self.index, t0=now, npt=npt)
        if npt == 0:
            self._start_btd(now)

    def _defer(self, now: int) -> None:
        self.deferred = True
        self._set_phase(Phase.IDLE)
        self._set_antenna(OMNI)
        self._log("DEFER", "")
        self.net.note("defer", node=self.index, t=now)

    def _missing_frame(self, now: int) -> None:
        self.upstream_blocked = True
        if self.phase != Phase.NORMAL or not self.streaming:
            return
        # right end of a dead hop: push the stop sign downstream
        self.streaming = False
        self.tracking = False
        self._set_phase(Phase.PREPARING)
        self._log("MISSING", f"from={self.pred}")
        if self.succ is not None:
            self.pending_sts = True
        else:
            self._set_antenna(OMNI)

    def _stop_left(self, now: int) -> None:
        if self.left_stopped or self.phase != Phase.NORMAL:
            return
        self.left_stopped = True
        self.streaming = False
        self._set_phase(Phase.PREPARING)
        self._set_antenna(OMNI)
        if self.pred is not None:
            self._send(Kind.STS, self.pred, self.cs)

    # detection -----------------------------------------------------------

    def _start_btd(self, now: int) -> None:
        L = self.leader
        btdp = make_btdp(self.index, L.t0, L.npt, self.cs, self.delta, self.N)
        self._log("BTDP", f"std={btdp.std} dtl={btdp.dtl}")
        self.net.note("session", node=self.index, btdp=btdp)
        self._join(btdp, now)
        table = self.sessions[btdp.session].table
        table.set((self.index, self.index + 1), LinkStatus.BLOCKED)
        for key in L.clear:
            table.set(key, LinkStatus.CLEAR)
        if self.pred is not None:
            self._send(Kind.BTDP, self.pred, self.cs, btdp=btdp, session=btdp.session)
        self.net.timer(self, btdp.do.end - now, "judge", btdp.session)

    def _join(self, btdp: BtdpPayload, now: int) -> Session:
        key = btdp.session
        if key in self.sessions:
            return self.sessions[key]
        role = role_of(self.index, btdp.nid)
        in_adj = role.kind != RoleKind.BYSTANDER
        sess = Session(btdp, role, BlockLinkTable(btdp.nid, self.N), in_adj)
        self.sessions[key] = sess
        self.left_stopped = False
        if self.phase in (Phase.NORMAL, Phase.PREPARING):
            self._set_phase(Phase.DETECTING)
        window = btdp.do.window(self.index)
        if window is not None:
            if window[0] >= now:
                self.net.timer(self, window[0] - now, "window", key)
            else:
                self._log("MISSED", f"window={window[0]}")
        if in_adj:
            self.net.timer(self, max(0, btdp.finish - now), "finish", key)
        return sess

    def _t_window(self, key, now: int) -> None:
        sess = self.sessions[key]
        _, end = sess.btdp.do.window(self.index)
        self.prober = _Prober(key, probe_links(self.index, sess.role, self.N), end)
        self._log("WINDOW", f"links={len(self.prober.links)}")
        self._next_probe(now)

    def _next_probe(self, now: int) -> None:
        p = self.prober
        if p.idx < len(p.links) and now + 5 * self.cs <= p.window_end:
            target = p.links[p.idx][1]
            p.stage = "btdp"
            p.token += 1
            self._set_antenna(frozenset([target]))
            self._send(Kind.BTDP, target, self.cs, probe=True,
                       btdp=self.sessions[p.session].btdp, session=p.session)
            self.net.timer(self, 3 * self.cs, "probe", p.token)
            return
        for key in p.links[p.idx:]:
            p.outcomes[key] = None
        self._finish_probing(now)

    def _t_probe(self, token: int, now: int) -> None:
        p = self.prober
        if p is None or token != p.token:
            return
        p.outcomes[p.links[p.idx]] = False
        p.idx += 1
        self._next_probe(now)

    def _finish_probing(self, now: int) -> None:
        p, self.prober = self.prober, None
        sess = self.sessions[p.session]
        kind = sess.role.kind
        if kind == RoleKind.LEADER:
            sess.table = leader_detection_step(sess.table, self.index, p.outcomes)
        elif kind == RoleKind.LEFT:
            sess.table = left_node_detection_step(sess.table, self.index, p.outcomes)
        else:
            sess.table = right_node_detection_step(sess.table, self.index, p.outcomes)
        res = " ".join(f"e{a},{b}={'-' if ok is None else int(ok)}" for (a, b), ok in p.outcomes.items())
        self._log("PROBED", res)
        self._multicast(Kind.TABLE, adjacent_nodes(self.index, self.N),
                        table=sess.table.copy(), btdp=sess.btdp, session=p.session)

    def _t_handshake(self, token: int, now: int) -> None:
        if token == self.hs_token and self.antenna != OMNI:
            self._set_antenna(OMNI)

    def _t_judge(self, key, now: int) -> None:
        sess = self.sessions[key]
        verdict = classify_from_table(sess.table, self.index)
        self._log("VERDICT", f"{verdict.summary()} table={sess.table.encode()}")
        self.net.note("verdict", node=self.index, session=key, verdict=verdict)
        self._set_phase(Phase.RECONFIGURING)
        try:
            prm = select_path(sess.table, self.index, verdict, route=self.route, std=sess.btdp.std)
        except Unreachable as exc:
            self._log("UNREACHABLE", str(exc))
            self.net.note("unreachable", node=self.index, session=key)
            return
        prm = dataclasses.replace(prm, finish=sess.btdp.finish)
        sess.prm = prm
        self._log("PRM", f"sub=e{prm.substitute[0]},{prm.substitute[1]} bypassed={list(prm.bypassed)}")
        self.net.note("prm", node=self.index, session=key, prm=prm)
        self._receive_prm(prm, None, now)

    def _t_finish(self, key, now: int) -> None:
        if key not in self.prm_seen and self.phase != Phase.NORMAL:
            self._set_phase(Phase.IDLE)
            self._set_antenna(OMNI)

    # reconfiguration -----------------------------------------------------

    def _receive_prm(self, prm: PrmPayload, msg: Optional[Message], now: int) -> None:
        key = prm.session
        self.prm_seen.setdefault(key, prm)
        leader_adj = adjacent_nodes(prm.nid, self.N)
        if msg is None or msg.receiver == MULTICAST:
            if key not in self.prm_mcast and (msg is None or self.index in leader_adj):
                self.prm_mcast.add(key)
                self._multicast(Kind.PRM, leader_adj, prm=prm, session=key)
            if now >= prm.finish:
                self._adopt(prm, now)
            else:
                self.net.timer(self, prm.finish - now, "adopt", key)
            return
        # chain delivery
        self._adopt(prm, now)
        pred, succ = prm.neighbours(self.index)
        if (key, "up") not in self.prm_chain and msg.sender == succ and pred is not None:
            self.prm_chain.add((key, "up"))
            self._send(Kind.PRM, pred, self.cs, prm=prm, session=key)
        if (key, "down") not in self.prm_chain and msg.sender == pred and succ is not None:
            self.prm_chain.add((key, "down"))
            self._send(Kind.PRM, succ, self.cs, prm=prm, session=key)

    def _t_adopt(self, key, now: int) -> None:
        self._adopt(self.prm_seen[key], now)

    def _adopt(self, prm: PrmPayload, now: int) -> None:
        key = prm.session
        if key in self.prm_adopted:
            return
        self.prm_adopted.add(key)
        self.route = prm.route
        self.prober = None
        self.leader = None
        self.left_stopped = False
        self.pending_sts = False
        self.upstream_blocked = False
        self.tx = None
        was_deferred, self.deferred = self.deferred, False
        if self.index not in self.route:
            self.pred = self.succ = None
            self.streaming = False
            self.tracking = False
            self._set_phase(Phase.IDLE)
            self._set_antenna(OMNI)
            self._log("BYPASSED", f"route={'-'.join(map(str, self.route))}")
            return
        pos = self.route.index(self.index)
        self.pred, self.succ = prm.neighbours(self.index)
        self.parity = pos % 2
        self.streaming = pos == 0
        self.tracking = False
        self._set_phase(Phase.NORMAL)
        self._align_route()
        self._log("ADOPT", f"route={'-'.join(map(str, self.route))} parity={self.parity}"
                  + (" restart" if was_deferred else ""))
        a, b = prm.substitute
        if self.index == a and (key, "up") not in self.prm_chain and self.pred is not None:
            self.prm_chain.add((key, "up"))
            self._send(Kind.PRM, self.pred, self.cs, prm=prm, session=key)
        if self.index == b and (key, "down") not in self.prm_chain and self.succ is not None:
            self.prm_chain.add((key, "down"))
            self._send(Kind.PRM, self.succ, self.cs, prm=prm, session=key)

    # frame reception -----------------------------------------------------

    def on_message(self, msg: Message, now: int) -> None:
        getattr(self, "_rx_" + msg.kind.value.lower())(msg, now)

    def _rx_data(self, msg: Message, now: int) -> None:
        if msg.sender != self.pred:
            return
        self.got_frame = True
        L = self.leader
        leading = L is not None and not self.deferred and self.phase == Phase.PREPARING
        reply_sts = leading and not L.sts_sent
        if reply_sts:
            L.sts_sent = True
        self._send(Kind.ACK, msg.sender, self.cs if reply_sts else 0, of=Kind.DATA,
                   seq=msg.seq, sts=reply_sts)
        if leading:
            # a relayed stop sign means some hop further up is down: same verdict as LBS
            L.frame = Kind.LBS if msg.sts else Kind.DATA
            L.trouble = L.trouble or msg.sts
            return
        if msg.sts:
            self.upstream_blocked = True
            if self.phase == Phase.NORMAL and not self.left_stopped:
                self.streaming = False
                self.tracking = False
                self._set_phase(Phase.PREPARING)
                if self.succ is not None:
                    self.pending_sts = True
                else:
                    self._set_antenna(OMNI)
            return
        if self.deferred:
            # the upstream hop is back: try our own hop again
            self.deferred = False
            self.leader = None
            self._set_phase(Phase.NORMAL)
            self._align_route()
        if self.phase == Phase.NORMAL:
            if not self.streaming:
                self._log("RESUME", f"seq={msg.seq}")
            self.streaming = True
            self.tracking = True
            if self.succ is None:
                self.net.note("sink", t=now, seq=msg.seq)

    def _rx_ack(self, msg: Message, now: int) -> None:
        if msg.of == Kind.DATA:
            if self.tx is not None and msg.sender == self.succ:
                self.tx.acked = True
                if msg.sts:
                    self._stop_left(now)
            return
        p = self.prober
        if p is None or p.idx >= len(p.links) or msg.sender != p.links[p.idx][1]:
            return
        if msg.of == Kind.BTDP and p.stage == "btdp":
            p.stage = "ds"
            p.token += 1
            self._send(Kind.DS, msg.sender, self.cs, session=p.session)
            self.net.timer(self, 3 * self.cs, "probe", p.token)
        elif msg.of == Kind.DS and p.stage == "ds":
            p.outcomes[p.links[p.idx]] = True
            p.idx += 1
            self._next_probe(now)

    def _rx_sts(self, msg: Message, now: int) -> None:
        if msg.sender == self.succ:
            self._stop_left(now)
        elif msg.sender == self.pred and self.leader is not None:
            self.leader.trouble = True

    def _rx_lus(self, msg: Message, now: int) -> None:
        self._upstream_status(msg, now)

    def _rx_lbs(self, msg: Message, now: int) -> None:
        self._upstream_status(msg, now)

    def _upstream_status(self, msg: Message, now: int) -> None:
        if msg.sender != self.pred:
            return
        self.got_frame = True
        if msg.kind == Kind.LBS:
            self.upstream_blocked = True
        if self.leader is not None:
            self.leader.frame = msg.kind
            if msg.kind == Kind.LBS:
                self.leader.trouble = True

    def _rx_btdp(self, msg: Message, now: int) -> None:
        btdp = msg.btdp
        if not msg.probe:
            fresh = btdp.session not in self.sessions
            self._join(btdp, now)
            if fresh and msg.sender == self.succ and self.pred is not None:
                self._send(Kind.BTDP, self.pred, self.cs, btdp=btdp, session=btdp.session)
            return
        if self.prober is not None:
            return
        self._join(btdp, now)
        self._set_antenna(frozenset([msg.sender]))
        self._send(Kind.ACK, msg.sender, self.cs, of=Kind.BTDP, session=btdp.session)
        self.hs_token += 1
        self.net.timer(self, 3 * self.cs, "handshake", self.hs_token)

    def _rx_ds(self, msg: Message, now: int) -> None:
        if self.prober is not None:
            return
        self._send(Kind.ACK, msg.sender, self.cs, of=Kind.DS, session=msg.session)
        self._set_antenna(OMNI)

    def _rx_table(self, msg: Message, now: int) -> None:
        sess = self._join(msg.btdp, now)
        sess.table.merge(msg.table)

    def _rx_prm(self, msg: Message, now: int) -> None:
        self._receive_prm(msg.prm, msg, now)

    def _rx_nack(self, msg: Message, now: int) -> None:
        pass
