"""Deterministic simulated Zab cluster.

Every node runs a message handler plus two worker tasks: a sync processor
that logs queued requests (acknowledging them to the leader) and a commit
processor that applies queued commits once the entry is logged.  Nothing
moves unless an event is applied: a message delivery, a task step, a fault
or a client request.  Channels are FIFO per ordered pair and come in three
kinds: ``peer`` (synchronization and broadcast), ``election`` and
``quorum`` (epoch negotiation).

Leader election is candidate driven.  A LOOKING node that runs its
``election`` task nominates itself with a fresh (epoch, last zxid, id)
key; LOOKING peers with a smaller key support it; a candidate with a quorum
of supporters proposes a new epoch; supporters accept it, report their
last zxid and start following.  Nodes already in an ensemble answer a
nomination with their leader, which lets a restarted node join.  Packets
that no longer fit the receiver's state are consumed and dropped.

Bug flags switch individual code paths to their historical behaviour.
Instrumentation points append marks to ``Cluster.marks``; the conformance
coordinator uses them to recognise the end of a modelled action.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

LOOKING, LEADING, FOLLOWING = "LOOKING", "LEADING", "FOLLOWING"
ELECTION, SYNCHRONIZATION, BROADCAST = "ELECTION", "SYNCHRONIZATION", "BROADCAST"
CHANNEL_KINDS = ("peer", "election", "quorum")
TASKS = ("handler", "syncProcessor", "commitProcessor", "election", "learner")
ZERO = (0, 0)


class SimError(Exception):
    """Malformed event (unknown kind, task or channel)."""


@dataclass(frozen=True)
class BugFlags:
    zk3023: bool = False  # UPTODATE acknowledged before the commit is applied
    zk4394: bool = False  # COMMIT during sync with no pending proposal dereferences null
    zk4643: bool = False  # NEWLEADER persists the epoch before the synced log
    zk4646: bool = False  # NEWLEADER acknowledged before the synced log is persisted
    zk4685: bool = False  # sync processor acknowledges requests before the NEWLEADER ACK
    zk4712: bool = False  # shutdown keeps the sync processor's queue

    NAMES = ("zk3023", "zk4394", "zk4643", "zk4646", "zk4685", "zk4712")

    @classmethod
    def of(cls, *names: str) -> "BugFlags":
        bad = set(names) - set(cls.NAMES)
        if bad:
            raise ValueError(f"unknown bug flag(s): {sorted(bad)}")
        return cls(**{n: True for n in names})

    @classmethod
    def everything(cls) -> "BugFlags":
        return cls.of(*cls.NAMES)

    def enabled(self) -> tuple:
        return tuple(n for n in self.NAMES if getattr(self, n))


@dataclass(frozen=True)
class SimEvent:
    kind: str      # deliver-message | run-task-step | crash | restart | partition | heal | client-propose | client-read
    target: tuple  # (dst, src) | (node, task[, peer]) | (node,) | (i, j)
    payload: Any = None  # channel kind for deliveries

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": list(self.target), "payload": self.payload}

    @classmethod
    def from_json(cls, d: dict) -> "SimEvent":
        return cls(d["kind"], tuple(d["target"]), d.get("payload"))

    def __str__(self):
        extra = f" {self.payload}" if self.payload is not None else ""
        return f"{self.kind}{tuple(self.target)}{extra}"


@dataclass(frozen=True)
class Scenario:
    nodes: int = 3
    flags: BugFlags = BugFlags()
    prefix: tuple = ()

    def to_json(self) -> dict:
        return {"nodes": self.nodes, "flags": list(self.flags.enabled()),
                "prefix": [e.to_json() for e in self.prefix]}

    @classmethod
    def from_json(cls, d: dict) -> "Scenario":
        return cls(int(d.get("nodes", 3)), BugFlags.of(*d.get("flags", ())),
                   tuple(SimEvent.from_json(e) for e in d.get("prefix", ())))


def load_scenario(path) -> Scenario:
    return Scenario.from_json(json.loads(Path(path).read_text()))


def save_scenario(path, sc: Scenario) -> None:
    Path(path).write_text(json.dumps(sc.to_json(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# wire format

@dataclass(frozen=True)
class Txn:
    zxid: tuple
    data: int


@dataclass(frozen=True)
class Packet:
    type: str
    zxid: Any = None
    epoch: int | None = None
    txns: tuple = ()  # (Txn, committed) pairs for DIFF/TRUNC/SNAP
    txn: Txn | None = None


@dataclass(frozen=True)
class Note:
    """Election and epoch-negotiation traffic."""
    type: str          # NOMINATE SUPPORT LEADER FOLLOWERINFO LEADERINFO ACKEPOCH
    leader: int
    round: int
    key: tuple = ()
    epoch: int = 0
    zxid: tuple = ZERO


def _quorum(n: int) -> int:
    return n // 2 + 1


# ---------------------------------------------------------------------------
# nodes

@dataclass
class SimNode:
    id: int
    alive: bool = True
    # persisted
    current_epoch: int = 0
    accepted_epoch: int = 0
    log: list = field(default_factory=list)
    committed: int = 0
    round: int = 0
    # volatile
    role: str = LOOKING
    phase: str = ELECTION
    leader: int | None = None
    leader_round: int = 0
    # election: "candidate" / "elect" (proposed an epoch) / "support" / "joining"
    stance: str | None = None
    target: tuple | None = None      # (leader, round) this node is working towards
    supporters: dict = field(default_factory=dict)
    new_epoch: int | None = None
    epoch_acks: dict = field(default_factory=dict)
    # follower synchronization
    sync_buf: list = field(default_factory=list)
    not_committed: list = field(default_factory=list)
    nl_job: list | None = None
    uptodate_job: bool = False
    serving: bool = False
    # leader
    learners: set = field(default_factory=set)
    pending_sync: dict = field(default_factory=dict)
    forwarding: set = field(default_factory=set)
    ackld: set = field(default_factory=set)
    prop_acks: dict = field(default_factory=dict)
    uptodate_acked: set = field(default_factory=set)
    # worker queues
    sync_q: list = field(default_factory=list)
    commit_q: list = field(default_factory=list)

    def last_zxid(self) -> tuple:
        return self.log[-1].zxid if self.log else ZERO

    def key(self) -> tuple:
        return (self.current_epoch, self.last_zxid(), self.id)

    def index_of(self, z) -> int:
        for k, t in enumerate(self.log, 1):
            if t.zxid == z:
                return k
        return 0


_KEEP = ("id", "alive", "current_epoch", "accepted_epoch", "log", "committed", "round", "sync_q")
_VOLATILE = [f.name for f in dataclasses.fields(SimNode) if f.name not in _KEEP]


class Cluster:
    """Mutable cluster state; :func:`step` wraps :meth:`apply` with a copy."""

    def __init__(self, scenario: Scenario):
        n = scenario.nodes
        self.n = n
        self.quorum = _quorum(n)
        self.flags = scenario.flags
        self.nodes = [SimNode(i) for i in range(n)]
        self.chan = {k: {(a, b): [] for a in range(n) for b in range(n) if a != b} for k in CHANNEL_KINDS}
        self.partitions: set = set()
        self.txn_counter = 0
        self.marks: list = []
        self.faults: list = []
        self.reads: list = []
        self.events = 0
        for e in scenario.prefix:
            if not self.apply(e):
                raise SimError(f"scenario prefix event not enabled: {e}")

    def clone(self) -> "Cluster":
        return copy.deepcopy(self)

    # -- connectivity ----------------------------------------------------------

    def linked(self, a: int, b: int) -> bool:
        return (self.nodes[a].alive and self.nodes[b].alive
                and frozenset((a, b)) not in self.partitions)

    def send(self, kind: str, src: int, dst: int, msg) -> None:
        if self.linked(src, dst):
            self.chan[kind][(src, dst)].append(msg)

    def head(self, kind: str, dst: int, src: int):
        q = self.chan[kind][(src, dst)]
        return q[0] if q else None

    def _pop(self, dst: int, src: int, kind: str = "peer"):
        return self.chan[kind][(src, dst)].pop(0)

    def _clear_node_channels(self, i: int) -> None:
        for kind in CHANNEL_KINDS:
            for (a, b), q in self.chan[kind].items():
                if a == i or b == i:
                    q.clear()

    # -- shutdown cascade ---------------------------------------------------------

    def _reset(self, node: SimNode, crash: bool) -> None:
        keep_queue = self.flags.zk4712 and not crash
        fresh = SimNode(node.id)
        for name in _VOLATILE:
            setattr(node, name, copy.deepcopy(getattr(fresh, name)))
        if not keep_queue:
            node.sync_q = []
        self._clear_node_channels(node.id)

    def shutdown(self, i: int, crash: bool = False) -> None:
        """Node ``i`` leaves its ensemble; its peers notice immediately."""
        node = self.nodes[i]
        if node.role == LEADING:
            followers = [k for k in range(self.n) if k != i and self.nodes[k].role == FOLLOWING
                         and self.nodes[k].leader == i]
            self._reset(node, crash)
            for k in followers:
                self._reset(self.nodes[k], False)
        elif node.role == FOLLOWING:
            ldr = node.leader
            self._reset(node, crash)
            if ldr is not None and self.nodes[ldr].role == LEADING:
                self._drop_learner(ldr, i)
        else:
            self._reset(node, crash)
        self.marks.append(("shutdown", i))

    def _drop_learner(self, ldr: int, k: int) -> None:
        lead = self.nodes[ldr]
        for s in (lead.learners, lead.forwarding, lead.ackld, lead.uptodate_acked):
            s.discard(k)
        lead.pending_sync.pop(k, None)
        if 1 + len(lead.learners) < self.quorum:
            self.shutdown(ldr)

    # -- dispatch ----------------------------------------------------------------

    def can_apply(self, e: SimEvent) -> bool:
        return self._dispatch(e, dry=True)

    def apply(self, e: SimEvent) -> bool:
        """Apply ``e`` if it is enabled; returns whether it was."""
        if not self._dispatch(e, dry=True):
            return False
        self._dispatch(e, dry=False)
        self.events += 1
        return True

    def _dispatch(self, e: SimEvent, dry: bool) -> bool:
        k = e.kind
        if k == "deliver-message":
            dst, src = e.target
            if e.payload not in CHANNEL_KINDS:
                raise SimError(f"unknown channel {e.payload!r}")
            if not self.nodes[dst].alive or not self.chan[e.payload][(src, dst)]:
                return False
            if e.payload == "peer":
                return self._on_peer(self.nodes[dst], src, dry)
            if not dry:
                m = self._pop(dst, src, e.payload)
                self._on_note(self.nodes[dst], src, m)
            return True
        if k == "run-task-step":
            i, task = e.target[0], e.target[1]
            if task not in TASKS:
                raise SimError(f"unknown task {task!r}")
            if not self.nodes[i].alive:
                return False
            node = self.nodes[i]
            if task == "handler":
                return self._handler_step(node, dry)
            if task == "syncProcessor":
                return self._sync_step(node, dry)
            if task == "commitProcessor":
                return self._commit_step(node, dry)
            if task == "election":
                return self._nominate(node, dry)
            return self._learner_step(node, e.target[2], dry)
        if k in ("crash", "restart", "client-propose", "client-read"):
            node = self.nodes[e.target[0]]
            if k == "crash":
                ok = node.alive
            elif k == "restart":
                ok = not node.alive
            elif k == "client-propose":
                ok = node.alive and node.role == LEADING and node.phase == BROADCAST
            else:
                ok = node.alive
            if ok and not dry:
                getattr(self, "_" + k.replace("-", "_"))(node)
            return ok
        if k in ("partition", "heal"):
            i, j = e.target
            p = frozenset((i, j))
            ok = i != j and ((p not in self.partitions) if k == "partition" else (p in self.partitions))
            if ok and not dry:
                if k == "partition":
                    self._partition(i, j)
                else:
                    self.partitions.discard(p)
                    self.marks.append(("heal", i, j))
            return ok
        raise SimError(f"unknown event kind {k!r}")

    # -- faults and clients ---------------------------------------------------------

    def _crash(self, node: SimNode) -> None:
        self.shutdown(node.id, crash=True)
        node.alive = False
        self.marks.append(("crash", node.id))

    def _restart(self, node: SimNode) -> None:
        node.alive = True
        self.marks.append(("restart", node.id))

    def _partition(self, i: int, j: int) -> None:
        self.partitions.add(frozenset((i, j)))
        for kind in CHANNEL_KINDS:
            self.chan[kind][(i, j)].clear()
            self.chan[kind][(j, i)].clear()
        for a, b in ((i, j), (j, i)):
            nb = self.nodes[b]
            if nb.role == FOLLOWING and nb.leader == a:
                self.shutdown(b)
        self.marks.append(("partition", i, j))

    def _client_propose(self, node: SimNode) -> None:
        e = node.current_epoch
        last = node.log[-1].zxid if node.log else None
        counter = last[1] + 1 if last is not None and last[0] == e else 1
        self.txn_counter += 1
        txn = Txn((e, counter), self.txn_counter)
        node.log.append(txn)
        for k in sorted(node.forwarding):
            self.send("peer", node.id, k, Packet("PROPOSAL", txn.zxid, txn=txn))
        self.marks.append(("proposed", node.id, txn.zxid))

    def _client_read(self, node: SimNode) -> None:
        self.reads.append((node.id, tuple(t.data for t in node.log[:node.committed])))

    # -- election and epoch negotiation ------------------------------------------------

    def _nominate(self, node: SimNode, dry: bool) -> bool:
        if node.role != LOOKING:
            return False
        if not dry:
            node.round += 1
            node.stance, node.target = "candidate", (node.id, node.round)
            node.supporters, node.new_epoch, node.epoch_acks = {}, None, {}
            note = Note("NOMINATE", node.id, node.round, key=node.key())
            for j in range(self.n):
                if j != node.id:
                    self.send("election", node.id, j, note)
            self.marks.append(("nominated", node.id))
        return True

    def _on_note(self, node: SimNode, src: int, m: Note) -> None:
        i = node.id
        t = m.type
        if t == "NOMINATE":
            if node.role == LEADING:
                self.send("election", i, src, Note("LEADER", i, node.round))
            elif node.role == FOLLOWING:
                self.send("election", i, src, Note("LEADER", node.leader, node.leader_round))
            elif m.key > node.key():
                node.stance, node.target = "support", (m.leader, m.round)
                node.supporters, node.new_epoch, node.epoch_acks = {}, None, {}
                self.send("election", i, src, Note("SUPPORT", m.leader, m.round, epoch=node.accepted_epoch))
        elif t == "SUPPORT":
            if node.stance == "candidate" and node.target == (i, m.round):
                node.supporters[src] = m.epoch
                if 1 + len(node.supporters) >= self.quorum:
                    node.stance = "elect"
                    node.new_epoch = max([node.accepted_epoch, *node.supporters.values()]) + 1
                    for k in sorted(node.supporters):
                        self.send("quorum", i, k, Note("LEADERINFO", i, node.round, epoch=node.new_epoch))
        elif t == "LEADER":
            joining = node.stance == "joining" and node.target == (m.leader, m.round)
            if node.role == LOOKING and not joining and m.leader == src:
                node.stance, node.target = "joining", (m.leader, m.round)
                self.send("quorum", i, src, Note("FOLLOWERINFO", m.leader, m.round, epoch=node.accepted_epoch))
        elif t == "FOLLOWERINFO":
            if node.role == LEADING and m.round == node.round and m.epoch <= node.accepted_epoch:
                self.send("quorum", i, src, Note("LEADERINFO", i, node.round, epoch=node.accepted_epoch))
        elif t == "LEADERINFO":
            if node.role == LOOKING and node.target == (src, m.round) and m.epoch >= node.accepted_epoch:
                node.accepted_epoch = m.epoch
                self.send("quorum", i, src, Note("ACKEPOCH", src, m.round, epoch=node.current_epoch,
                                                 zxid=node.last_zxid()))
                node.role, node.phase, node.leader = FOLLOWING, SYNCHRONIZATION, src
                node.leader_round = m.round
                node.stance, node.target = None, None
                self.marks.append(("following", i, src))
        elif t == "ACKEPOCH":
            if node.role == LEADING and m.round == node.round:
                node.learners.add(src)
                node.pending_sync[src] = m.zxid
                self.marks.append(("joined", i, src))
            elif node.stance == "elect" and node.target == (i, m.round) and src in node.supporters:
                node.epoch_acks[src] = m.zxid
                if 1 + len(node.epoch_acks) >= self.quorum:
                    node.role, node.phase, node.leader = LEADING, SYNCHRONIZATION, i
                    node.accepted_epoch = node.new_epoch
                    node.learners = set(node.epoch_acks)
                    node.pending_sync = dict(node.epoch_acks)
                    node.stance, node.target, node.supporters = None, None, {}
                    node.new_epoch, node.epoch_acks = None, {}
                    self.marks.append(("established", i))
        else:
            raise SimError(f"unknown note {t!r}")

    # -- leader ------------------------------------------------------------------------

    def _learner_step(self, node: SimNode, k: int, dry: bool) -> bool:
        if node.role != LEADING or k not in node.pending_sync:
            return False
        if dry:
            return True
        z = node.pending_sync.pop(k)
        self.send("peer", node.id, k, self._sync_packet(node, z))
        self.send("peer", node.id, k, Packet("NEWLEADER", epoch=node.accepted_epoch))
        node.forwarding.add(k)
        self.marks.append(("synced", node.id, k))
        return True

    @staticmethod
    def _sync_packet(node: SimNode, z: tuple) -> Packet:
        zs = [t.zxid for t in node.log]
        if z == ZERO or z in zs:
            kind, upto = "DIFF", z
            start = zs.index(z) + 1 if z != ZERO else 0
        elif z > node.last_zxid():
            kind, upto, start = "TRUNC", node.last_zxid(), len(zs)
        else:
            start = sum(1 for x in zs if x < z)
            upto = zs[start - 1] if start else ZERO
            kind = "SNAP" if start < node.committed else "TRUNC"
        if kind == "SNAP":
            start, upto = 0, ZERO
        txns = tuple((t, k < node.committed) for k, t in enumerate(node.log) if k >= start)
        return Packet(kind, upto, txns=txns)

    def _on_peer(self, node: SimNode, src: int, dry: bool) -> bool:
        if node.role == LEADING:
            return self._leader_receive(node, src, dry)
        if node.role == FOLLOWING and node.leader == src:
            return self._follower_receive(node, src, dry)
        if not dry:  # stale traffic from a former ensemble
            self._pop(node.id, src)
        return True

    def _leader_receive(self, node: SimNode, src: int, dry: bool) -> bool:
        if dry:
            return True
        i = node.id
        m = self._pop(i, src)
        if m.type != "ACK" or src not in node.learners:
            return True
        if m.zxid == "UPTODATE":
            node.uptodate_acked.add(src)
            self.marks.append(("ack-uptodate", i, src))
        elif m.zxid[1] == 0:
            if m.zxid[0] == node.accepted_epoch:
                self._on_newleader_ack(node, src)
        else:
            self._on_proposal_ack(node, src, m.zxid)
            self.marks.append(("ack-handled", i, src))
        return True

    def _uptodate_packet(self, node: SimNode) -> Packet:
        return Packet("UPTODATE", node.log[node.committed - 1].zxid if node.committed else ZERO)

    def _on_newleader_ack(self, node: SimNode, k: int) -> None:
        node.ackld.add(k)
        if node.phase == SYNCHRONIZATION:
            if 1 + len(node.ackld) >= self.quorum:
                node.phase = BROADCAST
                node.current_epoch = node.accepted_epoch
                node.committed = len(node.log)
                for f in sorted(node.ackld):
                    self.send("peer", node.id, f, self._uptodate_packet(node))
        else:
            self.send("peer", node.id, k, self._uptodate_packet(node))
        self.marks.append(("ackld", node.id, k))

    def _on_proposal_ack(self, node: SimNode, k: int, z: tuple) -> None:
        if node.index_of(z) <= node.committed:
            return
        node.prop_acks.setdefault(z, set()).add(k)
        n = node.committed
        while n < len(node.log):
            zn = node.log[n].zxid
            if 1 + len(node.prop_acks.get(zn, set()) & node.learners) < self.quorum:
                break
            n += 1
            for f in sorted(node.forwarding):
                self.send("peer", node.id, f, Packet("COMMIT", zn))
        if n > node.committed:
            node.committed = n
            for t in node.log[:n]:
                node.prop_acks.pop(t.zxid, None)

    # -- follower -------------------------------------------------------------------------

    def _follower_receive(self, node: SimNode, src: int, dry: bool) -> bool:
        i = node.id
        if node.nl_job is not None or node.uptodate_job:
            return False  # the handler is still busy with the packet at the head
        m = self.head("peer", i, src)
        if node.phase == SYNCHRONIZATION:
            if m.type in ("DIFF", "TRUNC", "SNAP"):
                if not dry:
                    self._pop(i, src)
                    self._on_sync_packet(node, m)
                return True
            if m.type == "NEWLEADER":
                if not dry:
                    node.nl_job = ["history", "epoch-ack"] if not self.flags.zk4643 else ["epoch", "handoff", "ack"]
                    self.marks.append(("nl-received", i))
                    if self._nl_ready(node):
                        self._handler_step(node, False)
                return True
            if node.sync_buf:
                return False  # synced packets must be handed over first
            if dry:
                return True
            if m.type == "UPTODATE":
                node.phase = BROADCAST
                node.commit_q.append(m.zxid)
                if self.flags.zk3023:
                    self._pop(i, src)
                    self._finish_uptodate(node)
                else:
                    node.uptodate_job = True  # the reply waits for the commit processor
                return True
            self._pop(i, src)
            if m.type == "PROPOSAL":
                node.not_committed.append(m.txn)
                self._enqueue(node, m.txn)
            elif m.type == "COMMIT":
                self._commit_in_sync(node, m.zxid)
            return True
        if not dry:
            self._pop(i, src)
            if m.type == "PROPOSAL":
                self._enqueue(node, m.txn)
            elif m.type == "COMMIT":
                node.commit_q.append(m.zxid)
                self.marks.append(("commit-handled", i, m.zxid))
        return True

    def _enqueue(self, node: SimNode, txn: Txn) -> None:
        node.sync_q.append((txn, False))
        self.marks.append(("queued", node.id, txn.zxid))

    def _on_sync_packet(self, node: SimNode, m: Packet) -> None:
        txns = list(m.txns)
        if m.type == "TRUNC":
            node.log = [t for t in node.log if t.zxid <= m.zxid]
            node.committed = min(node.committed, len(node.log))
        elif m.type == "SNAP":
            node.log = [t for t, c in txns if c]
            node.committed = len(node.log)
            txns = [(t, c) for t, c in txns if not c]
        node.sync_buf = txns
        node.not_committed = [t for t, c in txns if not c]
        self.marks.append(("sync-msg", node.id))

    def _log(self, node: SimNode, txn: Txn, committed: bool) -> None:
        node.log.append(txn)
        if committed:
            node.committed = max(node.committed, len(node.log))

    def _nl_next(self, node: SimNode) -> str | None:
        """Drop NEWLEADER stages with nothing to do; return the next one."""
        e = self.head("peer", node.id, node.leader).epoch
        while node.nl_job:
            st = node.nl_job[0]
            if st in ("history", "handoff") and not node.sync_buf:
                node.nl_job.pop(0)
            elif st == "epoch" and node.current_epoch == e:
                node.nl_job.pop(0)
            else:
                return st
        return None

    def _nl_ready(self, node: SimNode) -> bool:
        job = list(node.nl_job)
        st = self._nl_next(node)
        node.nl_job = job
        if st == "ack" and not self.flags.zk4646:
            return not node.sync_q  # the ACK waits until the synced log is persisted
        return st is not None

    def _handler_step(self, node: SimNode, dry: bool) -> bool:
        i = node.id
        if node.uptodate_job:
            if node.commit_q:
                return False  # waits for the commit processor
            if not dry:
                self._pop(i, node.leader)
                self._finish_uptodate(node)
            return True
        if node.nl_job is None or not self._nl_ready(node):
            return False
        if dry:
            return True
        st = self._nl_next(node)
        e = self.head("peer", i, node.leader).epoch
        node.nl_job.pop(0)
        if st == "history":
            for t, c in node.sync_buf:
                self._log(node, t, c)
            node.sync_buf = []
            self.marks.append(("nl-history", i))
        elif st == "handoff":
            node.sync_q.extend(node.sync_buf)
            node.sync_buf = []
            self.marks.append(("nl-queued", i))
        if st in ("epoch", "epoch-ack"):
            node.current_epoch = e
            self.marks.append(("nl-epoch", i))
        if st in ("ack", "epoch-ack"):
            self._pop(i, node.leader)
            node.not_committed = []
            node.nl_job = None
            self.send("peer", i, node.leader, Packet("ACK", (e, 0)))
            self.marks.append(("nl-ack", i))
        return True

    def _commit_in_sync(self, node: SimNode, z: tuple) -> None:
        if not node.not_committed:
            if self.flags.zk4394:
                # the pending-proposal lookup comes back empty and is dereferenced
                self.faults.append((node.id, "NullPointerException: COMMIT during sync without a pending proposal"))
                self.shutdown(node.id)
                return
            node.commit_q.append(z)
        elif node.not_committed[0].zxid == z:
            node.not_committed.pop(0)
            node.commit_q.append(z)
        elif not self.flags.zk4394:
            node.commit_q.append(z)
        self.marks.append(("commit-handled", node.id, z))

    def _finish_uptodate(self, node: SimNode) -> None:
        node.uptodate_job = False
        node.serving = True
        node.not_committed = []
        self.send("peer", node.id, node.leader, Packet("ACK", "UPTODATE"))
        self.marks.append(("uptodate-done", node.id))

    # -- worker tasks ------------------------------------------------------------------------

    def _sync_step(self, node: SimNode, dry: bool) -> bool:
        if not node.sync_q:
            return False
        if dry:
            return True
        txn, committed = node.sync_q.pop(0)
        self._log(node, txn, committed)
        if node.role == FOLLOWING and (node.phase == BROADCAST or self.flags.zk4685):
            self.send("peer", node.id, node.leader, Packet("ACK", txn.zxid))
        self.marks.append(("logged", node.id, txn.zxid))
        return True

    def _commit_step(self, node: SimNode, dry: bool) -> bool:
        if not node.commit_q:
            return False
        z = node.commit_q[0]
        pos = node.index_of(z)
        if z != ZERO and pos == 0:
            return False  # not logged yet
        if not dry:
            node.commit_q.pop(0)
            node.committed = max(node.committed, pos)
            self.marks.append(("commit-applied", node.id, z))
        return True

    # -- scheduling --------------------------------------------------------------------------

    def enabled_events(self) -> list[SimEvent]:
        """Every enabled delivery and worker step, in a fixed order."""
        out = []
        for kind in CHANNEL_KINDS:
            for (a, b) in sorted(self.chan[kind]):
                if self.chan[kind][(a, b)]:
                    out.append(SimEvent("deliver-message", (b, a), kind))
        for i in range(self.n):
            for task in ("handler", "syncProcessor", "commitProcessor"):
                out.append(SimEvent("run-task-step", (i, task)))
            for k in sorted(self.nodes[i].pending_sync):
                out.append(SimEvent("run-task-step", (i, "learner", k)))
        return [e for e in out if self.can_apply(e)]


def new_cluster(scenario: Scenario | None = None) -> Cluster:
    return Cluster(scenario or Scenario())


def step(cluster: Cluster, e: SimEvent) -> Cluster:
    """Apply one event to a copy of ``cluster``; raises if it is not enabled."""
    out = cluster.clone()
    if not out.apply(e):
        raise SimError(f"event not enabled: {e}")
    return out


# ---------------------------------------------------------------------------
# observation in the model's vocabulary

@dataclass(frozen=True)
class ObservableState:
    currentEpoch: tuple
    acceptedEpoch: tuple
    history: tuple
    lastCommitted: tuple
    state: tuple
    zabState: tuple
    leaderOf: tuple
    msgs: tuple
    queuedRequests: tuple
    committedRequests: tuple

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def _entry(t: Txn) -> tuple:
    return (t.zxid[0], t.zxid[1], t.data)


def packet_to_model(m: Packet) -> tuple:
    if m.type in ("DIFF", "TRUNC", "SNAP"):
        return (m.type, m.zxid, tuple((_entry(t), c) for t, c in m.txns))
    if m.type == "NEWLEADER":
        return ("NEWLEADER", m.epoch)
    if m.type == "PROPOSAL":
        return ("PROPOSAL", _entry(m.txn))
    return (m.type, m.zxid)


def observe(cluster: Cluster) -> ObservableState:
    nodes = cluster.nodes
    n = cluster.n

    def leader_of(x: SimNode):
        return x.id if x.role == LEADING else x.leader if x.role == FOLLOWING else None

    grid = tuple(tuple(() if a == b else tuple(packet_to_model(m) for m in cluster.chan["peer"][(a, b)])
                       for b in range(n)) for a in range(n))
    return ObservableState(
        currentEpoch=tuple(x.current_epoch for x in nodes),
        acceptedEpoch=tuple(x.accepted_epoch for x in nodes),
        history=tuple(tuple(_entry(t) for t in x.log) for x in nodes),
        lastCommitted=tuple(x.committed for x in nodes),
        state=tuple(x.role for x in nodes),
        zabState=tuple(x.phase for x in nodes),
        leaderOf=tuple(leader_of(x) for x in nodes),
        msgs=grid,
        queuedRequests=tuple(tuple((_entry(t), c) for t, c in x.sync_q) for x in nodes),
        committedRequests=tuple(tuple(x.commit_q) for x in nodes),
    )
