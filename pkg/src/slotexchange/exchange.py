"""Blackboard-mediated slot exchange.

After plan selection, each agent advertises every slot where its selected
value differs from its preferred value. An agent that wants its preferred
value back at slot ``i`` asks the blackboard who currently holds that value
at the same slot and swaps with them. Swaps stay within one slot index, so
the per-slot totals of the global response never change.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import astuple, dataclass, fields
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)


class ExchangeError(Exception):
    """An exchange could not be completed."""


class AgentLocked(ExchangeError):
    """One of the parties is inside another transaction; retry later."""


class ExchangeDeclined(ExchangeError):
    """The acceptor refused the swap."""


class StaleAdvertisement(ExchangeDeclined):
    """The acceptor's live value no longer matches its advertisement."""


class StaleBlackboard(ExchangeError):
    """The blackboard's view of the selected plans is out of date."""


@dataclass(frozen=True)
class Advertisement:
    agent: int
    slot: int
    current_value: float
    desired_value: float

    def __post_init__(self):
        if self.current_value == self.desired_value:
            raise ValueError("agents only advertise slots they do not prefer")


@dataclass(frozen=True)
class ExchangeRecord:
    initiator: int
    acceptor: int
    slot: int
    initiator_gave: float
    initiator_received: float
    acceptor_gave: float
    acceptor_received: float
    initiator_comfort_delta: float
    acceptor_comfort_delta: float
    sweep: int = 0


EXCHANGE_CSV_COLUMNS = [
    "initiator", "acceptor", "slot", "initiator_gave", "initiator_received",
    "initiator_comfort_delta", "acceptor_comfort_delta", "sweep",
]


def exchanges_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXCHANGE_CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.initiator, r.acceptor, r.slot, repr(float(r.initiator_gave)),
            repr(float(r.initiator_received)), repr(float(r.initiator_comfort_delta)),
            repr(float(r.acceptor_comfort_delta)), r.sweep,
        ])
    return buf.getvalue()


def exchanges_from_csv(text: str) -> list:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for row in rows:
        gave, received = float(row["initiator_gave"]), float(row["initiator_received"])
        out.append(ExchangeRecord(
            initiator=int(row["initiator"]), acceptor=int(row["acceptor"]), slot=int(row["slot"]),
            initiator_gave=gave, initiator_received=received,
            acceptor_gave=received, acceptor_received=gave,
            initiator_comfort_delta=float(row["initiator_comfort_delta"]),
            acceptor_comfort_delta=float(row["acceptor_comfort_delta"]),
            sweep=int(row["sweep"]),
        ))
    return out


@dataclass
class ExchangeStats:
    queries: int = 0        # blackboard lookups
    requests: int = 0       # proposals sent to a matched partner
    completed: int = 0
    declined: int = 0
    stale: int = 0
    lock_rejections: int = 0
    sweeps: int = 0

    @property
    def success_rate(self) -> float:
        return self.completed / self.requests if self.requests else 1.0

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["success_rate"] = self.success_rate
        return out


def _differs(value: float, preferred: float, tol: float) -> bool:
    return value != preferred if tol == 0 else abs(value - preferred) > tol


class Blackboard:
    """Index of advertised non-preferred slots plus the exchange lock set.

    ``strict=True`` makes acceptors decline swaps that move them further
    from their own preferred value. ``tolerance`` widens value matching for
    real-valued data; swapped values are always the exact stored ones.
    """

    def __init__(self, strict: bool = False, tolerance: float = 0.0):
        if tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        self.strict = strict
        self.tolerance = float(tolerance)
        self.locks: set = set()
        self.stats = ExchangeStats()
        self.advertisers: set = set()
        self._index: dict = {}      # slot -> {value: set(agent ids)}
        self._ads: dict = {}        # (agent, slot) -> Advertisement
        self._view: Optional[np.ndarray] = None
        self.advertised = False

    # -- synchronization -------------------------------------------------

    def sync(self, p) -> None:
        """Take in the current selected plan of every agent."""
        self._view = p.snapshot()
        self._index.clear()
        self._ads.clear()
        self.locks.clear()
        self.advertised = False

    def is_synced(self, p) -> bool:
        return self._view is not None and np.array_equal(self._view, p.selected_matrix())

    # -- advertisement index ---------------------------------------------

    def __len__(self) -> int:
        return len(self._ads)

    def advertisement(self, agent: int, slot: int) -> Optional[Advertisement]:
        return self._ads.get((agent, slot))

    def register(self, ad: Advertisement) -> None:
        self.withdraw(ad.agent, ad.slot)
        self._ads[(ad.agent, ad.slot)] = ad
        self._index.setdefault(ad.slot, {}).setdefault(ad.current_value, set()).add(ad.agent)

    def withdraw(self, agent: int, slot: int) -> None:
        ad = self._ads.pop((agent, slot), None)
        if ad is None:
            return
        bucket = self._index[slot][ad.current_value]
        bucket.discard(agent)
        if not bucket:
            del self._index[slot][ad.current_value]

    def refresh(self, p, agent: int, slot: int) -> None:
        """Re-derive one (agent, slot) advertisement from the live plan."""
        state = p[agent]
        value = float(state.selected[slot])
        pref = float(state.preferred[slot])
        self.withdraw(agent, slot)
        if self._view is not None:
            self._view[agent, slot] = value
        if _differs(value, pref, self.tolerance):
            self.register(Advertisement(agent, slot, value, pref))

    def holders(self, slot: int, value: float):
        """Agents advertising ``value`` (within tolerance) at ``slot``."""
        by_value = self._index.get(slot)
        if not by_value:
            return ()
        if self.tolerance == 0:
            return by_value.get(value, ())
        out = set()
        for held, agents in by_value.items():
            if abs(held - value) <= self.tolerance:
                out |= agents
        return out

    def lock(self, p, *agents: int) -> None:
        busy = [a for a in agents if a in self.locks]
        if busy:
            self.stats.lock_rejections += 1
            raise AgentLocked(f"agents {busy} are inside another exchange")
        for a in agents:
            self.locks.add(a)
            p[a].available = False

    def unlock(self, p, *agents: int) -> None:
        for a in agents:
            self.locks.discard(a)
            p[a].available = True


def advertise(p, bb: Blackboard) -> int:
    """Register every non-preferred (agent, slot) on the blackboard."""
    if not bb.is_synced(p):
        raise StaleBlackboard("blackboard has not been updated with the current selections")
    bb._index.clear()
    bb._ads.clear()
    bb.advertisers = set()
    count = 0
    tol = bb.tolerance
    for agent in p.agents:
        sel, pref = agent.selected, agent.preferred
        mask = sel != pref if tol == 0 else np.abs(sel - pref) > tol
        for slot in np.flatnonzero(mask):
            bb.register(Advertisement(agent.id, int(slot), float(sel[slot]), float(pref[slot])))
            count += 1
        if mask.any():
            bb.advertisers.add(agent.id)
    bb.advertised = True
    return count


def find_match(bb: Blackboard, requester: int, slot: int, desired_value: float,
               exclude=()) -> Optional[int]:
    """Lowest-id unlocked agent (other than ``requester`` and ``exclude``)
    advertising ``desired_value`` at ``slot``, or None."""
    if requester in bb.locks:
        raise AgentLocked(f"requester {requester} is locked")
    best = None
    for agent in bb.holders(slot, desired_value):
        if agent == requester or agent in bb.locks or agent in exclude:
            continue
        if best is None or agent < best:
            best = agent
    return best


def exchange_slot(p, bb: Blackboard, a1: int, a2: int, slot: int, sweep: int = 0) -> ExchangeRecord:
    """Swap the values agents ``a1`` (initiator) and ``a2`` (acceptor) hold at ``slot``."""
    if a1 == a2:
        raise ValueError("an agent cannot exchange with itself")
    bb.lock(p, a1, a2)
    try:
        init, acc = p[a1], p[a2]
        s1 = float(init.selected[slot])
        s2 = float(acc.selected[slot])
        p2 = float(acc.preferred[slot])
        if not _differs(s2, p2, bb.tolerance):
            bb.stats.declined += 1
            raise ExchangeDeclined(f"slot {slot} is agent {a2}'s preferred slot")
        ad = bb.advertisement(a2, slot)
        if ad is None or ad.current_value != s2:
            bb.stats.stale += 1
            bb.refresh(p, a2, slot)
            raise StaleAdvertisement(f"agent {a2}'s advertisement for slot {slot} is out of date")
        if bb.strict and (s1 - p2) ** 2 > (s2 - p2) ** 2:
            bb.stats.declined += 1
            raise ExchangeDeclined(f"agent {a2} would move away from its preferred value")

        c1, c2 = init.comfort(), acc.comfort()
        init.selected[slot] = s2
        acc.selected[slot] = s1
        init.selected_index = acc.selected_index = None
        bb.refresh(p, a1, slot)
        bb.refresh(p, a2, slot)
        bb.stats.completed += 1
        return ExchangeRecord(
            initiator=a1, acceptor=a2, slot=int(slot),
            initiator_gave=s1, initiator_received=s2,
            acceptor_gave=s2, acceptor_received=s1,
            initiator_comfort_delta=init.comfort() - c1,
            acceptor_comfort_delta=acc.comfort() - c2,
            sweep=sweep,
        )
    finally:
        bb.unlock(p, a1, a2)


def run_exchange_phase(p, bb: Blackboard, seed: int, max_sweeps: Optional[int] = None) -> list:
    """Sweep over agents in a seeded order until a sweep completes no exchange."""
    if not bb.advertised:
        advertise(p, bb)
    elif not bb.is_synced(p):
        raise StaleBlackboard("population changed since the blackboard was synchronized")
    rng = np.random.default_rng(seed)
    tol = bb.tolerance
    log = []
    sweep = 0
    while max_sweeps is None or sweep < max_sweeps:
        sweep += 1
        done = 0
        for a1 in rng.permutation(p.n):
            agent = p[int(a1)]
            sel, pref = agent.selected, agent.preferred
            mask = sel != pref if tol == 0 else np.abs(sel - pref) > tol
            for slot in np.flatnonzero(mask):
                slot = int(slot)
                refused = set()
                # a refusal sends the initiator back for the next candidate
                while True:
                    bb.stats.queries += 1
                    partner = find_match(bb, agent.id, slot, float(pref[slot]), exclude=refused)
                    if partner is None:
                        break
                    bb.stats.requests += 1
                    try:
                        log.append(exchange_slot(p, bb, agent.id, partner, slot, sweep=sweep))
                    except ExchangeDeclined as exc:
                        logger.debug("exchange %d->%d at slot %d declined: %s", agent.id, partner, slot, exc)
                        refused.add(partner)
                        continue
                    except ExchangeError as exc:
                        logger.debug("exchange %d->%d at slot %d failed: %s", agent.id, partner, slot, exc)
                        break
                    done += 1
                    break
        bb.stats.sweeps = sweep
        if done == 0:
            break
    return log


def admissible_exchanges(p, strict: bool = False, tolerance: float = 0.0) -> list:
    """Every (initiator, acceptor, slot) swap the protocol would still allow.

    Brute force over all ordered pairs and slots; used to check that the
    exchange phase stopped at a fixed point.
    """
    sel = p.selected_matrix()
    pref = p.preferred_matrix()
    out = []
    for a1 in range(p.n):
        for a2 in range(p.n):
            if a1 == a2:
                continue
            for i in range(p.d):
                if not _differs(sel[a1, i], pref[a1, i], tolerance):
                    continue
                if not _differs(sel[a2, i], pref[a2, i], tolerance):
                    continue
                if abs(sel[a2, i] - pref[a1, i]) > tolerance:
                    continue
                if strict and (sel[a1, i] - pref[a2, i]) ** 2 > (sel[a2, i] - pref[a2, i]) ** 2:
                    continue
                out.append((a1, a2, i))
    return out


def replay(p, records, skip_stale: bool = True) -> tuple:
    """Apply logged swaps to ``p`` in order, validating each against the live
    values. Returns ``(applied, skipped)``."""
    applied = skipped = 0
    for r in records:
        v1 = float(p[r.initiator].selected[r.slot])
        v2 = float(p[r.acceptor].selected[r.slot])
        if v1 != r.initiator_gave or v2 != r.acceptor_gave:
            if not skip_stale:
                raise StaleAdvertisement(f"logged exchange {astuple(r)[:3]} no longer applies")
            skipped += 1
            continue
        p[r.initiator].selected[r.slot] = v2
        p[r.acceptor].selected[r.slot] = v1
        p[r.initiator].selected_index = p[r.acceptor].selected_index = None
        applied += 1
    return applied, skipped
