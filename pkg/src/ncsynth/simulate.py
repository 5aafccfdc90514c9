"""Closed-loop simulation: plant, delayed channels, symbolic controller.

One sampling step runs sample -> deliver measurements -> control ->
deliver inputs -> actuate -> integrate; with this ordering a measurement
sent at step k reaches the controller at step k + N_sc and an input
chosen at step k reaches the hold at step k + N_ca, matching the shift
register semantics of the expanded model exactly.

Prolonged channels release every packet at exactly the channel maximum
(the buffering discipline that makes controller refinement sound); the
random mode exists for demonstration only and must be enabled explicitly.
"""

from __future__ import annotations

import csv
import json
import random
from collections import deque
from dataclasses import dataclass, field

from .grid import OutOfDomainError
from .ncs import NcsModel
from .plants import integrate


class DomainViolation(RuntimeError):
    """The closed loop left the controller's domain."""


class DelayChannel:
    """FIFO of (send time, payload) with per-packet delivery delay.

    prolonged: every packet is held until its age reaches n_max, so
    delivery time minus send time is exactly n_max, and FIFO order is
    preserved.  random: each packet draws a delay in [n_min, n_max].
    """

    def __init__(self, n_min, n_max, mode="prolonged", rng=None):
        if not (1 <= n_min <= n_max):
            raise ValueError("channel bounds must satisfy 1 <= min <= max")
        if mode not in ("prolonged", "random"):
            raise ValueError(f"unknown channel mode {mode!r}")
        self.n_min = n_min
        self.n_max = n_max
        self.mode = mode
        self.rng = rng
        self.queue = deque()        # (send_time, payload, delay)
        self.deliveries = []        # (send_time, deliver_time)

    def send(self, payload, t):
        if self.mode == "prolonged":
            delay = self.n_max
        else:
            delay = self.rng.randint(self.n_min, self.n_max)
        self.queue.append((t, payload, delay))

    def deliver(self, t):
        """Pop and return payloads whose delay elapses at time t."""
        out = []
        remaining = deque()
        for send_t, payload, delay in self.queue:
            if t - send_t >= delay:
                out.append((send_t, payload))
                self.deliveries.append((send_t, t))
            else:
                remaining.append((send_t, payload, delay))
        self.queue = remaining
        out.sort(key=lambda e: e[0])
        return [p for _, p in out]


@dataclass
class StepRecord:
    k: int
    x: tuple
    delivered: tuple            # measured cell index vector, or None
    chosen: tuple               # input index vector, or None
    applied: tuple              # input values held by the ZOH
    mode: int


@dataclass
class Trace:
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def rows(self):
        """Canonical flat rows (see export_trace for the column schema)."""
        state_np = self.meta["state_npoints"]
        input_np = self.meta["input_npoints"]
        out = []
        for r in self.records:
            row = {"k": r.k}
            for d, v in enumerate(r.x):
                row[f"x{d}"] = v
            row["delivered_symbol"] = _flat(r.delivered, state_np)
            row["chosen_input_symbol"] = _flat(r.chosen, input_np)
            for d, v in enumerate(r.applied):
                row[f"applied_u{d}"] = v
            row["mode"] = r.mode
            out.append(row)
        return out


def _flat(idx, npoints):
    if idx is None:
        return -1
    flat = 0
    stride = 1
    for i, n in zip(idx, npoints):
        flat += i * stride
        stride *= n
    return flat


def _unflat(flat, npoints):
    if flat < 0:
        return None
    idx = []
    for n in npoints:
        idx.append(flat % n)
        flat //= n
    return tuple(idx)


class ClosedLoop:
    """Simulation state for one plant/controller pair.

    With an expanded model the loop reconstructs the full register state
    every step and evaluates the controller on it; the delivered (aged)
    measurement is logged and drives mode switching.  With a plain plant
    model the loop is direct: the chosen input acts within the same step.
    """

    def __init__(self, plant, controller, x0, model=None, u0=None, seed=0,
                 channel_mode="prolonged", unsafe=False):
        self.plant = plant
        self.controller = controller
        self.model = model if model is not None else controller.model
        if self.model is None:
            raise ValueError("a model is required (none attached to controller)")
        self.networked = isinstance(self.model, NcsModel)
        if channel_mode == "random" and not unsafe:
            raise ValueError(
                "random-delay channels void the refinement guarantee, which "
                "holds for prolonged (buffered, constant-delay) channels "
                "only; pass unsafe=True to simulate anyway")
        self.channel_mode = channel_mode
        self.rng = random.Random(seed)
        self.seed = seed

        if self.networked:
            self.state_grid = self.model.state_grid
            self.input_grid = self.model.input_grid
            b = self.model.bounds
            self.sc = DelayChannel(b.nsc_min, b.nsc_max, channel_mode, self.rng)
            self.ca = DelayChannel(b.nca_min, b.nca_max, channel_mode, self.rng)
            self.s = self.model.layout.s
            self.c = self.model.layout.c
        else:
            self.state_grid = self.model.pre_set.grid
            self.input_grid = self.model.input_set.grid
            self.sc = self.ca = None
            self.s = 1
            self.c = 0

        self.x = tuple(float(v) for v in x0)
        self.k = 0
        self.mode = 0
        self._sample_hist = deque(maxlen=max(self.s, 1))
        self._output_hist = deque(maxlen=self.c) if self.c else deque()

        x0_sym = self.state_grid.point_to_symbol(self.x)
        self._init_mode_and_u0(x0_sym, u0)
        if self.networked:
            # preload the actuation channel: the hold applies the
            # initialization input until the first real output arrives
            for age in range(self.c, 0, -1):
                delay = (self.ca.n_max if channel_mode == "prolonged"
                         else self.rng.randint(self.ca.n_min, self.ca.n_max))
                self.ca.queue.append((-age, self.u0_idx, delay))
            for _ in range(self.c):
                self._output_hist.appendleft(self.u0_idx)
        self.zoh = self.input_grid.center(self.u0_idx)

    # ------------------------------------------------------------------

    def _relations(self):
        if self.controller.modes:
            return [m.relation for m in self.controller.modes]
        return [self.controller.relation]

    def _assignment(self, x_sym):
        """Expanded-state assignment with x_sym as the newest sample."""
        if not self.networked:
            assignment = {}
            for ids, i in zip(self.model.pre_set.var_ids, x_sym):
                for b, v in enumerate(ids):
                    assignment[v] = (i >> b) & 1
            return assignment
        xs = [x_sym] + list(self._sample_hist)[:self.s - 1]
        xs += [None] * (self.s - len(xs))
        us = list(self._output_hist)
        return self.model.encode_state(tuple(xs), tuple(us))

    def _init_mode_and_u0(self, x0_sym, u0):
        candidates = (_all_input_codes(self.input_grid) if u0 is None
                      else [_input_code(self.input_grid, u0)])
        relations = self._relations()
        for mode_idx, rel in enumerate(relations):
            for code in candidates:
                self.u0_idx = _code_to_index(code, self.input_grid)
                if not self.networked:
                    a = self._assignment(x0_sym)
                else:
                    xs = (x0_sym,) + (None,) * (self.s - 1)
                    us = (self.u0_idx,) * self.c
                    a = self.model.encode_state(xs, us)
                if self.controller.pick_input(a, rel) is not None:
                    self.mode = mode_idx
                    return
        raise DomainViolation(
            f"initial state {x0_sym} admits no initialization input in any "
            f"controller mode")

    def step(self):
        """Advance one sampling period; returns the StepRecord."""
        k = self.k
        x_sym = self.state_grid.point_to_symbol(self.x)

        delivered = None
        if self.networked:
            self.sc.send(x_sym, k)
            arrivals = self.sc.deliver(k)
            if arrivals:
                delivered = arrivals[-1]
        else:
            delivered = x_sym

        assignment = self._assignment(x_sym)
        relations = self._relations()
        rel = relations[self.mode]
        code = self.controller.pick_input(assignment, rel)
        if code is None:
            raise DomainViolation(
                f"step {k}: controller mode {self.mode} has no input for the "
                f"expanded state with newest measurement {x_sym}")
        chosen = _code_to_index(code, self.input_grid)

        if self.networked:
            self.ca.send(chosen, k)
            u_arrivals = self.ca.deliver(k)
            if u_arrivals:
                self.zoh = self.input_grid.center(u_arrivals[-1])
        else:
            self.zoh = self.input_grid.center(chosen)

        applied = self.zoh
        x_next = integrate(self.plant, self.x, applied)
        record = StepRecord(k=k, x=self.x, delivered=delivered, chosen=chosen,
                            applied=applied, mode=self.mode)

        # bookkeeping for the next expanded state
        if self.networked:
            self._sample_hist.appendleft(x_sym)
            if self.c:
                self._output_hist.appendleft(chosen)

        if self.controller.modes and delivered is not None:
            self._maybe_switch_mode(delivered, x_next, chosen)

        self.x = x_next
        self.k = k + 1
        return record

    def _maybe_switch_mode(self, delivered, x_next, chosen):
        mode = self.controller.modes[self.mode]
        goal_hit = self._eval_on_anchor(mode.goal, delivered)
        if not goal_hit:
            return
        nxt = mode.next_mode
        try:
            next_sym = self.state_grid.point_to_symbol(x_next)
        except OutOfDomainError:
            return
        a = self._assignment(next_sym)
        if self.controller.pick_input(a, self._relations()[nxt]) is not None:
            self.mode = nxt

    def _eval_on_anchor(self, predicate, symbol):
        """Does the measured cell satisfy a goal predicate?

        Goal predicates constrain the newest-measurement register; other
        registers are free (within the state space), so the check is
        satisfiability after fixing the anchor bits to the cell.
        """
        if not self.networked:
            assignment = {}
            for ids, i in zip(self.model.pre_set.var_ids, symbol):
                for b, v in enumerate(ids):
                    assignment[v] = (i >> b) & 1
        else:
            fields = self.model.layout.state_field_ids(0, "pre")
            assignment = {}
            for ids, i in zip(fields, symbol):
                for b, v in enumerate(ids):
                    assignment[v] = (i >> b) & 1
            block = self.model.layout.x_pre[0]
            for v in block:
                assignment.setdefault(v, 0)
        return not predicate.restrict(assignment).is_false

    def run(self, steps, stop=None):
        """Iterate `step`; the trace is fully determined by config + seed."""
        records = []
        for _ in range(steps):
            rec = self.step()
            records.append(rec)
            if stop is not None and stop(rec):
                break
        meta = {
            "plant": getattr(self.plant, "name", "plant"),
            "x0": list(records[0].x) if records else list(self.x),
            "seed": self.seed,
            "channel_mode": self.channel_mode,
            "state_npoints": list(self.state_grid.npoints),
            "input_npoints": list(self.input_grid.npoints),
        }
        return Trace(records=records, meta=meta)


def _input_code(grid, u0):
    idx = grid.point_to_symbol(tuple(u0))
    code = 0
    off = 0
    for i, b in zip(idx, grid.bits):
        code |= i << off
        off += b
    return code


def _all_input_codes(grid):
    """Packed codes of every valid input cell, ascending."""
    import itertools
    codes = []
    for idx in itertools.product(*(range(n) for n in grid.npoints)):
        code = 0
        off = 0
        for i, b in zip(idx, grid.bits):
            code |= i << off
            off += b
        codes.append(code)
    return sorted(codes)


def _code_to_index(code, grid):
    idx = []
    off = 0
    for b in grid.bits:
        idx.append((code >> off) & ((1 << b) - 1))
        off += b
    return tuple(idx)


# ----------------------------------------------------------------------
# trace export


def export_trace(trace, path, fmt=None):
    """Write a trace as CSV or JSON (schema mirrors Trace.rows)."""
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "csv":
        rows = trace.rows()
        fields = list(rows[0].keys()) if rows else _default_fields(trace)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v
                            for k, v in row.items()})
    elif fmt == "json":
        payload = {
            "meta": trace.meta,
            "records": [{
                "k": r.k,
                "x": list(r.x),
                "delivered": list(r.delivered) if r.delivered is not None else None,
                "chosen": list(r.chosen) if r.chosen is not None else None,
                "applied": list(r.applied),
                "mode": r.mode,
            } for r in trace.records],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def _default_fields(trace):
    n = len(trace.meta.get("state_npoints", []))
    m = len(trace.meta.get("input_npoints", []))
    return (["k"] + [f"x{d}" for d in range(n)]
            + ["delivered_symbol", "chosen_input_symbol"]
            + [f"applied_u{d}" for d in range(m)] + ["mode"])


def load_trace_csv(path):
    """Rows back as dicts with numeric types restored."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if key in ("k", "delivered_symbol", "chosen_input_symbol", "mode"):
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def load_trace_json(path):
    with open(path) as fh:
        payload = json.load(fh)
    records = [StepRecord(k=r["k"], x=tuple(r["x"]),
                          delivered=tuple(r["delivered"]) if r["delivered"] is not None else None,
                          chosen=tuple(r["chosen"]) if r["chosen"] is not None else None,
                          applied=tuple(r["applied"]), mode=r["mode"])
               for r in payload["records"]]
    return Trace(records=records, meta=payload["meta"])
