"""Expansion of a plant model into a networked-control-system model.

The expanded state stacks shift registers onto the plant state: one
register per sampling period of sensor-to-controller delay (holding past
state symbols, with a reserved marker for "no measurement yet" during
channel fill-up), one register per period of controller-to-actuator delay
(holding past controller outputs), and, when a channel's delay range is
not a singleton, registers recording the delay drawn for each in-flight
packet.  A transition shifts every register by one, requires the new head
state to be a plant successor of the old head under the oldest buffered
input, and lets fresh delay values range over their channel bounds.

Everything here is built from rename/apply/quantify steps on the plant's
transition relation; the element-by-element semantics only appears in the
test oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .bdd import Bdd, Manager
from .grid import dim_interval


@dataclass(frozen=True)
class DelayBounds:
    nsc_min: int
    nsc_max: int
    nca_min: int
    nca_max: int

    def __post_init__(self):
        for name in ("nsc", "nca"):
            lo = getattr(self, name + "_min")
            hi = getattr(self, name + "_max")
            if not (isinstance(lo, int) and isinstance(hi, int)):
                raise ValueError("delay bounds must be integers")
            if not (1 <= lo <= hi):
                raise ValueError(f"{name} bounds must satisfy 1 <= min <= max")

    @property
    def prolonged(self):
        return self.nsc_min == self.nsc_max and self.nca_min == self.nca_max

    @property
    def sc_range(self):
        return self.nsc_max - self.nsc_min + 1

    @property
    def ca_range(self):
        return self.nca_max - self.nca_min + 1


def _delay_bits(rng):
    return (rng - 1).bit_length() if rng > 1 else 0


def state_code_layout(grid):
    """(total code bits incl. marker flag, marker code, per-dim bit offsets).

    The no-measurement marker is the smallest binary code no grid cell
    uses; if every code is taken (all per-dimension point counts are
    powers of two) one extra flag bit is appended instead.
    """
    bits = grid.bits
    offsets = []
    off = 0
    for b in bits:
        offsets.append(off)
        off += b
    candidates = [grid.npoints[d] << offsets[d]
                  for d in range(grid.dim)
                  if grid.npoints[d] < (1 << bits[d])]
    if candidates:
        return off, min(candidates), tuple(offsets)
    return off + 1, 1 << off, tuple(offsets)


class NcsLayout:
    """Variable positions for the expanded model.

    Bits of one register are spread so that a register's pre/post pair and
    the matching bits of adjacent registers sit next to each other, which
    keeps the shift-equality relations linear in size.
    """

    def __init__(self, bounds, state_grid, input_grid, base=0):
        s = bounds.nsc_max
        c = bounds.nca_max
        ib = input_grid.total_bits
        sbq, marker, soffsets = state_code_layout(state_grid)
        self.s = s
        self.c = c
        self.input_bits = ib
        self.state_bits = sbq
        self.marker_code = marker
        self.state_dim_offsets = soffsets
        self.sc_range = bounds.sc_range
        self.ca_range = bounds.ca_range
        self.sc_bits = _delay_bits(bounds.sc_range)
        self.ca_bits = _delay_bits(bounds.ca_range)

        isec = base
        ssec = isec + ib * (1 + 2 * c)
        dsec = ssec + sbq * 2 * s
        casec = dsec + self.sc_bits * 2 * s
        self.var_count = casec + self.ca_bits * 2 * c - base

        self.label = tuple(isec + j * (1 + 2 * c) for j in range(ib))
        self.u_pre = tuple(tuple(isec + j * (1 + 2 * c) + 1 + 2 * i
                                 for j in range(ib)) for i in range(c))
        self.u_post = tuple(tuple(v + 1 for v in reg) for reg in self.u_pre)
        self.x_pre = tuple(tuple(ssec + j * 2 * s + 2 * i
                                 for j in range(sbq)) for i in range(s))
        self.x_post = tuple(tuple(v + 1 for v in reg) for reg in self.x_pre)
        self.dsc_pre = tuple(tuple(dsec + j * 2 * s + 2 * i
                                   for j in range(self.sc_bits)) for i in range(s))
        self.dsc_post = tuple(tuple(v + 1 for v in reg) for reg in self.dsc_pre)
        self.dca_pre = tuple(tuple(casec + j * 2 * c + 2 * i
                                   for j in range(self.ca_bits)) for i in range(c))
        self.dca_post = tuple(tuple(v + 1 for v in reg) for reg in self.dca_pre)

        self.state_grid = state_grid
        self.input_grid = input_grid

    def state_field_ids(self, reg, which="pre"):
        """Per-dimension variable ids of one state register (LSB first)."""
        block = self.x_pre[reg] if which == "pre" else self.x_post[reg]
        out = []
        for off, b in zip(self.state_dim_offsets, self.state_grid.bits):
            out.append(tuple(block[off + k] for k in range(b)))
        return tuple(out)

    def input_field_ids(self, reg, which="pre"):
        block = self.u_pre[reg] if which == "pre" else self.u_post[reg]
        out = []
        off = 0
        for b in self.input_grid.bits:
            out.append(tuple(block[off + k] for k in range(b)))
            off += b
        return tuple(out)

    def label_field_ids(self):
        out = []
        off = 0
        for b in self.input_grid.bits:
            out.append(tuple(self.label[off + k] for k in range(b)))
            off += b
        return tuple(out)

    @property
    def pre_vars(self):
        vs = [v for reg in self.x_pre for v in reg]
        vs += [v for reg in self.u_pre for v in reg]
        vs += [v for reg in self.dsc_pre for v in reg]
        vs += [v for reg in self.dca_pre for v in reg]
        return tuple(sorted(vs))

    @property
    def post_vars(self):
        vs = [v for reg in self.x_post for v in reg]
        vs += [v for reg in self.u_post for v in reg]
        vs += [v for reg in self.dsc_post for v in reg]
        vs += [v for reg in self.dca_post for v in reg]
        return tuple(sorted(vs))

    @property
    def pre_to_post(self):
        return {a: a + 1 for a in self.pre_vars}


@dataclass
class NcsModel:
    mgr: Manager
    layout: NcsLayout
    bounds: DelayBounds
    trans: Bdd
    initial: Bdd
    base_name: str = "plant"
    tau: float = 0.0
    base_deterministic: bool = False

    def __post_init__(self):
        lay = self.layout
        self.pre_vars = lay.pre_vars
        self.post_vars = lay.post_vars
        self.input_vars = lay.label
        self.pre_to_post = lay.pre_to_post
        self.state_grid = lay.state_grid
        self.input_grid = lay.input_grid
        self.state_domain = _state_domain(self.mgr, lay)
        self.input_domain = _input_valid(self.mgr, lay, lay.label_field_ids())

    @property
    def all_vars(self):
        return tuple(sorted(self.pre_vars + self.input_vars + self.post_vars))

    def state_count(self):
        """Size of the expanded state set by the defining product formula."""
        b = self.bounds
        nx = self.state_grid.size()
        nu = self.input_grid.size()
        return ((nx + 1) ** b.nsc_max * nu ** b.nca_max
                * b.sc_range ** b.nsc_max * b.ca_range ** b.nca_max)

    def n_states_symbolic(self):
        return self.mgr.sat_count(self.state_domain, self.pre_vars)

    def n_transitions(self):
        return self.mgr.sat_count(self.trans, self.all_vars)

    def n_initial(self):
        return self.mgr.sat_count(self.initial, self.pre_vars)

    # -- decoding ------------------------------------------------------

    def decode_state(self, assignment, which="pre"):
        """Decode one expanded state into
        (state regs, input regs, sc delays, ca delays); the no-measurement
        marker decodes to None."""
        lay = self.layout
        if not isinstance(assignment, dict):
            sup = self.pre_vars if which == "pre" else self.post_vars
            assignment = dict(zip(sup, assignment))
        xs = []
        for i in range(lay.s):
            block = lay.x_pre[i] if which == "pre" else lay.x_post[i]
            code = _read_code(assignment, block)
            if code == lay.marker_code:
                xs.append(None)
            else:
                xs.append(_split_code(code, lay.state_dim_offsets,
                                      self.state_grid))
        us = []
        for i in range(lay.c):
            fields = lay.input_field_ids(i, which)
            us.append(tuple(_read_code(assignment, f) for f in fields))
        dsc = [self.bounds.nsc_min + _read_code(
            assignment, lay.dsc_pre[i] if which == "pre" else lay.dsc_post[i])
            for i in range(lay.s)]
        dca = [self.bounds.nca_min + _read_code(
            assignment, lay.dca_pre[i] if which == "pre" else lay.dca_post[i])
            for i in range(lay.c)]
        return tuple(xs), tuple(us), tuple(dsc), tuple(dca)

    def decode_label(self, assignment):
        if not isinstance(assignment, dict):
            assignment = dict(zip(self.input_vars, assignment))
        return tuple(_read_code(assignment, f) for f in self.layout.label_field_ids())

    def encode_state(self, xs, us, dsc=None, dca=None):
        """Assignment dict for one expanded pre-state; None marks a state
        register with no measurement."""
        lay = self.layout
        if len(xs) != lay.s or len(us) != lay.c:
            raise ValueError("register vectors have wrong length")
        assignment = {}
        for i, x in enumerate(xs):
            if x is None:
                code = lay.marker_code
            else:
                code = 0
                for off, idx, n in zip(lay.state_dim_offsets, x,
                                       self.state_grid.npoints):
                    if not (0 <= idx < n):
                        raise ValueError(f"state index {idx} out of range")
                    code |= idx << off
            _write_code(assignment, lay.x_pre[i], code)
        for i, u in enumerate(us):
            code = 0
            off = 0
            for idx, n, b in zip(u, self.input_grid.npoints,
                                 self.input_grid.bits):
                if not (0 <= idx < n):
                    raise ValueError(f"input index {idx} out of range")
                code |= idx << off
                off += b
            _write_code(assignment, lay.u_pre[i], code)
        for i in range(lay.s):
            v = (dsc[i] if dsc is not None else self.bounds.nsc_max) - self.bounds.nsc_min
            _write_code(assignment, lay.dsc_pre[i], v)
        for i in range(lay.c):
            v = (dca[i] if dca is not None else self.bounds.nca_max) - self.bounds.nca_min
            _write_code(assignment, lay.dca_pre[i], v)
        return assignment


def _read_code(assignment, block):
    code = 0
    for k, v in enumerate(block):
        code |= (assignment[v] & 1) << k
    return code


def _write_code(assignment, block, code):
    for k, v in enumerate(block):
        assignment[v] = (code >> k) & 1


def _split_code(code, offsets, grid):
    idx = []
    for off, b in zip(offsets, grid.bits):
        idx.append((code >> off) & ((1 << b) - 1))
    return tuple(idx)


def _reg_is_state(mgr, lay, reg, which="pre"):
    """Register holds a real (in-range, non-marker) state symbol."""
    fields = lay.state_field_ids(reg, which)
    r = mgr.true
    for ids, n in zip(fields, lay.state_grid.npoints):
        r = r & dim_interval(mgr, ids, 0, n - 1)
    block = lay.x_pre[reg] if which == "pre" else lay.x_post[reg]
    if lay.state_bits > sum(lay.state_grid.bits):
        flag = block[-1]
        r = r & ~mgr.var(flag)
    return r


def _reg_is_marker(mgr, lay, reg, which="pre"):
    block = lay.x_pre[reg] if which == "pre" else lay.x_post[reg]
    return mgr.cube({v: (lay.marker_code >> k) & 1 for k, v in enumerate(block)})


def _input_valid(mgr, lay, fields):
    r = mgr.true
    for ids, n in zip(fields, lay.input_grid.npoints):
        r = r & dim_interval(mgr, ids, 0, n - 1)
    return r


def _delay_valid(mgr, block, rng):
    if not block:
        return mgr.true
    return dim_interval(mgr, block, 0, rng - 1)


def _state_domain(mgr, lay):
    d = mgr.true
    for i in range(lay.s):
        d = d & (_reg_is_state(mgr, lay, i) | _reg_is_marker(mgr, lay, i))
    for i in range(lay.c):
        d = d & _input_valid(mgr, lay, lay.input_field_ids(i))
    for i in range(lay.s):
        d = d & _delay_valid(mgr, lay.dsc_pre[i], lay.sc_range)
    for i in range(lay.c):
        d = d & _delay_valid(mgr, lay.dca_pre[i], lay.ca_range)
    return d


def expand(base, bounds, mgr=None, input_selector=None):
    """Lift a plant model over delayed channels (pure BDD pipeline).

    input_selector, when given, maps (sc delay vector, ca delay vector) to
    the shift j of the buffered input consumed by the plant step (0 picks
    the oldest register).  The default, matching constant prolonged
    actuation delays, always applies the oldest buffered input.
    """
    if not isinstance(bounds, DelayBounds):
        bounds = DelayBounds(*bounds)
    base_det = base.is_deterministic()
    if bounds.prolonged and not base_det:
        warnings.warn(
            "plant model is nondeterministic: the expanded model is still "
            "well defined, but controller refinement over prolonged delays "
            "requires a deterministic plant model", stacklevel=2)

    state_grid = base.pre_set.grid
    input_grid = base.input_set.grid
    if mgr is None:
        mgr = Manager()
    lay = NcsLayout(bounds, state_grid, input_grid, base=mgr.var_count)
    mgr.add_vars(lay.var_count)
    model = _assemble(mgr, lay, bounds, base, input_selector)
    model.base_name = base.name
    model.tau = base.tau
    model.base_deterministic = base_det
    return model


def _base_import_map(base, lay, applied_reg):
    m = {}
    for d in range(base.input_set.grid.dim):
        src = base.input_set.var_ids[d]
        dst = lay.input_field_ids(applied_reg, "pre")[d]
        m.update(zip(src, dst))
    for d in range(base.pre_set.grid.dim):
        src_pre = base.pre_set.var_ids[d]
        src_post = base.post_set.var_ids[d]
        dst_pre = lay.state_field_ids(0, "pre")[d]
        dst_post = lay.state_field_ids(0, "post")[d]
        m.update(zip(src_pre, dst_pre))
        m.update(zip(src_post, dst_post))
    return m


def _assemble(mgr, lay, bounds, base, input_selector):
    s, c = lay.s, lay.c

    def base_step(applied_reg):
        step = mgr.import_function(base.trans, _base_import_map(base, lay, applied_reg))
        return step & _reg_is_state(mgr, lay, 0, "pre") & _reg_is_state(mgr, lay, 0, "post")

    if input_selector is None or (bounds.sc_range == 1 and bounds.ca_range == 1):
        if input_selector is not None:
            j = input_selector((bounds.nsc_max,) * s, (bounds.nca_max,) * c)
            if j != 0:
                raise ValueError("with singleton delay ranges the oldest "
                                 "buffered input (shift 0) must be applied")
        core = base_step(c - 1)
    else:
        groups = {}
        for combo_sc in _delay_combos(bounds.nsc_min, bounds.nsc_max, s):
            for combo_ca in _delay_combos(bounds.nca_min, bounds.nca_max, c):
                j = input_selector(combo_sc, combo_ca)
                if not (0 <= j < c):
                    raise ValueError(f"input selector returned shift {j}, "
                                     f"valid range is [0, {c})")
                groups.setdefault(j, []).append((combo_sc, combo_ca))
        core = mgr.false
        for j, combos in sorted(groups.items()):
            sel = mgr.false
            for combo_sc, combo_ca in combos:
                cube = {}
                for i, n in enumerate(combo_sc):
                    _write_code(cube, lay.dsc_pre[i], n - bounds.nsc_min)
                for i, n in enumerate(combo_ca):
                    _write_code(cube, lay.dca_pre[i], n - bounds.nca_min)
                sel = sel | mgr.cube(cube)
            core = core | (sel & base_step(c - 1 - j))

    rel = core
    for i in range(1, s):
        rel = rel & mgr.equal_blocks(lay.x_post[i], lay.x_pre[i - 1])
    rel = rel & mgr.equal_blocks(lay.u_post[0], lay.label)
    for i in range(1, c):
        rel = rel & mgr.equal_blocks(lay.u_post[i], lay.u_pre[i - 1])
    for i in range(1, s):
        rel = rel & mgr.equal_blocks(lay.dsc_post[i], lay.dsc_pre[i - 1])
    for i in range(1, c):
        rel = rel & mgr.equal_blocks(lay.dca_post[i], lay.dca_pre[i - 1])
    rel = rel & _delay_valid(mgr, lay.dsc_post[0], bounds.sc_range)
    rel = rel & _delay_valid(mgr, lay.dca_post[0], bounds.ca_range)

    # membership of the source tuple and of the controller output
    for i in range(1, s):
        rel = rel & (_reg_is_state(mgr, lay, i) | _reg_is_marker(mgr, lay, i))
    for i in range(c):
        rel = rel & _input_valid(mgr, lay, lay.input_field_ids(i))
    for i in range(s):
        rel = rel & _delay_valid(mgr, lay.dsc_pre[i], bounds.sc_range)
    for i in range(c):
        rel = rel & _delay_valid(mgr, lay.dca_pre[i], bounds.ca_range)
    rel = rel & _input_valid(mgr, lay, lay.label_field_ids())

    init = mgr.import_function(
        base.initial,
        {v: t for d in range(base.pre_set.grid.dim)
         for v, t in zip(base.pre_set.var_ids[d], lay.state_field_ids(0, "pre")[d])})
    init = init & _reg_is_state(mgr, lay, 0, "pre")
    for i in range(1, s):
        init = init & _reg_is_marker(mgr, lay, i)
    init = init & _input_valid(mgr, lay, lay.input_field_ids(0))
    for i in range(1, c):
        init = init & mgr.equal_blocks(lay.u_pre[i], lay.u_pre[i - 1])
    for i in range(s):
        init = init & mgr.cube(_code_cube(lay.dsc_pre[i], bounds.sc_range - 1))
    for i in range(c):
        init = init & mgr.cube(_code_cube(lay.dca_pre[i], bounds.ca_range - 1))

    return NcsModel(mgr=mgr, layout=lay, bounds=bounds, trans=rel, initial=init,
                    base_name=base.name, tau=base.tau)


def _code_cube(block, code):
    return {v: (code >> k) & 1 for k, v in enumerate(block)}


def _delay_combos(lo, hi, count):
    if count == 0:
        yield ()
        return
    for head in range(lo, hi + 1):
        for rest in _delay_combos(lo, hi, count - 1):
            yield (head,) + rest


def expand_spec_set(sset, model, anchor="newest"):
    """Lift a predicate on the plant grid to the expanded state set by
    constraining one state register; all other registers range freely over
    their domains.  The no-measurement marker never satisfies the lifted
    predicate."""
    if anchor not in ("newest", "oldest"):
        raise ValueError("anchor must be 'newest' or 'oldest'")
    lay = model.layout
    reg = 0 if anchor == "newest" else lay.s - 1
    fields = lay.state_field_ids(reg, "pre")
    m = {}
    for d in range(sset.grid.dim):
        m.update(zip(sset.var_ids[d], fields[d]))
    lifted = model.mgr.import_function(sset.chi, m)
    return lifted & _reg_is_state(model.mgr, lay, reg, "pre") & model.state_domain


def reachable(model):
    """Least fixed point of the forward image from the initial states."""
    mgr = model.mgr
    quant = tuple(sorted(model.pre_vars + model.input_vars))
    back = {b: a for a, b in model.pre_to_post.items()}
    r = model.initial
    while True:
        img = mgr.exist_and(model.trans, r, quant).rename(back)
        nxt = r | img
        if nxt == r:
            return r
        r = nxt
