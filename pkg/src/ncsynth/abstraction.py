"""Finite transition-system abstraction of a sampled plant.

Each (cell, input) pair gets as successors every cell whose interior
overlaps the box [x' - r', x' + r'], where x' is the integrated cell
center and r' the grown cell radius.  Pairs whose successor box is not
contained in the gridded domain are blocking: leaving the domain is
treated like hitting an obstacle, so no partial successor sets are kept.

Variable layout of the produced system: input bits first, then state
bits with pre and post interleaved per bit (pre_j, post_j adjacent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bdd import Bdd, Manager
from .grid import SymbolicSet
from .plants import growth_radius, integrate

_FUZZ = 1e-9


@dataclass
class TransitionSystem:
    """Symbolic system (states, initial states, inputs, transitions)."""

    mgr: Manager
    pre_set: SymbolicSet
    input_set: SymbolicSet
    post_set: SymbolicSet
    trans: Bdd
    initial: Bdd
    tau: float = 0.0
    name: str = "plant"

    def __post_init__(self):
        self.pre_vars = self.pre_set.support
        self.input_vars = self.input_set.support
        self.post_vars = self.post_set.support
        self.pre_to_post = {}
        self.post_to_pre = {}
        for pre_ids, post_ids in zip(self.pre_set.var_ids, self.post_set.var_ids):
            for a, b in zip(pre_ids, post_ids):
                self.pre_to_post[a] = b
                self.post_to_pre[b] = a
        self.state_domain = self.pre_set.domain()
        self.input_domain = self.input_set.domain()

    @property
    def all_vars(self):
        return tuple(sorted(self.pre_vars + self.input_vars + self.post_vars))

    def n_transitions(self):
        return self.mgr.sat_count(self.trans, self.all_vars)

    def n_states(self):
        return self.pre_set.grid.size()

    def is_deterministic(self):
        """True iff every (pre, input) with a successor has exactly one."""
        pairs = self.trans.exists(self.post_vars)
        total = self.n_transitions()
        return total == self.mgr.sat_count(pairs, tuple(sorted(self.pre_vars + self.input_vars)))

    def transitions(self):
        """Iterate (pre index vector, input index vector, post index vector)."""
        sup = self.all_vars
        for bits in self.mgr.cubes(self.trans, sup):
            a = dict(zip(sup, bits))
            yield (self.pre_set.decode_index(a),
                   self.input_set.decode_index(a),
                   self.post_set.decode_index(a))


def allocate_layout(mgr, state_grid, input_grid):
    """Reserve variables: input block, then interleaved pre/post state bits."""
    ib = input_grid.total_bits
    sb = state_grid.total_bits
    base = mgr.var_count
    mgr.add_vars(ib + 2 * sb)
    input_ids, off = [], base
    for nbits in input_grid.bits:
        input_ids.append(tuple(range(off, off + nbits)))
        off += nbits
    pre_ids, post_ids = [], []
    bit = 0
    for nbits in state_grid.bits:
        pre_ids.append(tuple(base + ib + 2 * (bit + j) for j in range(nbits)))
        post_ids.append(tuple(base + ib + 2 * (bit + j) + 1 for j in range(nbits)))
        bit += nbits
    return input_ids, pre_ids, post_ids


def _post_cell_ranges(grid, center, radius):
    """Cells whose interior overlaps [center-radius, center+radius]; None if
    the box pokes outside the domain (blocking) or selects nothing."""
    ranges = []
    for d in range(grid.dim):
        lo = center[d] - radius[d]
        hi = center[d] + radius[d]
        half = grid.eta[d] / 2
        # strict overlap: cell i spans (i*eta+lb-half, i*eta+lb+half)
        a = int(math.floor((lo - grid.lb[d]) / grid.eta[d] + 0.5))
        if grid.lb[d] + a * grid.eta[d] + half <= lo + _FUZZ * grid.eta[d]:
            a += 1
        b = int(math.ceil((hi - grid.lb[d]) / grid.eta[d] - 0.5))
        if grid.lb[d] + b * grid.eta[d] - half >= hi - _FUZZ * grid.eta[d]:
            b -= 1
        if a > b:
            return None
        if a < 0 or b > grid.npoints[d] - 1:
            return None
        ranges.append((a, b))
    return ranges


def build_abstraction(spec, state_grid, input_grid, mgr=None):
    """Construct the plant's symbolic model over fresh variables."""
    if spec.dim != state_grid.dim:
        raise ValueError(f"plant dimension {spec.dim} != state grid dimension "
                         f"{state_grid.dim}")
    if spec.input_dim != input_grid.dim:
        raise ValueError(f"plant input dimension {spec.input_dim} != input "
                         f"grid dimension {input_grid.dim}")
    if mgr is None:
        mgr = Manager()
    input_ids, pre_ids, post_ids = allocate_layout(mgr, state_grid, input_grid)

    support = sorted(v for ids in (input_ids + pre_ids + post_ids) for v in ids)
    width = len(support)
    shift = {v: width - 1 - i for i, v in enumerate(support)}

    radius = tuple(e / 2 for e in state_grid.eta)
    inputs = [(idx, input_grid.center(idx)) for idx in _iter_indices(input_grid)]
    codes = []
    for pre_idx in _iter_indices(state_grid):
        x = state_grid.center(pre_idx)
        pre_code = _pack(pre_idx, pre_ids, shift)
        for u_idx, u in inputs:
            xp = integrate(spec, x, u)
            rp = growth_radius(spec, radius, u)
            ranges = _post_cell_ranges(state_grid, xp, rp)
            if ranges is None:
                continue
            head = pre_code | _pack(u_idx, input_ids, shift)
            for post_idx in _iter_ranges(ranges):
                codes.append(head | _pack(post_idx, post_ids, shift))
    trans = mgr.from_minterms(support, codes)

    pre_set = SymbolicSet(mgr, state_grid, pre_ids)
    pre_set = pre_set.with_chi(pre_set.domain())
    post_set = SymbolicSet(mgr, state_grid, post_ids)
    post_set = post_set.with_chi(post_set.domain())
    input_set = SymbolicSet(mgr, input_grid, input_ids)
    input_set = input_set.with_chi(input_set.domain())
    return TransitionSystem(mgr=mgr, pre_set=pre_set, input_set=input_set,
                            post_set=post_set, trans=trans,
                            initial=pre_set.domain(), tau=spec.tau,
                            name=spec.name)


def _pack(idx, ids, shift):
    code = 0
    for dim_ids, i in zip(ids, idx):
        for b, v in enumerate(dim_ids):
            if (i >> b) & 1:
                code |= 1 << shift[v]
    return code


def _iter_indices(grid):
    idx = [0] * grid.dim
    npoints = grid.npoints
    while True:
        yield tuple(idx)
        d = 0
        while d < grid.dim:
            idx[d] += 1
            if idx[d] < npoints[d]:
                break
            idx[d] = 0
            d += 1
        else:
            return


def _iter_ranges(ranges):
    idx = [a for a, _ in ranges]
    while True:
        yield tuple(idx)
        d = 0
        while d < len(ranges):
            idx[d] += 1
            if idx[d] <= ranges[d][1]:
                break
            idx[d] = ranges[d][0]
            d += 1
        else:
            return


def remove_region(ts, region):
    """Drop every transition entering or leaving the region."""
    if region.grid != ts.pre_set.grid:
        raise ValueError("region must live on the system's state grid")
    mask_pre = region.chi
    if region.var_ids != ts.pre_set.var_ids:
        raise ValueError("region must use the system's pre variables")
    mask_post = mask_pre.rename(ts.pre_to_post)
    trans = ts.trans & ~mask_pre & ~mask_post
    return TransitionSystem(mgr=ts.mgr, pre_set=ts.pre_set,
                            input_set=ts.input_set, post_set=ts.post_set,
                            trans=trans, initial=ts.initial,
                            tau=ts.tau, name=ts.name)
