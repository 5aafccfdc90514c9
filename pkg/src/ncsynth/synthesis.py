"""Fixed-point synthesis of symbolic controllers.

All solvers work over any model exposing the symbolic-game protocol
(trans, pre_vars / input_vars / post_vars, pre_to_post, state_domain,
input_domain), so the same code serves plant models and expanded
networked models.  Winning sets are sets of state-input pairs; the
controllable predecessor keeps a pair iff it has at least one successor
and every successor stays inside the projection of the current set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bdd import Bdd


class SynthesisError(Exception):
    pass


@dataclass
class Mode:
    """One discrete state of a mode-switching controller."""
    relation: Bdd
    goal: Bdd          # predicate on the measured cell (anchor register)
    next_mode: int
    _domain: Bdd = field(default=None, repr=False, compare=False)

    def domain(self, input_vars):
        if self._domain is None:
            self._domain = self.relation.exists(input_vars)
        return self._domain


@dataclass
class Controller:
    relation: Bdd
    pre_vars: tuple
    input_vars: tuple
    modes: list = None
    stats: dict = field(default_factory=dict)
    model: object = None
    _domain: Bdd = field(default=None, repr=False, compare=False)

    @property
    def mgr(self):
        return self.relation.mgr

    @property
    def domain(self):
        if self._domain is None:
            self._domain = self.relation.exists(self.input_vars)
        return self._domain

    @property
    def is_empty(self):
        return self.domain.is_false

    @property
    def is_dynamic(self):
        return bool(self.modes)

    def mode_relations(self):
        if self.modes:
            return [m.relation for m in self.modes]
        return [self.relation]

    def pick_input(self, assignment, relation=None):
        """Smallest admissible input code at a state, or None.

        The order is the packed binary input code, matching the
        determinization rule used for code emission.
        """
        rel = relation if relation is not None else self.relation
        f = rel.restrict(assignment)
        if f.is_false:
            return None
        code = 0
        for j in range(len(self.input_vars) - 1, -1, -1):
            v = self.input_vars[j]
            f0 = f.restrict({v: 0})
            if f0.is_false:
                f = f.restrict({v: 1})
                code |= 1 << j
            else:
                f = f0
        return code

    def admissible_inputs(self, assignment, relation=None):
        """All admissible input codes at a state."""
        rel = relation if relation is not None else self.relation
        f = rel.restrict(assignment)
        out = []
        for bits in self.mgr.cubes(f, self.input_vars):
            code = 0
            for j, bit in enumerate(bits):
                code |= bit << j
            out.append(code)
        return sorted(out)


def _valid_pairs(model):
    cached = getattr(model, "_valid_pairs", None)
    if cached is None:
        cached = model.state_domain & model.input_domain
        model._valid_pairs = cached
    return cached


def _nonblocking(model):
    cached = getattr(model, "_nonblocking", None)
    if cached is None:
        cached = model.trans.exists(model.post_vars)
        model._nonblocking = cached
    return cached


def cpre(model, Z):
    """Controllable predecessor of a set of state-input pairs."""
    mgr = model.mgr
    proj = Z.exists(model.input_vars)
    proj_post = proj.rename(model.pre_to_post)
    escapes = mgr.exist_and(model.trans, ~proj_post, model.post_vars)
    return _nonblocking(model) & ~escapes


def _pairs(model, states):
    return states & _valid_pairs(model)


def solve_safety(model, safe):
    """Greatest fixed point: stay inside `safe` forever."""
    constraint = _pairs(model, safe)
    Z = constraint
    iterations = 0
    while True:
        nxt = cpre(model, Z) & constraint
        iterations += 1
        if nxt == Z:
            break
        Z = nxt
    return Controller(relation=Z, pre_vars=model.pre_vars,
                      input_vars=model.input_vars, model=model,
                      stats={"iterations": iterations, "kind": "safety"})


def _reach_fixpoint(model, target_pairs, within=None, collect=True):
    """Least fixed point of target_pairs | cpre(Z), optionally constrained
    to `within` pairs at every step.  Returns (winning pairs, first-entry
    relation, iterations)."""
    Z = target_pairs if within is None else (target_pairs & within)
    relation = Z
    domain = Z.exists(model.input_vars)
    iterations = 0
    while True:
        step = cpre(model, Z)
        if within is not None:
            step = step & within
        nxt = Z | step
        iterations += 1
        if nxt == Z:
            break
        if collect:
            relation = relation | (step & ~domain)
            domain = nxt.exists(model.input_vars)
        Z = nxt
    return Z, relation if collect else Z, iterations


def solve_reach(model, target):
    """Least fixed point; the controller keeps, for every state, the inputs
    available when the state first entered the winning set, so progress
    toward the target is strictly decreasing in rank.  Target states keep
    every valid input."""
    target_pairs = _pairs(model, target)
    Z, relation, iterations = _reach_fixpoint(model, target_pairs)
    return Controller(relation=relation, pre_vars=model.pre_vars,
                      input_vars=model.input_vars, model=model,
                      stats={"iterations": iterations, "kind": "reach"})


def solve_persistence(model, safe):
    """Eventually stay in `safe` forever: least fixed point over reach
    layers whose inner greatest fixed point allows lingering inside safe
    as long as the layer below stays available."""
    safe_pairs = _pairs(model, safe)
    all_pairs = _valid_pairs(model)
    Z = model.mgr.false
    relation = model.mgr.false
    domain = model.mgr.false
    outer = inner_total = 0
    while True:
        Y = all_pairs
        while True:
            nxt = (safe_pairs & cpre(model, Y)) | cpre(model, Z)
            inner_total += 1
            if nxt == Y:
                break
            Y = nxt
        outer += 1
        if Y == Z:
            break
        relation = relation | (Y & ~domain)
        domain = Y.exists(model.input_vars)
        Z = Y
    return Controller(relation=relation, pre_vars=model.pre_vars,
                      input_vars=model.input_vars, model=model,
                      stats={"iterations": outer, "inner_iterations": inner_total,
                             "kind": "persistence"})


def solve_recurrence(model, target):
    """Visit `target` infinitely often: greatest fixed point over the set
    from which the target is reachable while keeping the ability to
    return.  The controller is the reach strategy toward the final
    re-entry pairs."""
    target_pairs = _pairs(model, target)
    Y = _valid_pairs(model)
    outer = inner_total = 0
    while True:
        reentry = target_pairs & cpre(model, Y)
        Z, _, inner = _reach_fixpoint(model, reentry, collect=False)
        inner_total += inner
        outer += 1
        if Z == Y:
            break
        Y = Z
    reentry = target_pairs & cpre(model, Y)
    _, relation, _ = _reach_fixpoint(model, reentry)
    return Controller(relation=relation, pre_vars=model.pre_vars,
                      input_vars=model.input_vars, model=model,
                      stats={"iterations": outer, "inner_iterations": inner_total,
                             "kind": "recurrence"})


def solve_gen_buchi(model, targets, safe=None):
    """Visit every target infinitely often while staying safe.

    Solved as mutually dependent constrained-reachability problems: mode i
    drives into target_i pairs whose successors all lie in the next mode's
    domain (so the visit always has a continuation), without leaving
    `safe`; domains are iterated to their joint fixed point, at which they
    all coincide with the winning set.  The result is a mode-switching
    controller cycling through the targets.
    """
    if not targets:
        raise SynthesisError("at least one target is required")
    mgr = model.mgr
    m = len(targets)
    safe_pairs = _pairs(model, safe) if safe is not None else _valid_pairs(model)
    domains = [safe_pairs.exists(model.input_vars) for _ in range(m)]
    outer = 0

    def reentry(i):
        into_next = cpre(model, domains[(i + 1) % m] & safe_pairs)
        return _pairs(model, targets[i]) & into_next & safe_pairs

    # the sweep that confirms the fixed point already recomputes every
    # mode's reach layers with the final domains, so its first-entry
    # relations double as the extracted controllers
    relations = [None] * m
    while True:
        changed = False
        for i in range(m):
            W, relations[i], _ = _reach_fixpoint(model, reentry(i),
                                                 within=safe_pairs)
            d = W.exists(model.input_vars)
            if d != domains[i]:
                domains[i] = d
                changed = True
        outer += 1
        if not changed:
            break

    win = domains[0]
    for d in domains[1:]:
        if d != win:
            raise SynthesisError("mode domains failed to converge to a "
                                 "common winning set")
    if win.is_false:
        return Controller(relation=mgr.false, pre_vars=model.pre_vars,
                          input_vars=model.input_vars, model=model, modes=[],
                          stats={"iterations": outer, "kind": "gen_buchi",
                                 "empty": True})

    modes = []
    for i in range(m):
        if relations[i].exists(model.input_vars) != win:
            raise SynthesisError("goal-anchored extraction lost part of the "
                                 "winning set")
        modes.append(Mode(relation=relations[i], goal=targets[i],
                          next_mode=(i + 1) % m))
    return Controller(relation=modes[0].relation, pre_vars=model.pre_vars,
                      input_vars=model.input_vars, model=model, modes=modes,
                      stats={"iterations": outer, "kind": "gen_buchi"})
