"""Hash-consed reduced ordered binary decision diagrams.

Every set and relation downstream (grids, transition systems, controllers)
is a boolean function over a fixed variable order, so this module is the
single source of canonicity: within one manager, two functions are equal
iff their root references are equal.

Variable index doubles as level (index 0 is closest to the root).  There
are no complement edges; negation is a cached traversal.  A manager and
all functions it owns are confined to one thread of control at a time.
"""

from __future__ import annotations

import bisect

FALSE = 0
TRUE = 1

_OPS = {"and": 0, "or": 1, "xor": 2}
_LEVEL_INF = 1 << 60

# cache tags (first tuple element); apply() uses its op code 0/1/2 directly
_TAG_NEG = 3
_TAG_QUANT = 4
_TAG_ANDEX = 5
_TAG_RENAME = 6
_TAG_ITE = 7


class BddError(Exception):
    """Misuse of the engine (bad variable, manager mismatch, ...)."""


class Manager:
    """Owner of a shared node store.

    Garbage collection is an epoch sweep: it only runs at public operation
    boundaries, once the node count exceeds ``gc_threshold``.  Functions
    that must survive a sweep are pinned; the `Bdd` wrapper pins its root
    for its own lifetime, so holding wrappers is enough.
    """

    def __init__(self, var_count=0, cache_enabled=True, gc_threshold=1 << 20):
        if var_count < 0:
            raise BddError("var_count must be nonnegative")
        self.var_count = var_count
        self._nodes = {}    # ref -> (var, lo, hi)
        self._unique = {}   # (var, lo, hi) -> ref
        self._next = 2      # refs 0/1 reserved for FALSE/TRUE
        self._cache = {}
        self._cache_enabled = cache_enabled
        self._gc_threshold = gc_threshold
        self._pins = {}     # ref -> pin count
        self._varset_tokens = {}
        self._map_tokens = {}

    # ------------------------------------------------------------------
    # node store

    def _make(self, var, lo, hi):
        if lo == hi:
            return lo
        key = (var, lo, hi)
        ref = self._unique.get(key)
        if ref is None:
            ref = self._next
            self._next = ref + 1
            self._unique[key] = ref
            self._nodes[ref] = key
        return ref

    def _level(self, ref):
        return self._nodes[ref][0] if ref > 1 else _LEVEL_INF

    def node_count(self):
        """Number of live internal nodes (terminals excluded)."""
        return len(self._nodes)

    def _entry(self):
        if len(self._nodes) > self._gc_threshold:
            self.collect()

    def _pin(self, ref):
        if ref > 1:
            self._pins[ref] = self._pins.get(ref, 0) + 1

    def _unpin(self, ref):
        if ref > 1:
            c = self._pins.get(ref, 0)
            if c <= 1:
                self._pins.pop(ref, None)
            else:
                self._pins[ref] = c - 1

    def pin(self, f):
        """Keep a function alive across sweeps independently of wrappers."""
        self._check_owned(f)
        self._pin(f.ref)

    def unpin(self, f):
        self._check_owned(f)
        self._unpin(f.ref)

    def collect(self):
        """Sweep nodes unreachable from pinned roots; drops the op cache."""
        nodes = self._nodes
        live = set()
        stack = list(self._pins)
        while stack:
            r = stack.pop()
            if r <= 1 or r in live:
                continue
            live.add(r)
            _, lo, hi = nodes[r]
            stack.append(lo)
            stack.append(hi)
        self._nodes = {r: nodes[r] for r in live}
        self._unique = {k: r for r, k in self._nodes.items()}
        self._cache = {}
        # back off when the live set itself fills the budget, otherwise the
        # cache would be wiped on every operation
        if len(live) > self._gc_threshold * 3 // 4:
            self._gc_threshold *= 2

    # ------------------------------------------------------------------
    # variables

    def add_vars(self, n):
        """Append n fresh variables; returns their indices."""
        first = self.var_count
        self.var_count = first + n
        return list(range(first, self.var_count))

    def _check_var(self, i):
        if not (0 <= i < self.var_count):
            raise BddError(f"variable {i} out of range [0, {self.var_count})")

    def var(self, i):
        self._check_var(i)
        return Bdd(self, self._make(i, FALSE, TRUE))

    @property
    def true(self):
        return Bdd(self, TRUE)

    @property
    def false(self):
        return Bdd(self, FALSE)

    def _norm_vars(self, vars):
        t = tuple(sorted(set(vars)))
        for v in t:
            self._check_var(v)
        return t

    def _varset_token(self, t):
        tok = self._varset_tokens.get(t)
        if tok is None:
            tok = len(self._varset_tokens)
            self._varset_tokens[t] = tok
        return tok

    def _check_owned(self, *fs):
        for f in fs:
            if not isinstance(f, Bdd) or f.mgr is not self:
                raise BddError("operand belongs to a different manager")

    # ------------------------------------------------------------------
    # boolean combinators

    def apply(self, op, f, g):
        code = _OPS.get(op)
        if code is None:
            raise BddError(f"unknown operator {op!r}")
        self._check_owned(f, g)
        self._entry()
        return Bdd(self, self._apply(code, f.ref, g.ref))

    def _apply(self, op, f, g):
        if op == 0:
            if f == 0 or g == 0:
                return 0
            if f == 1:
                return g
            if g == 1:
                return f
            if f == g:
                return f
        elif op == 1:
            if f == 1 or g == 1:
                return 1
            if f == 0:
                return g
            if g == 0:
                return f
            if f == g:
                return f
        else:
            if f == g:
                return 0
            if f == 0:
                return g
            if g == 0:
                return f
            if f == 1:
                return self._neg(g)
            if g == 1:
                return self._neg(f)
        if f > g:
            f, g = g, f
        key = (op, f, g)
        cached = self._cache_enabled
        if cached:
            r = self._cache.get(key)
            if r is not None:
                return r
        nodes = self._nodes
        fv, flo, fhi = nodes[f]
        gv, glo, ghi = nodes[g]
        if fv == gv:
            v = fv
            lo = self._apply(op, flo, glo)
            hi = self._apply(op, fhi, ghi)
        elif fv < gv:
            v = fv
            lo = self._apply(op, flo, g)
            hi = self._apply(op, fhi, g)
        else:
            v = gv
            lo = self._apply(op, f, glo)
            hi = self._apply(op, f, ghi)
        r = self._make(v, lo, hi)
        if cached:
            self._cache[key] = r
        return r

    def negate(self, f):
        self._check_owned(f)
        self._entry()
        return Bdd(self, self._neg(f.ref))

    def _neg(self, f):
        if f == 0:
            return 1
        if f == 1:
            return 0
        key = (_TAG_NEG, f)
        cached = self._cache_enabled
        if cached:
            r = self._cache.get(key)
            if r is not None:
                return r
        v, lo, hi = self._nodes[f]
        r = self._make(v, self._neg(lo), self._neg(hi))
        if cached:
            self._cache[key] = r
        return r

    def ite(self, f, g, h):
        self._check_owned(f, g, h)
        self._entry()
        return Bdd(self, self._ite(f.ref, g.ref, h.ref))

    def _ite(self, f, g, h):
        if f == 1:
            return g
        if f == 0:
            return h
        if g == h:
            return g
        if g == 1 and h == 0:
            return f
        if g == 0 and h == 1:
            return self._neg(f)
        key = (_TAG_ITE, f, g, h)
        cached = self._cache_enabled
        if cached:
            r = self._cache.get(key)
            if r is not None:
                return r
        nodes = self._nodes
        v = min(self._level(f), self._level(g), self._level(h))
        if f > 1 and nodes[f][0] == v:
            _, flo, fhi = nodes[f]
        else:
            flo = fhi = f
        if g > 1 and nodes[g][0] == v:
            _, glo, ghi = nodes[g]
        else:
            glo = ghi = g
        if h > 1 and nodes[h][0] == v:
            _, hlo, hhi = nodes[h]
        else:
            hlo = hhi = h
        r = self._make(v, self._ite(flo, glo, hlo), self._ite(fhi, ghi, hhi))
        if cached:
            self._cache[key] = r
        return r

    # ------------------------------------------------------------------
    # quantification

    def quantify(self, kind, f, vars):
        if kind not in ("exists", "forall"):
            raise BddError(f"unknown quantifier {kind!r}")
        self._check_owned(f)
        t = self._norm_vars(vars)
        self._entry()
        tok = self._varset_token(t)
        return Bdd(self, self._quant(kind == "forall", f.ref, t, 0, tok))

    def _quant(self, conj, f, vars, i, tok):
        if f <= 1:
            return f
        v, lo, hi = self._nodes[f]
        n = len(vars)
        while i < n and vars[i] < v:
            i += 1
        if i == n:
            return f
        key = (_TAG_QUANT, conj, f, tok, i)
        cached = self._cache_enabled
        if cached:
            r = self._cache.get(key)
            if r is not None:
                return r
        if vars[i] == v:
            a = self._quant(conj, lo, vars, i + 1, tok)
            b = self._quant(conj, hi, vars, i + 1, tok)
            r = self._apply(0 if conj else 1, a, b)
        else:
            r = self._make(v,
                           self._quant(conj, lo, vars, i, tok),
                           self._quant(conj, hi, vars, i, tok))
        if cached:
            self._cache[key] = r
        return r

    def exist_and(self, f, g, vars):
        """exists vars . (f & g), computed in one pass (relational product)."""
        self._check_owned(f, g)
        t = self._norm_vars(vars)
        self._entry()
        tok = self._varset_token(t)
        return Bdd(self, self._and_ex(f.ref, g.ref, t, 0, tok))

    def _and_ex(self, f, g, vars, i, tok):
        if f == 0 or g == 0:
            return 0
        if f == 1:
            return self._quant(False, g, vars, i, tok)
        if g == 1 or f == g:
            return self._quant(False, f, vars, i, tok)
        if f > g:
            f, g = g, f
        nodes = self._nodes
        fv = nodes[f][0]
        gv = nodes[g][0]
        v = fv if fv < gv else gv
        n = len(vars)
        while i < n and vars[i] < v:
            i += 1
        if i == n:
            return self._apply(0, f, g)
        key = (_TAG_ANDEX, f, g, tok, i)
        cached = self._cache_enabled
        if cached:
            r = self._cache.get(key)
            if r is not None:
                return r
        if fv == v:
            _, flo, fhi = nodes[f]
        else:
            flo = fhi = f
        if gv == v:
            _, glo, ghi = nodes[g]
        else:
            glo = ghi = g
        if vars[i] == v:
            a = self._and_ex(flo, glo, vars, i + 1, tok)
            if a == 1:
                r = 1
            else:
                b = self._and_ex(fhi, ghi, vars, i + 1, tok)
                r = self._apply(1, a, b)
        else:
            r = self._make(v,
                           self._and_ex(flo, glo, vars, i, tok),
                           self._and_ex(fhi, ghi, vars, i, tok))
        if cached:
            self._cache[key] = r
        return r

    # ------------------------------------------------------------------
    # renaming

    def _map_token(self, items):
        tok = self._map_tokens.get(items)
        if tok is None:
            tok = len(self._map_tokens)
            self._map_tokens[items] = tok
        return tok

    def rename(self, f, var_map):
        """Substitute variables per an injective map (simultaneously)."""
        self._check_owned(f)
        items = tuple(sorted(var_map.items()))
        targets = [t for _, t in items]
        if len(set(targets)) != len(targets):
            raise BddError("rename map is not injective")
        for s, t in items:
            self._check_var(s)
            self._check_var(t)
        self._entry()
        # fast structural relabel is sound iff the map, extended with the
        # identity on unmapped variables, preserves the level order
        ext = list(range(self.var_count))
        for s, t in items:
            ext[s] = t
        monotone = all(ext[i] < ext[i + 1] for i in range(len(ext) - 1))
        tok = self._map_token(items)
        return Bdd(self, self._rename(f.ref, dict(items), tok, monotone))

    def _rename(self, f, m, tok, monotone):
        if f <= 1:
            return f
        key = (_TAG_RENAME, f, tok)
        cached = self._cache_enabled
        if cached:
            r = self._cache.get(key)
            if r is not None:
                return r
        v, lo, hi = self._nodes[f]
        nv = m.get(v, v)
        a = self._rename(lo, m, tok, monotone)
        b = self._rename(hi, m, tok, monotone)
        if monotone:
            r = self._make(nv, a, b)
        else:
            r = self._ite(self._make(nv, FALSE, TRUE), b, a)
        if cached:
            self._cache[key] = r
        return r

    def import_function(self, f, var_map):
        """Copy a function from another manager, relabeling per var_map.

        var_map must cover the whole support of f.
        """
        if not isinstance(f, Bdd):
            raise BddError("import_function expects a Bdd")
        src = f.mgr
        if src is self:
            return self.rename(f, var_map)
        self._entry()
        items = sorted(var_map.items())
        for _, t in items:
            self._check_var(t)
        monotone = all(items[i][1] < items[i + 1][1]
                       for i in range(len(items) - 1))
        memo = {0: 0, 1: 1}
        src_nodes = src._nodes

        def rec(r):
            got = memo.get(r)
            if got is not None:
                return got
            v, lo, hi = src_nodes[r]
            try:
                nv = var_map[v]
            except KeyError:
                raise BddError(f"variable {v} of source not in import map") from None
            a = rec(lo)
            b = rec(hi)
            if monotone:
                res = self._make(nv, a, b)
            else:
                res = self._ite(self._make(nv, FALSE, TRUE), b, a)
            memo[r] = res
            return res

        return Bdd(self, rec(f.ref))

    # ------------------------------------------------------------------
    # evaluation, restriction, counting

    def restrict(self, f, assignment):
        """Cofactor by a partial assignment {var: bit}."""
        self._check_owned(f)
        for v in assignment:
            self._check_var(v)
        memo = {}
        nodes = self._nodes

        def rec(r):
            if r <= 1:
                return r
            got = memo.get(r)
            if got is not None:
                return got
            v, lo, hi = nodes[r]
            bit = assignment.get(v)
            if bit is None:
                res = self._make(v, rec(lo), rec(hi))
            else:
                res = rec(hi if bit else lo)
            memo[r] = res
            return res

        return Bdd(self, rec(f.ref))

    def evaluate(self, f, assignment):
        """Evaluate under a total assignment of f's support; returns bool."""
        self._check_owned(f)
        r = f.ref
        nodes = self._nodes
        while r > 1:
            v, lo, hi = nodes[r]
            try:
                bit = assignment[v]
            except KeyError:
                raise BddError(f"assignment misses variable {v}") from None
            r = hi if bit else lo
        return r == TRUE

    def support(self, f):
        """Set of variables the function actually depends on."""
        self._check_owned(f)
        seen = set()
        vars = set()
        stack = [f.ref]
        nodes = self._nodes
        while stack:
            r = stack.pop()
            if r <= 1 or r in seen:
                continue
            seen.add(r)
            v, lo, hi = nodes[r]
            vars.add(v)
            stack.append(lo)
            stack.append(hi)
        return vars

    def sat_count(self, f, support):
        """Number of assignments of `support` satisfying f (exact int)."""
        self._check_owned(f)
        sup = self._norm_vars(support)
        need = self.support(f)
        if not need.issubset(sup):
            missing = sorted(need.difference(sup))
            raise BddError(f"support too small, missing variables {missing}")
        pos = {v: i for i, v in enumerate(sup)}
        n = len(sup)
        nodes = self._nodes
        memo = {}

        def count_from(r, i):
            if r == 1:
                return 1 << (n - i)
            if r == 0:
                return 0
            j = pos[nodes[r][0]]
            c = memo.get(r)
            if c is None:
                _, lo, hi = nodes[r]
                c = count_from(lo, j + 1) + count_from(hi, j + 1)
                memo[r] = c
            return c << (j - i)

        return count_from(f.ref, 0)

    def cubes(self, f, support):
        """Yield satisfying assignments as bit tuples aligned with `support`
        (sorted ascending), in lexicographic order with support[0] as the
        most significant position."""
        self._check_owned(f)
        sup = self._norm_vars(support)
        need = self.support(f)
        if not need.issubset(sup):
            missing = sorted(need.difference(sup))
            raise BddError(f"support too small, missing variables {missing}")
        n = len(sup)
        nodes = self._nodes

        def walk(r, i, acc):
            if r == 0:
                return
            if i == n:
                if r == 1:
                    yield tuple(acc)
                return
            v = sup[i]
            rv = nodes[r][0] if r > 1 else _LEVEL_INF
            if rv > v:
                for bit in (0, 1):
                    acc.append(bit)
                    yield from walk(r, i + 1, acc)
                    acc.pop()
            else:
                _, lo, hi = nodes[r]
                acc.append(0)
                yield from walk(lo, i + 1, acc)
                acc.pop()
                acc.append(1)
                yield from walk(hi, i + 1, acc)
                acc.pop()

        yield from walk(f.ref, 0, [])

    # ------------------------------------------------------------------
    # constructors

    def cube(self, assignment):
        """Conjunction of literals from {var: bit}."""
        self._entry()
        r = TRUE
        for v in sorted(assignment, reverse=True):
            self._check_var(v)
            if assignment[v]:
                r = self._make(v, FALSE, r)
            else:
                r = self._make(v, r, FALSE)
        return Bdd(self, r)

    def from_minterms(self, support, codes):
        """Build the set of full assignments of `support` given as integer
        codes, with support[0] the most significant code bit."""
        sup = self._norm_vars(support)
        if len(sup) != len(tuple(support)):
            raise BddError("duplicate variables in support")
        n = len(sup)
        codes = sorted(set(codes))
        if codes and (codes[0] < 0 or codes[-1] >= (1 << n)):
            raise BddError("minterm code out of range for support width")
        self._entry()

        def build(lo, hi, d):
            if lo == hi:
                return FALSE
            if d == n:
                return TRUE
            k = n - 1 - d
            prefix = codes[lo] >> (k + 1) << (k + 1)
            mid = bisect.bisect_left(codes, prefix | (1 << k), lo, hi)
            return self._make(sup[d], build(lo, mid, d + 1), build(mid, hi, d + 1))

        return Bdd(self, build(0, len(codes), 0))

    def equal_blocks(self, avars, bvars):
        """Conjunction of biconditionals a_j <-> b_j over two variable lists."""
        if len(avars) != len(bvars):
            raise BddError("equal_blocks requires blocks of equal width")
        self._entry()
        pairs = sorted(zip(avars, bvars), key=lambda p: min(p), reverse=True)
        r = TRUE
        for a, b in pairs:
            self._check_var(a)
            self._check_var(b)
            if a == b:
                continue
            if a > b:
                a, b = b, a
            nb = self._make(b, TRUE, FALSE)
            pb = self._make(b, FALSE, TRUE)
            x = self._make(a, nb, pb)
            r = self._apply(0, x, r)
        return Bdd(self, r)


class Bdd:
    """Handle to a function in a manager.  Pins its root while alive."""

    __slots__ = ("mgr", "ref", "__weakref__")

    def __init__(self, mgr, ref):
        self.mgr = mgr
        self.ref = ref
        mgr._pin(ref)

    def __del__(self):
        try:
            self.mgr._unpin(self.ref)
        except Exception:
            pass

    # equality is functional equality thanks to canonicity
    def __eq__(self, other):
        return (isinstance(other, Bdd) and other.mgr is self.mgr
                and other.ref == self.ref)

    def __hash__(self):
        return hash((id(self.mgr), self.ref))

    def __repr__(self):
        return f"<Bdd ref={self.ref}>"

    @property
    def is_false(self):
        return self.ref == FALSE

    @property
    def is_true(self):
        return self.ref == TRUE

    def __bool__(self):
        # truthiness is "not the empty set", handy for fixed-point loops
        return self.ref != FALSE

    def __and__(self, other):
        return self.mgr.apply("and", self, other)

    def __or__(self, other):
        return self.mgr.apply("or", self, other)

    def __xor__(self, other):
        return self.mgr.apply("xor", self, other)

    def __invert__(self):
        return self.mgr.negate(self)

    def exists(self, vars):
        return self.mgr.quantify("exists", self, vars)

    def forall(self, vars):
        return self.mgr.quantify("forall", self, vars)

    def rename(self, var_map):
        return self.mgr.rename(self, var_map)

    def sat_count(self, support):
        return self.mgr.sat_count(self, support)

    def cubes(self, support):
        return self.mgr.cubes(self, support)

    def support(self):
        return self.mgr.support(self)

    def restrict(self, assignment):
        return self.mgr.restrict(self, assignment)

    def evaluate(self, assignment):
        return self.mgr.evaluate(self, assignment)
