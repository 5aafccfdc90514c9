"""Analysis helpers: relation export, file metadata dumps, coverage maps,
and an interactive state/input probe.

Export dialect: the text ("fsm") format declares each dimension as a
bounded-integer variable, one `var <name> <cardinality>` line per column,
a `---` separator, then one space-separated line per transition.  The CSV
format carries the same columns with a header row.  For expanded models a
state register with no measurement yet prints as -1 in all its columns.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .bddfile import load
from .ncs import NcsModel


def _columns(model):
    """(names, cardinalities) of one transition row."""
    if isinstance(model, NcsModel):
        lay = model.layout
        names, cards = [], []
        for r in range(lay.s):
            for d in range(model.state_grid.dim):
                names.append(f"pre_x{r + 1}_{d}")
                cards.append(model.state_grid.npoints[d])
        for r in range(lay.c):
            for d in range(model.input_grid.dim):
                names.append(f"pre_u{r + 1}_{d}")
                cards.append(model.input_grid.npoints[d])
        for r in range(lay.s):
            names.append(f"pre_dsc{r + 1}")
            cards.append(model.bounds.nsc_max + 1)
        for r in range(lay.c):
            names.append(f"pre_dca{r + 1}")
            cards.append(model.bounds.nca_max + 1)
        for d in range(model.input_grid.dim):
            names.append(f"in_u{d}")
            cards.append(model.input_grid.npoints[d])
        post_names = [n.replace("pre_", "post_", 1) for n, _ in
                      zip(names, cards) if n.startswith("pre_")]
        names += post_names
        cards += cards[:len(post_names)]
        return names, cards
    names, cards = [], []
    for d in range(model.pre_set.grid.dim):
        names.append(f"pre_x{d}")
        cards.append(model.pre_set.grid.npoints[d])
    for d in range(model.input_set.grid.dim):
        names.append(f"in_u{d}")
        cards.append(model.input_set.grid.npoints[d])
    for d in range(model.post_set.grid.dim):
        names.append(f"post_x{d}")
        cards.append(model.post_set.grid.npoints[d])
    return names, cards


def _flatten_expanded(decoded, model):
    xs, us, dsc, dca = decoded
    row = []
    for x in xs:
        row.extend([-1] * model.state_grid.dim if x is None else list(x))
    for u in us:
        row.extend(u)
    row.extend(dsc)
    row.extend(dca)
    return row


def transition_rows(model):
    """All transitions as integer rows, lexicographically sorted."""
    rows = []
    if isinstance(model, NcsModel):
        sup = model.all_vars
        for bits in model.mgr.cubes(model.trans, sup):
            a = dict(zip(sup, bits))
            row = _flatten_expanded(model.decode_state(a, "pre"), model)
            row += list(model.decode_label(a))
            row += _flatten_expanded(model.decode_state(a, "post"), model)
            rows.append(tuple(row))
    else:
        for pre, u, post in model.transitions():
            rows.append(tuple(list(pre) + list(u) + list(post)))
    return sorted(rows)


def write_fsm(model, path, fmt="csv"):
    """bdd2fsm: dump the transition relation for graph tooling."""
    names, cards = _columns(model)
    rows = transition_rows(model)
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            w.writerows(rows)
    elif fmt == "fsm":
        with open(path, "w") as fh:
            for n, c in zip(names, cards):
                fh.write(f"var {n} {c}\n")
            fh.write("---\n")
            for row in rows:
                fh.write(" ".join(str(v) for v in row) + "\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return len(rows)


def read_fsm_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [tuple(int(v) for v in row) for row in reader]
    return header, rows


def read_fsm(path):
    header, rows = [], []
    with open(path) as fh:
        body = False
        for line in fh:
            line = line.strip()
            if line == "---":
                body = True
                continue
            if not body:
                _, name, card = line.split()
                header.append((name, int(card)))
            elif line:
                rows.append(tuple(int(v) for v in line.split()))
    return header, rows


def bdd_dump(path):
    """bddDump: human-readable report of a BDD file's metadata."""
    f, meta = load(path)
    mgr = f.mgr
    lines = [f"file: {path}"]
    lines.append(f"kind: {meta.get('kind', 'unknown')}")
    if "name" in meta:
        lines.append(f"name: {meta['name']}")
    if "tau" in meta:
        lines.append(f"sampling period: {meta['tau']}")
    for key in ("state_grid", "input_grid"):
        if key in meta:
            g = meta[key]
            lines.append(f"{key}: lb={g['lb']} ub={g['ub']} eta={g['eta']}")
    if "delays" in meta:
        d = meta["delays"]
        lines.append(f"delays: sc [{d['nsc_min']};{d['nsc_max']}] "
                     f"ca [{d['nca_min']};{d['nca_max']}]")
    lines.append(f"declared variables: {mgr.var_count}")
    lines.append(f"nodes: {mgr.node_count()}")
    support = sorted(f.support())
    lines.append(f"support: {len(support)} variables")
    if support:
        lines.append(f"satisfying assignments over support: "
                     f"{f.sat_count(support)}")
    roles = meta.get("var_roles")
    if roles:
        lines.append("variable roles:")
        for r in roles:
            desc = " ".join(f"{k}={r[k]}" for k in sorted(r) if k != "var")
            lines.append(f"  var {r['var']}: {desc}")
    return "\n".join(lines)


def cont_coverage(controller, model, dims=(0, 1)):
    """contCoverage: ASCII map of the controller domain over two state
    dimensions ('#': covered, '.': not); remaining variables are
    existentially projected.  For expanded models the newest state
    register is shown."""
    grid = (model.state_grid if isinstance(model, NcsModel)
            else model.pre_set.grid)
    if grid.dim < 2:
        raise ValueError("coverage maps need at least two state dimensions")
    a, b = dims
    if not (0 <= a < grid.dim and 0 <= b < grid.dim and a != b):
        raise ValueError(f"bad dimension pair {dims} for a {grid.dim}-D grid")
    if isinstance(model, NcsModel):
        fields = model.layout.state_field_ids(0, "pre")
    else:
        fields = model.pre_set.var_ids
    keep = set(fields[a]) | set(fields[b])
    domain = controller.domain
    others = [v for v in domain.support() if v not in keep]
    proj = domain.exists(others) if others else domain
    lines = []
    for j in range(grid.npoints[b] - 1, -1, -1):
        row = []
        for i in range(grid.npoints[a]):
            assignment = {}
            for bit, v in enumerate(fields[a]):
                assignment[v] = (i >> bit) & 1
            for bit, v in enumerate(fields[b]):
                assignment[v] = (j >> bit) & 1
            row.append("#" if proj.restrict(assignment).is_true else ".")
        lines.append("".join(row))
    return "\n".join(lines)


def explore_model(model, state, input_sequence):
    """sysExplorer core: post-state sets after each input of the sequence.

    For plant models `state` is the index vector; for expanded models it
    is the flattened register vector (-1 marks a register without a
    measurement).  Returns a list of sets of state tuples, one per input.
    """
    mgr = model.mgr
    if isinstance(model, NcsModel):
        cur = mgr.cube(_expanded_assignment(model, state))
        input_dim = model.input_grid.dim
    else:
        assignment = {}
        for ids, i in zip(model.pre_set.var_ids, state):
            for bit, v in enumerate(ids):
                assignment[v] = (i >> bit) & 1
        cur = mgr.cube(assignment)
        input_dim = model.input_set.grid.dim
    if len(input_sequence) % input_dim:
        raise ValueError(f"input sequence length must be a multiple of "
                         f"{input_dim}")
    steps = [tuple(input_sequence[i:i + input_dim])
             for i in range(0, len(input_sequence), input_dim)]

    quant = tuple(sorted(model.pre_vars + model.input_vars))
    back = {b: a for a, b in model.pre_to_post.items()}
    out = []
    for u in steps:
        ucube = mgr.cube(_input_assignment(model, u))
        img = mgr.exist_and(model.trans & ucube, cur, quant).rename(back)
        cells = _decode_states(model, img)
        out.append(cells)
        cur = img
    return out


def _input_assignment(model, u):
    if isinstance(model, NcsModel):
        fields = model.layout.label_field_ids()
        npoints = model.input_grid.npoints
    else:
        fields = model.input_set.var_ids
        npoints = model.input_set.grid.npoints
    assignment = {}
    for ids, i, n in zip(fields, u, npoints):
        if not (0 <= i < n):
            raise ValueError(f"input index {i} out of range")
        for bit, v in enumerate(ids):
            assignment[v] = (i >> bit) & 1
    return assignment


def _expanded_assignment(model, flat):
    lay = model.layout
    n, m = model.state_grid.dim, model.input_grid.dim
    need = lay.s * n + lay.c * m + lay.s + lay.c
    if len(flat) != need:
        raise ValueError(f"expanded state needs {need} integers, got {len(flat)}")
    it = iter(flat)
    xs = []
    for _ in range(lay.s):
        v = [next(it) for _ in range(n)]
        xs.append(None if v[0] < 0 else tuple(v))
    us = [tuple(next(it) for _ in range(m)) for _ in range(lay.c)]
    dsc = [next(it) for _ in range(lay.s)]
    dca = [next(it) for _ in range(lay.c)]
    return model.encode_state(tuple(xs), tuple(us), dsc, dca)


def _decode_states(model, chi):
    cells = set()
    for bits in model.mgr.cubes(chi, model.pre_vars):
        a = dict(zip(model.pre_vars, bits))
        if isinstance(model, NcsModel):
            cells.add(tuple(_flatten_expanded(model.decode_state(a, "pre"),
                                              model)))
        else:
            cells.add(model.pre_set.decode_index(a))
    return cells


def explore_controller(controller, model, state):
    """Admissible input index vectors at a state, or None when the state
    is outside the controller domain."""
    if isinstance(model, NcsModel):
        assignment = _expanded_assignment(model, state)
        grid = model.input_grid
    else:
        assignment = {}
        for ids, i in zip(model.pre_set.var_ids, state):
            for bit, v in enumerate(ids):
                assignment[v] = (i >> bit) & 1
        grid = model.input_set.grid
    codes = controller.admissible_inputs(assignment)
    if not codes:
        return None
    out = []
    for code in codes:
        idx = []
        off = 0
        for b in grid.bits:
            idx.append((code >> off) & ((1 << b) - 1))
            off += b
        out.append(tuple(idx))
    return out


def explorer_repl(model, controller=None, stdin=None, stdout=None):
    """Line-oriented interactive probe: one query per line, `quit` exits.

    Model queries: `<state fields> [input fields]...` echoes the state
    when no inputs follow, otherwise prints the post-state set after each
    input.  With a controller loaded, `? <state fields>` prints the
    admissible inputs.
    """
    import sys
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    input_dim = (model.input_grid.dim if isinstance(model, NcsModel)
                 else model.input_set.grid.dim)
    if isinstance(model, NcsModel):
        lay = model.layout
        state_len = (lay.s * model.state_grid.dim + lay.c * input_dim
                     + lay.s + lay.c)
    else:
        state_len = model.pre_set.grid.dim
    print("one query per line; 'quit' to exit", file=stdout)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        if line in ("quit", "exit", "q"):
            break
        try:
            if line.startswith("?"):
                if controller is None:
                    print("no controller loaded", file=stdout)
                    continue
                state = [int(t) for t in line[1:].split()]
                inputs = explore_controller(controller, model, state)
                if inputs is None:
                    print("no input", file=stdout)
                else:
                    print("inputs: " + " ".join(str(i) for i in inputs),
                          file=stdout)
                continue
            tokens = [int(t) for t in line.split()]
            state, rest = tokens[:state_len], tokens[state_len:]
            if len(state) < state_len:
                print(f"error: state needs {state_len} integers", file=stdout)
                continue
            if not rest:
                print(f"state: {tuple(state)}", file=stdout)
                continue
            for k, cells in enumerate(explore_model(model, state, rest)):
                shown = " ".join(str(c) for c in sorted(cells)) or "(blocked)"
                print(f"after input {k + 1}: {shown}", file=stdout)
        except (ValueError, KeyError) as exc:
            print(f"error: {exc}", file=stdout)
