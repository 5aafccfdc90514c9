"""Turn synthesized controllers into C and Verilog implementations.

The controller relation is first restricted to one input per state (the
smallest packed binary input code, a reproducible stand-in for "first
available"), then split into one boolean function per input bit.  Each
function is emitted following the decision-diagram structure: one small
conditional per node, shared subgraphs shared by reference, so the text
size is linear in the diagram.  Outputs outside the controller domain are
don't-cares; a domain membership predicate is always emitted alongside.
"""

from __future__ import annotations

from .synthesis import Controller, Mode


class CodegenError(Exception):
    pass


def _determinize_relation(mgr, rel, input_vars):
    # resolve choice bit by bit from the most significant input bit:
    # a state keeps the 0-branch whenever any retained input has that bit 0
    for j in range(len(input_vars) - 1, -1, -1):
        v = mgr.var(input_vars[j])
        with0 = rel & ~v
        some0 = with0.exists(input_vars)
        rel = with0 | (rel & v & ~some0)
    return rel


def determinize(controller):
    """Restrict every mode to the minimum-code input per domain state."""
    mgr = controller.mgr
    rel = _determinize_relation(mgr, controller.relation, controller.input_vars)
    modes = None
    if controller.modes is not None:
        modes = [Mode(relation=_determinize_relation(mgr, m.relation,
                                                     controller.input_vars),
                      goal=m.goal, next_mode=m.next_mode)
                 for m in controller.modes]
    return Controller(relation=rel, pre_vars=controller.pre_vars,
                      input_vars=controller.input_vars, modes=modes,
                      stats=dict(controller.stats), model=controller.model)


def is_deterministic_relation(mgr, rel, pre_vars, input_vars):
    support = tuple(sorted(set(pre_vars) | set(input_vars)))
    total = mgr.sat_count(rel, support)
    dom = rel.exists(input_vars)
    return total == mgr.sat_count(dom, pre_vars)


def decompose_outputs(mgr, rel, pre_vars, input_vars):
    """One boolean function per input bit of a deterministic relation."""
    if not is_deterministic_relation(mgr, rel, pre_vars, input_vars):
        raise CodegenError("relation is not deterministic; determinize first")
    return [mgr.exist_and(rel, mgr.var(w), input_vars) for w in input_vars]


def _node_order(mgr, roots):
    """Children-first ordering of all internal nodes under the roots."""
    order = []
    seen = {0, 1}
    for root in roots:
        stack = [(root.ref, False)]
        while stack:
            ref, done = stack.pop()
            if ref in seen:
                continue
            _, lo, hi = mgr._nodes[ref]
            if done:
                seen.add(ref)
                order.append(ref)
            else:
                stack.append((ref, True))
                stack.append((hi, False))
                stack.append((lo, False))
    return order


def _state_bit_positions(mgr, roots, pre_vars):
    pos = {v: i for i, v in enumerate(pre_vars)}
    for root in roots:
        for v in mgr.support(root):
            if v not in pos:
                raise CodegenError(f"function depends on variable {v}, which "
                                   f"is not a state variable")
    return pos


def emit_c(name, bit_funcs, domain, pre_vars, meta=None):
    """C sources for the bit functions, a collector, and the domain
    predicate.  The state is passed as a packed uint64_t whose bit i is
    state variable pre_vars[i]; the collector returns the packed input
    code.  Returns (header text, source text)."""
    if len(pre_vars) > 64:
        raise CodegenError(f"state needs {len(pre_vars)} bits; the fixed "
                           f"width API supports at most 64")
    mgr = domain.mgr
    roots = list(bit_funcs) + [domain]
    pos = _state_bit_positions(mgr, roots, pre_vars)
    order = _node_order(mgr, roots)
    nid = {ref: i for i, ref in enumerate(order)}

    def ref_expr(ref):
        if ref == 0:
            return "false"
        if ref == 1:
            return "true"
        return f"n{nid[ref]}(s)"

    lines = []
    lines.append(f'#include "{name}.h"')
    lines.append("")
    for ref in order:
        var, lo, hi = mgr._nodes[ref]
        lines.append(f"static bool n{nid[ref]}(uint64_t s) {{")
        lines.append(f"    return (s >> {pos[var]} & 1u) ? "
                     f"{ref_expr(hi)} : {ref_expr(lo)};")
        lines.append("}")
    lines.append("")
    for j, f in enumerate(bit_funcs):
        lines.append(f"bool {name}_out_b{j}(uint64_t s) {{")
        lines.append(f"    return {ref_expr(f.ref)};")
        lines.append("}")
    lines.append("")
    lines.append(f"bool {name}_domain(uint64_t s) {{")
    lines.append(f"    return {ref_expr(domain.ref)};")
    lines.append("}")
    lines.append("")
    lines.append(f"uint64_t {name}_control(uint64_t s) {{")
    lines.append("    uint64_t u = 0;")
    for j in range(len(bit_funcs)):
        lines.append(f"    if ({name}_out_b{j}(s)) u |= UINT64_C(1) << {j};")
    lines.append("    return u;")
    lines.append("}")
    source = "\n".join(lines) + "\n"

    hl = []
    guard = f"{name.upper()}_H"
    hl.append(f"#ifndef {guard}")
    hl.append(f"#define {guard}")
    hl.append("")
    hl.append("#include <stdbool.h>")
    hl.append("#include <stdint.h>")
    hl.append("")
    hl.append(f"/* state: {len(pre_vars)} packed bits; input: "
              f"{len(bit_funcs)} packed bits */")
    for line in _layout_comment(meta):
        hl.append(f"/* {line} */")
    hl.append("")
    for j in range(len(bit_funcs)):
        hl.append(f"bool {name}_out_b{j}(uint64_t state);")
    hl.append(f"bool {name}_domain(uint64_t state);")
    hl.append(f"uint64_t {name}_control(uint64_t state);")
    hl.append("")
    hl.append(f"#endif /* {guard} */")
    header = "\n".join(hl) + "\n"
    return header, source


def emit_verilog(name, bit_funcs, domain, pre_vars, meta=None):
    """Combinational module: packed state in, packed input plus a domain
    valid flag out; one ternary assign per diagram node."""
    mgr = domain.mgr
    roots = list(bit_funcs) + [domain]
    pos = _state_bit_positions(mgr, roots, pre_vars)
    order = _node_order(mgr, roots)
    nid = {ref: i for i, ref in enumerate(order)}

    def ref_expr(ref):
        if ref == 0:
            return "1'b0"
        if ref == 1:
            return "1'b1"
        return f"n{nid[ref]}"

    sb = max(len(pre_vars), 1)
    ib = max(len(bit_funcs), 1)
    lines = []
    lines.append(f"// generated controller {name}")
    lines.append(f"// state width {len(pre_vars)}, input width {len(bit_funcs)}")
    for line in _layout_comment(meta):
        lines.append(f"// {line}")
    lines.append(f"module {name} (")
    lines.append(f"    input  wire [{sb - 1}:0] state,")
    lines.append(f"    output wire [{ib - 1}:0] u,")
    lines.append("    output wire valid")
    lines.append(");")
    for ref in order:
        var, lo, hi = mgr._nodes[ref]
        lines.append(f"  wire n{nid[ref]};")
        lines.append(f"  assign n{nid[ref]} = state[{pos[var]}] ? "
                     f"{ref_expr(hi)} : {ref_expr(lo)};")
    for j, f in enumerate(bit_funcs):
        lines.append(f"  assign u[{j}] = {ref_expr(f.ref)};")
    if not bit_funcs:
        lines.append("  assign u[0] = 1'b0;")
    lines.append(f"  assign valid = {ref_expr(domain.ref)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _layout_comment(meta):
    if not meta:
        return []
    out = []
    if "tau" in meta:
        out.append(f"sampling period: {meta['tau']}")
    d = meta.get("delays")
    if d:
        out.append(f"channel delays (samples): sensor-to-controller "
                   f"[{d['nsc_min']};{d['nsc_max']}], controller-to-actuator "
                   f"[{d['nca_min']};{d['nca_max']}]")
    return out


def generate(controller, name, meta=None):
    """Emit all artifacts for a controller; one artifact set per mode.

    Returns a list of dicts with keys mode, name, header, source, verilog.
    """
    det = determinize(controller)
    mgr = det.mgr
    relations = ([(i, m.relation) for i, m in enumerate(det.modes)]
                 if det.modes else [(None, det.relation)])
    out = []
    for mode_idx, rel in relations:
        mode_name = name if mode_idx is None else f"{name}_m{mode_idx}"
        bits = decompose_outputs(mgr, rel, det.pre_vars, det.input_vars)
        domain = rel.exists(det.input_vars)
        header, source = emit_c(mode_name, bits, domain, det.pre_vars, meta)
        verilog = emit_verilog(mode_name, bits, domain, det.pre_vars, meta)
        out.append({"mode": mode_idx, "name": mode_name, "header": header,
                    "source": source, "verilog": verilog})
    return out
