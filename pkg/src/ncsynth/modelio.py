"""Persisting models and controllers as BDD files with rich metadata.

Each file stores exactly one function; composite artifacts use sibling
files plus a JSON sidecar.  The metadata block carries everything needed
to reinterpret the variables downstream: grids, sampling period, delay
bounds, and the variable layout, so tools can decode states without the
construction config.
"""

from __future__ import annotations

import json
from pathlib import Path

from .abstraction import TransitionSystem
from .bdd import Manager
from .bddfile import BddFileError, load, save
from .grid import SymbolicSet, UniformGrid
from .ncs import DelayBounds, NcsLayout, NcsModel
from .synthesis import Controller, Mode


def _grid_meta(grid):
    return {"lb": list(grid.lb), "ub": list(grid.ub), "eta": list(grid.eta)}


def _grid_from_meta(m):
    return UniformGrid(lb=tuple(m["lb"]), ub=tuple(m["ub"]), eta=tuple(m["eta"]))


def _var_roles_plant(ts):
    roles = []
    for d, ids in enumerate(ts.input_set.var_ids):
        for b, v in enumerate(ids):
            roles.append({"var": v, "role": "input", "dim": d, "bit": b})
    for d, (pre, post) in enumerate(zip(ts.pre_set.var_ids, ts.post_set.var_ids)):
        for b, (vp, vq) in enumerate(zip(pre, post)):
            roles.append({"var": vp, "role": "pre", "dim": d, "bit": b})
            roles.append({"var": vq, "role": "post", "dim": d, "bit": b})
    return sorted(roles, key=lambda r: r["var"])


def _var_roles_ncs(lay):
    roles = []
    for b, v in enumerate(lay.label):
        roles.append({"var": v, "role": "input", "bit": b})
    for which, regs in (("pre", lay.x_pre), ("post", lay.x_post)):
        for r, block in enumerate(regs):
            for b, v in enumerate(block):
                roles.append({"var": v, "role": which, "block": f"x{r + 1}", "bit": b})
    for which, regs in (("pre", lay.u_pre), ("post", lay.u_post)):
        for r, block in enumerate(regs):
            for b, v in enumerate(block):
                roles.append({"var": v, "role": which, "block": f"u{r + 1}", "bit": b})
    for which, regs in (("pre", lay.dsc_pre), ("post", lay.dsc_post)):
        for r, block in enumerate(regs):
            for b, v in enumerate(block):
                roles.append({"var": v, "role": which, "block": f"dsc{r + 1}", "bit": b})
    for which, regs in (("pre", lay.dca_pre), ("post", lay.dca_post)):
        for r, block in enumerate(regs):
            for b, v in enumerate(block):
                roles.append({"var": v, "role": which, "block": f"dca{r + 1}", "bit": b})
    return sorted(roles, key=lambda r: (r["var"], r["role"]))


def save_plant_model(ts, path):
    meta = {
        "kind": "plant_model",
        "name": ts.name,
        "tau": ts.tau,
        "state_grid": _grid_meta(ts.pre_set.grid),
        "input_grid": _grid_meta(ts.input_set.grid),
        "vars": {
            "input": [list(ids) for ids in ts.input_set.var_ids],
            "pre": [list(ids) for ids in ts.pre_set.var_ids],
            "post": [list(ids) for ids in ts.post_set.var_ids],
        },
        "deterministic": ts.is_deterministic(),
        "initial": "domain",
        "var_roles": _var_roles_plant(ts),
    }
    save(ts.trans, meta, path)
    return meta


def load_plant_model(path):
    trans, meta = load(path)
    if meta.get("kind") != "plant_model":
        raise BddFileError(f"{path}: expected a plant model, found "
                           f"{meta.get('kind')!r}")
    mgr = trans.mgr
    state_grid = _grid_from_meta(meta["state_grid"])
    input_grid = _grid_from_meta(meta["input_grid"])
    pre = SymbolicSet(mgr, state_grid, [tuple(v) for v in meta["vars"]["pre"]])
    pre = pre.with_chi(pre.domain())
    post = SymbolicSet(mgr, state_grid, [tuple(v) for v in meta["vars"]["post"]])
    post = post.with_chi(post.domain())
    inp = SymbolicSet(mgr, input_grid, [tuple(v) for v in meta["vars"]["input"]])
    inp = inp.with_chi(inp.domain())
    ts = TransitionSystem(mgr=mgr, pre_set=pre, input_set=inp, post_set=post,
                          trans=trans, initial=pre.domain(),
                          tau=meta.get("tau", 0.0), name=meta.get("name", "plant"))
    return ts, meta


def _ncs_meta(model):
    b = model.bounds
    return {
        "kind": "ncs_model",
        "name": model.base_name,
        "tau": model.tau,
        "state_grid": _grid_meta(model.state_grid),
        "input_grid": _grid_meta(model.input_grid),
        "delays": {"nsc_min": b.nsc_min, "nsc_max": b.nsc_max,
                   "nca_min": b.nca_min, "nca_max": b.nca_max},
        "var_base": model.layout.label[0] if model.layout.label else 0,
        "base_deterministic": model.base_deterministic,
        "marker_code": model.layout.marker_code,
        "var_roles": _var_roles_ncs(model.layout),
    }


def _init_path(path):
    p = Path(path)
    return p.with_name(p.stem + ".init" + p.suffix)


def save_ncs_model(model, path):
    meta = _ncs_meta(model)
    save(model.trans, meta, path)
    save(model.initial, meta, _init_path(path))
    return meta


def _layout_from_meta(meta):
    bounds = DelayBounds(**meta["delays"])
    state_grid = _grid_from_meta(meta["state_grid"])
    input_grid = _grid_from_meta(meta["input_grid"])
    lay = NcsLayout(bounds, state_grid, input_grid, base=meta.get("var_base", 0))
    return bounds, lay


def load_ncs_model(path):
    trans, meta = load(path)
    if meta.get("kind") != "ncs_model":
        raise BddFileError(f"{path}: expected an expanded model, found "
                           f"{meta.get('kind')!r}")
    initial, meta2 = load(_init_path(path), manager=trans.mgr)
    bounds, lay = _layout_from_meta(meta)
    model = NcsModel(mgr=trans.mgr, layout=lay, bounds=bounds, trans=trans,
                     initial=initial, base_name=meta.get("name", "plant"),
                     tau=meta.get("tau", 0.0),
                     base_deterministic=meta.get("base_deterministic", False))
    return model, meta


def make_shell_ncs_model(meta, mgr=None):
    """Model carcass from controller metadata: layout, grids, and bounds
    for simulation and decoding; the transition relation is not loaded."""
    bounds, lay = _layout_from_meta(meta)
    total = meta.get("var_base", 0) + lay.var_count
    if mgr is None:
        mgr = Manager(var_count=total)
    elif mgr.var_count < total:
        mgr.add_vars(total - mgr.var_count)
    return NcsModel(mgr=mgr, layout=lay, bounds=bounds, trans=mgr.false,
                    initial=mgr.false, base_name=meta.get("name", "plant"),
                    tau=meta.get("tau", 0.0))


def make_shell_plant_model(meta, mgr=None):
    state_grid = _grid_from_meta(meta["state_grid"])
    input_grid = _grid_from_meta(meta["input_grid"])
    total = 1 + max(v for vs in meta["vars"].values() for ids in vs for v in ids)
    if mgr is None:
        mgr = Manager(var_count=total)
    elif mgr.var_count < total:
        mgr.add_vars(total - mgr.var_count)
    pre = SymbolicSet(mgr, state_grid, [tuple(v) for v in meta["vars"]["pre"]])
    pre = pre.with_chi(pre.domain())
    post = SymbolicSet(mgr, state_grid, [tuple(v) for v in meta["vars"]["post"]])
    post = post.with_chi(post.domain())
    inp = SymbolicSet(mgr, input_grid, [tuple(v) for v in meta["vars"]["input"]])
    inp = inp.with_chi(inp.domain())
    return TransitionSystem(mgr=mgr, pre_set=pre, input_set=inp, post_set=post,
                            trans=mgr.false, initial=pre.domain(),
                            tau=meta.get("tau", 0.0),
                            name=meta.get("name", "plant"))


def _modes_path(path):
    p = Path(path)
    return p.with_name(p.stem + ".modes.json")


def save_controller(ctrl, path, extra_meta=None):
    """Relation plus, for mode-switching controllers, one file per mode
    relation and goal and a JSON sidecar listing the automaton."""
    path = Path(path)
    meta = dict(extra_meta or {})
    meta.setdefault("kind", "controller")
    meta["stats"] = {k: v for k, v in ctrl.stats.items()
                     if isinstance(v, (int, float, str, bool))}
    meta["dynamic"] = bool(ctrl.modes)
    save(ctrl.relation, meta, path)
    if not ctrl.modes:
        return meta
    sidecar = {"mode_count": len(ctrl.modes), "modes": []}
    for i, mode in enumerate(ctrl.modes):
        rel_name = path.name if i == 0 else f"{path.stem}.m{i}{path.suffix}"
        goal_name = f"{path.stem}.goal{i}{path.suffix}"
        if i > 0:
            save(mode.relation, meta, path.with_name(rel_name))
        save(mode.goal, meta, path.with_name(goal_name))
        sidecar["modes"].append({"relation": rel_name, "goal": goal_name,
                                 "next": mode.next_mode})
    with open(_modes_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=1)
    return meta


def load_controller(path):
    path = Path(path)
    relation, meta = load(path)
    if meta.get("kind") != "controller":
        raise BddFileError(f"{path}: expected a controller, found "
                           f"{meta.get('kind')!r}")
    mgr = relation.mgr
    if meta.get("model_kind") == "ncs":
        model = make_shell_ncs_model(meta, mgr)
        pre_vars, input_vars = model.pre_vars, model.input_vars
    else:
        model = make_shell_plant_model(meta, mgr)
        pre_vars, input_vars = model.pre_vars, model.input_vars
    modes = None
    sidecar_path = _modes_path(path)
    if meta.get("dynamic") and sidecar_path.exists():
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        modes = []
        for i, entry in enumerate(sidecar["modes"]):
            rel = (relation if i == 0
                   else load(path.with_name(entry["relation"]), manager=mgr)[0])
            goal = load(path.with_name(entry["goal"]), manager=mgr)[0]
            modes.append(Mode(relation=rel, goal=goal, next_mode=entry["next"]))
    ctrl = Controller(relation=relation, pre_vars=tuple(sorted(pre_vars)),
                      input_vars=tuple(input_vars), modes=modes,
                      stats=dict(meta.get("stats", {})), model=model)
    return ctrl, meta
