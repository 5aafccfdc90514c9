"""Command-line pipeline: plant model -> expanded model -> controller ->
simulation -> implementation code, plus the inspection helpers.

Every stage reads and writes BDD files in the working directory given by
--out, records a manifest (inputs, hashes, sizes, timings), and can be
run independently or chained.  Exit codes: 0 ok, 2 configuration or usage
error, 3 the synthesized controller is empty, 4 the simulation left the
controller domain.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import codegen as codegen_mod
from . import inspect_tools
from .abstraction import build_abstraction, remove_region
from .bdd import Manager
from .bddfile import BddFileError
from .config import ConfigError, RunConfig
from .grid import SymbolicSet, UniformGrid
from .modelio import (load_controller, load_ncs_model, load_plant_model,
                      save_controller, save_ncs_model, save_plant_model)
from .ncs import DelayBounds, expand, expand_spec_set, reachable
from .plants import make_plant
from .simulate import ClosedLoop, DomainViolation, export_trace
from .synthesis import (solve_gen_buchi, solve_persistence, solve_reach,
                        solve_recurrence, solve_safety)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EMPTY_CONTROLLER = 3
EXIT_DOMAIN_VIOLATION = 4


class UsageError(Exception):
    pass


class EmptyController(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, stage, cfg, inputs, outputs, sizes, t0):
    manifest = {
        "stage": stage,
        "config_sha256": cfg.sha256() if cfg else None,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "sizes": sizes,
        "seconds": round(time.monotonic() - t0, 3),
    }
    path = Path(out_dir) / f"{stage}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def _grid(gc):
    return UniformGrid(lb=gc.lb, ub=gc.ub, eta=gc.eta)


def _plant(cfg):
    plant = make_plant(cfg.plant.name, tau=cfg.plant.tau,
                       params=cfg.plant.params)
    return plant


def _boxes_set(base_set, boxes):
    s = base_set.empty()
    for lo, hi in boxes:
        s = s.add_box(lo, hi)
    return s


# ----------------------------------------------------------------------
# stages


def cmd_abstract(cfg, out_dir):
    t0 = time.monotonic()
    plant = _plant(cfg)
    ts = build_abstraction(plant, _grid(cfg.plant.grid),
                           _grid(cfg.plant.input_grid))
    if cfg.spec.obstacles:
        region = _boxes_set(ts.pre_set, cfg.spec.obstacles)
        ts = remove_region(ts, region)
    path = Path(out_dir) / "plant.bdd"
    save_plant_model(ts, path)
    sizes = {
        "n_states": ts.n_states(),
        "n_transitions": ts.n_transitions(),
        "deterministic": ts.is_deterministic(),
        "state_bits": sum(ts.pre_set.grid.bits),
        "input_bits": sum(ts.input_set.grid.bits),
    }
    _write_manifest(out_dir, "abstract", cfg, [], [path], sizes, t0)
    print(f"plant model: {sizes['n_transitions']} transitions over "
          f"{sizes['n_states']} cells "
          f"({'deterministic' if sizes['deterministic'] else 'nondeterministic'})")
    return path


def cmd_expand(cfg, out_dir):
    t0 = time.monotonic()
    plant_path = Path(out_dir) / "plant.bdd"
    if not plant_path.exists():
        raise UsageError(f"{plant_path} not found; run the abstract stage first")
    base, _ = load_plant_model(plant_path)
    d = cfg.delays
    model = expand(base, DelayBounds(d.nsc_min, d.nsc_max, d.nca_min, d.nca_max))
    path = Path(out_dir) / "ncs.bdd"
    save_ncs_model(model, path)
    sizes = {
        "n_states_formula": model.state_count(),
        "n_states_symbolic": model.n_states_symbolic(),
        "n_transitions": model.n_transitions(),
        "n_initial": model.n_initial(),
        "prolonged": model.bounds.prolonged,
    }
    if cfg.report_reachable:
        r = reachable(model)
        sizes["n_reachable"] = model.mgr.sat_count(r, model.pre_vars)
        sizes["n_transitions_from_reachable"] = model.mgr.sat_count(
            model.trans & r, model.all_vars)
    init_path = Path(out_dir) / "ncs.init.bdd"
    _write_manifest(out_dir, "expand", cfg, [plant_path], [path, init_path],
                    sizes, t0)
    print(f"expanded model: {sizes['n_states_symbolic']} states, "
          f"{sizes['n_transitions']} transitions")
    return path


def _spec_sets(cfg, base, model):
    """Lift configured boxes to predicates over the expanded state set."""
    targets = [expand_spec_set(_boxes_set(base.pre_set, [box]), model)
               for box in cfg.spec.targets]
    safe = None
    if cfg.spec.safe:
        safe = expand_spec_set(_boxes_set(base.pre_set, cfg.spec.safe), model)
    if cfg.spec.obstacles:
        blocked = expand_spec_set(_boxes_set(base.pre_set, cfg.spec.obstacles),
                                  model)
        allowed = model.state_domain & ~blocked
        safe = allowed if safe is None else (safe & allowed)
    return targets, safe


def cmd_synth(cfg, out_dir):
    t0 = time.monotonic()
    ncs_path = Path(out_dir) / "ncs.bdd"
    plant_path = Path(out_dir) / "plant.bdd"
    for p in (ncs_path, plant_path):
        if not p.exists():
            raise UsageError(f"{p} not found; run earlier stages first")
    model, model_meta = load_ncs_model(ncs_path)
    base, _ = load_plant_model(plant_path)
    # spec boxes live on the plant grid; rebuild them against the plant
    # file's variable numbering, then lift into the expanded space
    targets, safe = _spec_sets(cfg, base, model)

    kind = cfg.spec.kind
    if kind == "safety":
        ctrl = solve_safety(model, safe)
    elif kind == "reach":
        target = model.mgr.false
        for t in targets:
            target = target | t
        if safe is not None:
            target = target & safe
        ctrl = solve_reach(model, target)
    elif kind == "persistence":
        ctrl = solve_persistence(model, safe)
    elif kind == "recurrence":
        target = model.mgr.false
        for t in targets:
            target = target | t
        ctrl = solve_recurrence(model, target)
    else:
        ctrl = solve_gen_buchi(model, targets, safe=safe)

    sizes = {
        "kind": kind,
        "iterations": ctrl.stats.get("iterations"),
        "modes": len(ctrl.modes) if ctrl.modes else 0,
        "empty": ctrl.is_empty,
        "domain_size": model.mgr.sat_count(ctrl.domain, model.pre_vars),
    }
    if ctrl.is_empty:
        _write_manifest(out_dir, "synth", cfg, [ncs_path], [], sizes, t0)
        raise EmptyController(f"{kind} specification is not enforceable on "
                              f"this model (empty controller)")
    path = Path(out_dir) / "controller.bdd"
    extra = {
        "kind": "controller",
        "model_kind": "ncs",
        "spec_kind": kind,
        "name": cfg.codegen.name,
        "tau": model.tau,
        "state_grid": model_meta["state_grid"],
        "input_grid": model_meta["input_grid"],
        "delays": model_meta["delays"],
        "var_base": model_meta.get("var_base", 0),
    }
    save_controller(ctrl, path, extra)
    outputs = [path]
    if ctrl.modes:
        outputs += [Path(out_dir) / f"controller.goal{i}.bdd"
                    for i in range(len(ctrl.modes))]
        outputs += [Path(out_dir) / f"controller.m{i}.bdd"
                    for i in range(1, len(ctrl.modes))]
        outputs.append(Path(out_dir) / "controller.modes.json")
    _write_manifest(out_dir, "synth", cfg, [ncs_path], outputs, sizes, t0)
    print(f"controller: kind={kind} domain={sizes['domain_size']} "
          f"modes={sizes['modes']} iterations={sizes['iterations']}")
    return path


def cmd_sim(cfg, out_dir, unsafe=False, seed=None):
    t0 = time.monotonic()
    ctrl_path = Path(out_dir) / "controller.bdd"
    if not ctrl_path.exists():
        raise UsageError(f"{ctrl_path} not found; run the synth stage first")
    ctrl, meta = load_controller(ctrl_path)
    plant = _plant(cfg)
    if not cfg.sim.x0:
        raise UsageError("sim.x0 is required for simulation")
    if cfg.sim.channel_mode == "random" and not unsafe:
        raise UsageError(
            "random-delay channels void the prolonged-delay refinement "
            "guarantee; pass --unsafe to simulate anyway")
    loop = ClosedLoop(plant, ctrl, x0=cfg.sim.x0, u0=cfg.sim.u0,
                      seed=cfg.sim.seed if seed is None else seed,
                      channel_mode=cfg.sim.channel_mode, unsafe=unsafe)
    trace = loop.run(cfg.sim.steps)
    csv_path = Path(out_dir) / "trace.csv"
    json_path = Path(out_dir) / "trace.json"
    export_trace(trace, csv_path)
    export_trace(trace, json_path)
    sizes = {"steps": len(trace.records),
             "final_state": list(trace.records[-1].x) if trace.records else None,
             "modes_visited": sorted({r.mode for r in trace.records})}
    _write_manifest(out_dir, "sim", cfg, [ctrl_path], [csv_path, json_path],
                    sizes, t0)
    print(f"simulated {sizes['steps']} steps; trace written to {csv_path}")
    return csv_path


def cmd_codegen(cfg, out_dir):
    t0 = time.monotonic()
    ctrl_path = Path(out_dir) / "controller.bdd"
    if not ctrl_path.exists():
        raise UsageError(f"{ctrl_path} not found; run the synth stage first")
    ctrl, meta = load_controller(ctrl_path)
    delays = meta.get("delays")
    if delays and (delays["nsc_min"] != delays["nsc_max"]
                   or delays["nca_min"] != delays["nca_max"]):
        raise UsageError(
            "controller was synthesized for time-varying delays; code is "
            "only emitted for prolonged-delay models (equal lower and upper "
            "delay bounds per channel), where buffering makes the closed "
            "loop refine the symbolic guarantee")
    arts = codegen_mod.generate(ctrl, cfg.codegen.name, meta)
    outputs = []
    for art in arts:
        base = Path(out_dir) / art["name"]
        if "c" in cfg.codegen.targets:
            hp = base.with_suffix(".h")
            cp = base.with_suffix(".c")
            hp.write_text(art["header"])
            cp.write_text(art["source"])
            outputs += [hp, cp]
        if "verilog" in cfg.codegen.targets:
            vp = base.with_suffix(".v")
            vp.write_text(art["verilog"])
            outputs.append(vp)
    sizes = {"artifacts": [a["name"] for a in arts],
             "targets": list(cfg.codegen.targets)}
    _write_manifest(out_dir, "codegen", cfg, [ctrl_path], outputs, sizes, t0)
    print(f"emitted {', '.join(sizes['artifacts'])} "
          f"({', '.join(sizes['targets'])})")
    return outputs


def _load_any_model(path):
    from .bddfile import load
    _, meta = load(path)
    kind = meta.get("kind")
    if kind == "plant_model":
        return load_plant_model(path)
    if kind == "ncs_model":
        return load_ncs_model(path)
    raise UsageError(f"{path}: not a model file (kind={kind!r})")


def cmd_fsm(path, out_path, fmt):
    model, _ = _load_any_model(path)
    n = inspect_tools.write_fsm(model, out_path, fmt=fmt)
    print(f"wrote {n} transitions to {out_path}")


def cmd_dump(path):
    print(inspect_tools.bdd_dump(path))


def cmd_coverage(path, dims):
    ctrl, meta = load_controller(path)
    print(inspect_tools.cont_coverage(ctrl, ctrl.model, dims=dims))


def cmd_explore(path, controller_path=None):
    model, _ = _load_any_model(path)
    ctrl = None
    if controller_path:
        ctrl, _ = load_controller(controller_path)
    inspect_tools.explorer_repl(model, ctrl)


# ----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="ncsynth",
        description="symbolic models and controller synthesis for networked "
                    "control systems")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, help_):
        c = sub.add_parser(name, help=help_)
        c.add_argument("--config", required=True, help="run configuration (JSON)")
        c.add_argument("--out", default="out", help="working directory")
        return c

    add_config_cmd("abstract", "build the plant's symbolic model")
    add_config_cmd("expand", "lift the plant model over delayed channels")
    add_config_cmd("synth", "synthesize a controller for the configured spec")
    c = add_config_cmd("sim", "simulate the closed loop")
    c.add_argument("--seed", type=int, default=None, help="override sim.seed")
    c.add_argument("--unsafe", action="store_true",
                   help="allow random-delay channels (no refinement guarantee)")
    add_config_cmd("codegen", "emit C and Verilog implementations")
    c = add_config_cmd("run", "run abstract, expand, synth, sim, codegen")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--unsafe", action="store_true")

    c = sub.add_parser("fsm", help="export a transition relation")
    c.add_argument("model", help="plant or expanded model file")
    c.add_argument("--to", required=True, help="output path")
    c.add_argument("--format", choices=("csv", "fsm"), default="csv")

    c = sub.add_parser("dump", help="print BDD file metadata")
    c.add_argument("file")

    c = sub.add_parser("coverage", help="ASCII controller coverage map")
    c.add_argument("controller")
    c.add_argument("--dims", default="0,1", help="two state dimensions, e.g. 0,1")

    c = sub.add_parser("explore", help="interactive transition/controller probe")
    c.add_argument("model")
    c.add_argument("--controller", default=None)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("abstract", "expand", "synth", "sim", "codegen", "run"):
            cfg = RunConfig.from_file(args.config)
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            if args.command == "abstract":
                cmd_abstract(cfg, out_dir)
            elif args.command == "expand":
                cmd_expand(cfg, out_dir)
            elif args.command == "synth":
                cmd_synth(cfg, out_dir)
            elif args.command == "sim":
                cmd_sim(cfg, out_dir, unsafe=args.unsafe, seed=args.seed)
            elif args.command == "codegen":
                cmd_codegen(cfg, out_dir)
            else:
                cmd_abstract(cfg, out_dir)
                cmd_expand(cfg, out_dir)
                cmd_synth(cfg, out_dir)
                cmd_sim(cfg, out_dir, unsafe=args.unsafe, seed=args.seed)
                cmd_codegen(cfg, out_dir)
        elif args.command == "fsm":
            cmd_fsm(args.model, args.to, args.format)
        elif args.command == "dump":
            cmd_dump(args.file)
        elif args.command == "coverage":
            dims = tuple(int(v) for v in args.dims.split(","))
            if len(dims) != 2:
                raise UsageError("--dims takes exactly two dimensions")
            cmd_coverage(args.controller, dims)
        elif args.command == "explore":
            cmd_explore(args.model, args.controller)
    except (ConfigError, UsageError, BddFileError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyController as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_CONTROLLER
    except DomainViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
