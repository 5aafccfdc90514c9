"""Symbolic models and controller synthesis for networked control systems."""

from .bdd import Bdd, BddError, Manager
from .bddfile import BddFileError, load, save
from .grid import OutOfDomainError, SymbolicSet, UniformGrid
from .plants import PlantSpec, growth_radius, integrate, make_plant
from .abstraction import TransitionSystem, build_abstraction, remove_region
from .ncs import DelayBounds, NcsModel, expand, expand_spec_set, reachable
from .synthesis import (Controller, Mode, cpre, solve_gen_buchi,
                        solve_persistence, solve_reach, solve_recurrence,
                        solve_safety)
from .simulate import ClosedLoop, DelayChannel, DomainViolation, Trace, export_trace
from .codegen import determinize, decompose_outputs, emit_c, emit_verilog

__version__ = "0.1.0"
