import random

import pytest

from ncsynth.bdd import Manager
from ncsynth.grid import SymbolicSet, UniformGrid
from ncsynth.ncs import (DelayBounds, expand, expand_spec_set, reachable,
                         state_code_layout)

from conftest import (build_explicit_ts, decoded_states, decoded_transitions,
                      state_set_to_bdd)
from oracles import expand_explicit, reachable_explicit


def complete_toy(mgr, n_states=4, n_inputs=2):
    """Complete deterministic base: successor = (x + u) mod n."""
    trans = {(x, u): {(x + u + 1) % n_states}
             for x in range(n_states) for u in range(n_inputs)}
    return build_explicit_ts(mgr, n_states, n_inputs, trans), trans


def scalar(pre):
    return pre


class TestDelayBounds:
    def test_validation(self):
        with pytest.raises(ValueError):
            DelayBounds(0, 1, 1, 1)
        with pytest.raises(ValueError):
            DelayBounds(2, 1, 1, 1)
        assert DelayBounds(2, 2, 2, 2).prolonged
        assert not DelayBounds(1, 2, 2, 2).prolonged


class TestMarkerEncoding:
    def test_non_power_of_two_uses_spare_code(self):
        g = UniformGrid(lb=(0.0,), ub=(4.0,), eta=(1.0,))   # 5 points, 3 bits
        bits, marker, offs = state_code_layout(g)
        assert bits == 3 and marker == 5 and offs == (0,)

    def test_power_of_two_allocates_flag_bit(self):
        g = UniformGrid(lb=(0.0,), ub=(3.0,), eta=(1.0,))   # 4 points, 2 bits
        bits, marker, offs = state_code_layout(g)
        assert bits == 3 and marker == 4

    def test_mixed_dims_take_first_gap(self):
        g = UniformGrid(lb=(0.0, 0.0), ub=(64.0, 64.0), eta=(1.0, 1.0))
        bits, marker, offs = state_code_layout(g)
        assert bits == 14 and marker == 65 and offs == (0, 7)


class TestToyExpansion:
    def test_state_count_formula(self):
        mgr = Manager()
        base, _ = complete_toy(mgr)
        model = expand(base, DelayBounds(2, 2, 2, 2))
        assert model.state_count() == (4 + 1) ** 2 * 2 ** 2 == 100
        assert model.n_states_symbolic() == 100
        # delay registers are elided for singleton ranges
        assert model.layout.sc_bits == 0 and model.layout.ca_bits == 0

    def test_initial_states_form(self):
        mgr = Manager()
        base, trans = complete_toy(mgr)
        model = expand(base, DelayBounds(2, 2, 2, 2))
        assert model.n_initial() == 4 * 2
        got = decoded_states(model, model.initial)
        expected = {((x, None), (u, u), (2, 2), (2, 2))
                    for x in range(4) for u in range(2)}
        assert got == expected

    def test_matches_explicit_enumeration(self):
        mgr = Manager()
        base, trans = complete_toy(mgr)
        model = expand(base, DelayBounds(2, 2, 2, 2))
        space, init, transitions = expand_explicit(
            list(range(4)), list(range(2)), trans, list(range(4)),
            (2, 2, 2, 2))
        assert decoded_states(model, model.initial) == init
        assert decoded_transitions(model) == transitions

    def test_projection_soundness_and_shift(self):
        mgr = Manager()
        base, trans = complete_toy(mgr, 5, 3)
        model = expand(base, DelayBounds(2, 2, 3, 3))
        for pre, label, post in decoded_transitions(model):
            xs, us, dsc, dca = pre
            xs2, us2, dsc2, dca2 = post
            # base step consumed: head state under the oldest buffered input
            assert xs2[0] in trans[(xs[0], us[-1])]
            # registers shift right by one
            assert xs2[1:] == xs[:-1]
            assert us2[1:] == us[:-1]
            assert dsc2[1:] == dsc[:-1]
            assert dca2[1:] == dca[:-1]
            assert us2[0] == label

    def test_transitions_imply_state_space_membership(self):
        mgr = Manager()
        base, _ = complete_toy(mgr, 5, 3)
        model = expand(base, DelayBounds(2, 2, 2, 2))
        post_domain = model.state_domain.rename(model.pre_to_post)
        assert (model.trans & ~model.state_domain).is_false
        assert (model.trans & ~post_domain).is_false
        assert (model.trans & ~model.input_domain).is_false
        assert (model.initial & ~model.state_domain).is_false

    def test_nondeterministic_base_warns_in_prolonged_mode(self):
        mgr = Manager()
        trans = {(0, 0): {0, 1}, (1, 0): {0}}
        base = build_explicit_ts(mgr, 2, 1, trans)
        with pytest.warns(UserWarning, match="deterministic"):
            expand(base, DelayBounds(1, 1, 1, 1))


class TestGeneralDelays:
    def test_delay_registers_allocated(self):
        mgr = Manager()
        base, trans = complete_toy(mgr)
        model = expand(base, DelayBounds(1, 2, 1, 3))
        assert model.layout.sc_bits == 1
        assert model.layout.ca_bits == 2
        assert model.state_count() == 5 ** 2 * 2 ** 3 * 2 ** 2 * 3 ** 3

    def test_matches_explicit_enumeration(self):
        mgr = Manager()
        base, trans = complete_toy(mgr, 3, 2)
        model = expand(base, DelayBounds(1, 2, 1, 2))
        space, init, transitions = expand_explicit(
            list(range(3)), list(range(2)), trans, list(range(3)),
            (1, 2, 1, 2))
        assert decoded_states(model, model.initial) == init
        assert decoded_transitions(model) == transitions
        assert model.n_states_symbolic() == len(space)

    def test_custom_input_selector(self):
        # consume the newest buffered input whenever the head delay is minimal
        def selector(dsc, dca):
            return 1 if dca[0] == 1 else 0

        mgr = Manager()
        base, trans = complete_toy(mgr, 3, 2)
        model = expand(base, DelayBounds(1, 1, 1, 2), input_selector=selector)
        _, _, transitions = expand_explicit(
            list(range(3)), list(range(2)), trans, list(range(3)),
            (1, 1, 1, 2), input_selector=selector)
        assert decoded_transitions(model) == transitions

    def test_selector_rejected_when_out_of_range(self):
        mgr = Manager()
        base, _ = complete_toy(mgr)
        with pytest.raises(ValueError):
            expand(base, DelayBounds(1, 2, 1, 1), input_selector=lambda a, b: 5)


class TestSpecSetLifting:
    def setup_model(self):
        mgr = Manager()
        base, trans = complete_toy(mgr)
        model = expand(base, DelayBounds(2, 2, 2, 2))
        return mgr, base, model

    def test_lift_full_state_set(self):
        mgr, base, model = self.setup_model()
        lifted = expand_spec_set(base.pre_set.full(), model)
        # newest register is a real symbol, everything else free
        assert model.mgr.sat_count(lifted, model.pre_vars) == 4 * 5 * 4

    def test_lift_empty(self):
        mgr, base, model = self.setup_model()
        lifted = expand_spec_set(base.pre_set.empty(), model)
        assert lifted.is_false

    def test_lift_singleton_counts_free_registers(self):
        mgr, base, model = self.setup_model()
        single = base.pre_set.empty().add_box((2.0,), (2.0,))
        lifted = expand_spec_set(single, model)
        assert model.mgr.sat_count(lifted, model.pre_vars) == 1 * 5 * 4

    def test_lift_oldest_anchor(self):
        mgr, base, model = self.setup_model()
        single = base.pre_set.empty().add_box((2.0,), (2.0,))
        lifted = expand_spec_set(single, model, anchor="oldest")
        got = decoded_states(model, lifted)
        assert all(xs[-1] == 2 for xs, _, _, _ in got)
        assert len(got) == 5 * 1 * 4

    def test_marker_never_satisfies_lift(self):
        mgr, base, model = self.setup_model()
        lifted = expand_spec_set(base.pre_set.full(), model)
        for xs, _, _, _ in decoded_states(model, lifted):
            assert xs[0] is not None


class TestReachable:
    def test_empty_base_reaches_only_initial(self):
        mgr = Manager()
        base = build_explicit_ts(mgr, 3, 2, {})
        model = expand(base, DelayBounds(2, 2, 1, 1))
        assert reachable(model) == model.initial

    def test_matches_explicit_bfs(self):
        mgr = Manager()
        base, trans = complete_toy(mgr, 4, 2)
        model = expand(base, DelayBounds(2, 2, 2, 2))
        _, init, transitions = expand_explicit(
            list(range(4)), list(range(2)), trans, list(range(4)),
            (2, 2, 2, 2))
        got = decoded_states(model, reachable(model))
        assert got == reachable_explicit(init, transitions)

    def test_markers_flushed_after_fillup(self):
        mgr = Manager()
        base, trans = complete_toy(mgr, 4, 2)
        model = expand(base, DelayBounds(3, 3, 1, 1))
        r = reachable(model)
        quant = tuple(sorted(model.pre_vars + model.input_vars))
        back = {b: a for a, b in model.pre_to_post.items()}
        layer = model.initial
        for _ in range(3):
            layer = model.mgr.exist_and(model.trans, layer, quant).rename(back)
        for xs, _, _, _ in decoded_states(model, layer):
            assert all(x is not None for x in xs)
        # reachability stays inside the declared state space
        assert (r & ~model.state_domain).is_false
