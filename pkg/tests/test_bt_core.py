import itertools

import pytest

from regolith.bt import (
    ABSENT,
    Blackboard,
    BlackboardTypeError,
    Condition,
    FAILURE,
    FailureIsRunning,
    Inverter,
    NodeStatus,
    Parallel,
    ParallelPolicy,
    RUNNING,
    SUCCESS,
    Selector,
    Sequence,
    StructureError,
    Task,
    TickContext,
    aggregate_parallel,
    decorate,
)

ALL = [SUCCESS, FAILURE, RUNNING]


class Stub(Condition):
    """Leaf that replays a scripted list of statuses and counts ticks."""

    def __init__(self, statuses, name="stub"):
        super().__init__(name=name)
        self.statuses = list(statuses)
        self.ticks = 0

    def _tick(self, ctx):
        self.ticks += 1
        if len(self.statuses) > 1:
            return self.statuses.pop(0)
        return self.statuses[0]


def seq_oracle(statuses):
    """Hand-derived memoryless sequence result plus #children ticked."""
    for i, s in enumerate(statuses):
        if s is not SUCCESS:
            return s, i + 1
    return SUCCESS, len(statuses)


def sel_oracle(statuses):
    for i, s in enumerate(statuses):
        if s is not FAILURE:
            return s, i + 1
    return FAILURE, len(statuses)


@pytest.mark.parametrize("n", [2, 3])
def test_sequence_matches_oracle_exhaustively(n):
    for combo in itertools.product(ALL, repeat=n):
        for memory in (False, True):
            kids = [Stub([s]) for s in combo]
            node = Sequence(children=kids, memory=memory)
            expected, ticked = seq_oracle(combo)
            assert node.tick(TickContext()) is expected
            assert [k.ticks for k in kids] == [1] * ticked + [0] * (n - ticked)


@pytest.mark.parametrize("n", [2, 3])
def test_selector_matches_oracle_exhaustively(n):
    for combo in itertools.product(ALL, repeat=n):
        kids = [Stub([s]) for s in combo]
        node = Selector(children=kids)
        expected, ticked = sel_oracle(combo)
        assert node.tick(TickContext()) is expected
        assert [k.ticks for k in kids] == [1] * ticked + [0] * (n - ticked)


def test_sequence_halts_at_running_without_ticking_rest():
    kids = [Stub([SUCCESS]), Stub([RUNNING]), Stub([SUCCESS])]
    assert Sequence(children=kids, memory=False).tick(TickContext()) is RUNNING
    assert kids[2].ticks == 0


def test_selector_all_fail():
    kids = [Stub([FAILURE]) for _ in range(3)]
    assert Selector(children=kids).tick(TickContext()) is FAILURE


def test_memory_sequence_resumes_at_running_child():
    kids = [Stub([SUCCESS]), Stub([RUNNING, SUCCESS]), Stub([SUCCESS])]
    node = Sequence(children=kids, memory=True)
    ctx = TickContext()
    assert node.tick(ctx) is RUNNING
    assert node.tick(ctx) is SUCCESS
    # child 0 was not re-ticked in the second tick
    assert kids[0].ticks == 1
    assert kids[1].ticks == 2


def test_memoryless_sequence_restarts_from_first_child():
    kids = [Stub([SUCCESS]), Stub([RUNNING, SUCCESS])]
    node = Sequence(children=kids, memory=False)
    node.tick(TickContext())
    node.tick(TickContext())
    assert kids[0].ticks == 2


def test_halt_clears_memory_cursor():
    kids = [Stub([SUCCESS]), Stub([RUNNING, RUNNING, SUCCESS])]
    node = Sequence(children=kids, memory=True)
    node.tick(TickContext())
    node.halt()
    node.tick(TickContext())
    assert kids[0].ticks == 2  # restarted at child 0


def test_halt_does_not_clear_blackboard():
    ctx = TickContext()
    ctx.blackboard.write("k", 1)
    node = Sequence(children=[Stub([RUNNING])], memory=True)
    node.tick(ctx)
    node.halt()
    assert ctx.blackboard.read("k") == 1


def test_halt_on_leaf_is_noop():
    Stub([SUCCESS]).halt()


def test_memory_resets_after_failure():
    kids = [Stub([SUCCESS, SUCCESS]), Stub([RUNNING, FAILURE, SUCCESS])]
    node = Sequence(children=kids, memory=True)
    node.tick(TickContext())   # Running at child 1
    node.tick(TickContext())   # child 1 fails -> cursor resets
    node.tick(TickContext())
    assert kids[0].ticks == 2  # re-ticked after the failure episode


# -- parallel ---------------------------------------------------------------

def par_oracle(statuses, policy):
    if isinstance(policy, ParallelPolicy.SucceedOnChild):
        if FAILURE in statuses:
            return FAILURE
        return statuses[policy.index]
    if isinstance(policy, ParallelPolicy.SucceedOnOne):
        if SUCCESS in statuses:
            return SUCCESS
        return FAILURE if all(s is FAILURE for s in statuses) else RUNNING
    if FAILURE in statuses:
        return FAILURE
    return SUCCESS if all(s is SUCCESS for s in statuses) else RUNNING


def test_parallel_policies_exhaustive():
    policies = [ParallelPolicy.SucceedOnOne(), ParallelPolicy.SucceedOnAll(),
                ParallelPolicy.SucceedOnChild(0),
                ParallelPolicy.SucceedOnChild(1)]
    for combo in itertools.product(ALL, repeat=2):
        for pol in policies:
            assert aggregate_parallel(list(combo), pol) is par_oracle(combo, pol)
            node = Parallel(children=[Stub([s]) for s in combo], policy=pol)
            assert node.tick(TickContext()) is par_oracle(combo, pol)


def test_parallel_ticks_every_child_every_tick():
    kids = [Stub([SUCCESS]), Stub([RUNNING])]
    node = Parallel(children=kids, policy=ParallelPolicy.SucceedOnOne())
    node.tick(TickContext())
    node.tick(TickContext())
    assert kids[0].ticks == 2 and kids[1].ticks == 2


def test_parallel_examples():
    assert aggregate_parallel([RUNNING, SUCCESS],
                              ParallelPolicy.SucceedOnOne()) is SUCCESS
    assert aggregate_parallel([SUCCESS, SUCCESS],
                              ParallelPolicy.SucceedOnAll()) is SUCCESS


def test_succeed_on_child_index_out_of_range():
    with pytest.raises(StructureError):
        aggregate_parallel([SUCCESS], ParallelPolicy.SucceedOnChild(3))


# -- decorators -------------------------------------------------------------

def test_decorator_tables():
    assert decorate(SUCCESS, "Inverter") is FAILURE
    assert decorate(FAILURE, "Inverter") is SUCCESS
    assert decorate(RUNNING, "Inverter") is RUNNING
    assert decorate(FAILURE, "FailureIsRunning") is RUNNING
    assert decorate(SUCCESS, "FailureIsRunning") is SUCCESS
    assert decorate(RUNNING, "FailureIsRunning") is RUNNING


def test_double_inverter_is_identity():
    for s in ALL:
        assert decorate(decorate(s, "Inverter"), "Inverter") is s


def test_decorator_nodes():
    assert Inverter(children=[Stub([SUCCESS])]).tick(TickContext()) is FAILURE
    assert FailureIsRunning(children=[Stub([FAILURE])]).tick(
        TickContext()) is RUNNING


# -- structure --------------------------------------------------------------

def test_arity_errors_reported_before_children_tick():
    kid = Stub([SUCCESS])
    bad = Inverter(children=[kid, Stub([SUCCESS])])
    with pytest.raises(StructureError):
        bad.tick(TickContext())
    assert kid.ticks == 0
    with pytest.raises(StructureError):
        Sequence(children=[]).tick(TickContext())


def test_tick_never_mutates_structure():
    kids = [Stub([RUNNING]), Stub([SUCCESS])]
    node = Selector(children=kids)
    node.tick(TickContext())
    assert node.children == kids


def test_task_issues_at_most_one_activation_per_tick():
    class CountingBinding:
        def __init__(self):
            self.activations = 0

        def tick(self, node, ctx):
            self.activations += 1
            return RUNNING

        def halt(self, node):
            pass

    bindings = [CountingBinding() for _ in range(3)]
    tree = Parallel(children=[Task(binding=b) for b in bindings],
                    policy=ParallelPolicy.SucceedOnAll())
    tree.tick(TickContext())
    assert [b.activations for b in bindings] == [1, 1, 1]


# -- blackboard -------------------------------------------------------------

def test_blackboard_write_read():
    bb = Blackboard()
    bb.write("cell_index", 0)
    assert bb.read("cell_index") == 0


def test_blackboard_absent_is_distinguishable():
    bb = Blackboard()
    assert bb.read("never_written") is ABSENT
    bb.write("x", None)
    assert bb.read("x") is None
    assert bb.read("x") is not ABSENT


def test_blackboard_last_writer_wins():
    bb = Blackboard()
    bb.write("cell_index", 3)
    bb.write("cell_index", 4)
    assert bb.read("cell_index") == 4


def test_blackboard_monomorphic_keys():
    bb = Blackboard()
    bb.write("k", 1)
    with pytest.raises(BlackboardTypeError):
        bb.write("k", "one")


def test_blackboard_empty_key_rejected():
    with pytest.raises(ValueError):
        Blackboard().write("", 1)
