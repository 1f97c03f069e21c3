import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regolith.bt import (
    Condition,
    FailureIsRunning,
    Inverter,
    NodeRegistry,
    Parallel,
    ParallelPolicy,
    ParseError,
    ResolveError,
    Selector,
    Sequence,
    StructureError,
    Task,
    TreeNode,
    parse_document,
    parse_line,
    resolve,
    serialize,
)

EXAMPLE = """\
Root: Sequence
\tParallel: ParallelSuccessOnFirst
\t\t# Scenario completed? -> Tree Success
\t\tScenario: Sequence
\t\t\tScenarioDone: Check
\t\t# Decorator between machine subtrees
\t\t# and parallel node are omitted.
\t\tMachine1: Sequence -> excavator1
\t\t\tDig: Check
\t\tMachine2: Sequence -> dumptruck1
\t\t\tHaul: Check
"""


def make_registry():
    reg = NodeRegistry()
    reg.register("Check", lambda name, children, context: Condition(
        name=name, predicate=lambda ctx: True, context=context))
    reg.register("Act", lambda name, children, context: Task(
        name=name, binding=None, context=context))
    return reg


def test_parse_line_with_context():
    line = parse_line("\tMachine1: Sequence -> excavator1", 1)
    assert line.indent_level == 1
    assert line.node_name == "Machine1"
    assert line.node_spec == "Sequence"
    assert line.machine_context == "excavator1"


def test_parse_line_root():
    line = parse_line("Root: Sequence", 1)
    assert line.indent_level == 0
    assert line.node_name == "Root"
    assert line.node_spec == "Sequence"
    assert line.machine_context is None


def test_parse_line_comment_and_blank():
    assert parse_line("# Decorator between machine subtrees", 1) is None
    assert parse_line("   ", 1) is None
    assert parse_line("", 1) is None


def test_parse_line_trailing_comment():
    line = parse_line("Root: Sequence  # top", 1)
    assert line.node_spec == "Sequence"


def test_parse_line_empty_context_arrow():
    with pytest.raises(ParseError):
        parse_line("Drive: Act ->", 3)


def test_parse_line_mixed_indent():
    with pytest.raises(ParseError):
        parse_line(" \tX: Sequence", 2)


def test_parse_line_no_name():
    line = parse_line("Selector", 1)
    assert line.node_name is None
    assert line.node_spec == "Selector"


def test_parse_example_document_shape():
    doc = parse_document(EXAMPLE)
    root = doc.root
    assert root.line.node_name == "Root"
    assert [c.line.node_name for c in root.children] == ["Parallel"]
    par = root.children[0]
    assert [c.line.node_name for c in par.children] == [
        "Scenario", "Machine1", "Machine2"]
    assert par.children[1].line.machine_context == "excavator1"
    assert par.children[2].line.machine_context == "dumptruck1"


def test_resolve_example_tree():
    tree = resolve(parse_document(EXAMPLE), make_registry())
    assert isinstance(tree, Sequence) and tree.memory
    par = tree.children[0]
    assert isinstance(par, Parallel)
    assert isinstance(par.policy, ParallelPolicy.SucceedOnChild)
    assert par.policy.index == 0
    # context propagates to the leaves of each machine subtree
    assert par.children[1].children[0].context == "excavator1"
    assert par.children[2].children[0].context == "dumptruck1"
    assert par.children[0].context is None


def test_childless_sequence_fails_at_resolution():
    doc = parse_document("Root: Sequence\n")
    with pytest.raises(StructureError):
        resolve(doc, make_registry())


def test_indent_jump_is_parse_error_with_line():
    text = "Root: Sequence\n\t\t\tDeep: Check\n"
    with pytest.raises(ParseError) as err:
        parse_document(text)
    assert err.value.line == 2


def test_multiple_roots_rejected():
    with pytest.raises(ParseError):
        parse_document("A: Sequence\nB: Sequence\n")


def test_empty_document_rejected():
    with pytest.raises(ParseError):
        parse_document("# only comments\n\n")


def test_unknown_spec_reports_line():
    text = "Root: Sequence\n\tOops: Sequnce\n"
    with pytest.raises(ResolveError) as err:
        resolve(parse_document(text), make_registry())
    assert err.value.line == 2
    assert "Sequnce" in str(err.value)


def test_space_indentation_unit_inferred():
    text = "Root: Sequence\n  A: Check\n    # nothing\n  B: Check\n"
    doc = parse_document(text)
    assert [c.line.node_name for c in doc.root.children] == ["A", "B"]


def test_space_indent_non_multiple_rejected():
    text = "Root: Sequence\n  A: Selector\n   B: Check\n"
    with pytest.raises(ParseError):
        parse_document(text)


def test_subtree_factory_expansion_carries_context():
    reg = make_registry()

    def dig_subtree(name, children, context):
        assert not children
        return Selector(name=name, children=[
            Sequence(name="cycle", children=[
                Condition(name="ready", predicate=lambda ctx: True),
                Task(name="dig", binding=None),
            ])], context=context)

    reg.register("DigSubtree", dig_subtree)
    text = "Root: Sequence\n\tM1: DigSubtree -> excavator1\n"
    tree = resolve(parse_document(text), reg)
    leaves = [n for n in tree.iter_subtree() if isinstance(n, (Task, Condition))]
    assert leaves and all(n.context == "excavator1" for n in leaves)


# -- round trip -------------------------------------------------------------

def trees_isomorphic(a: TreeNode, b: TreeNode) -> bool:
    if a.name != b.name or a.context != b.context:
        return False
    if type(a) is not type(b):
        return False
    if isinstance(a, Sequence) and a.memory != b.memory:
        return False
    if isinstance(a, Parallel) and repr(a.policy) != repr(b.policy):
        return False
    if len(a.children) != len(b.children):
        return False
    return all(trees_isomorphic(x, y) for x, y in zip(a.children, b.children))


def random_tree(rng, registry, depth=0, max_depth=5):
    """Random valid tree using only registry-resolvable node kinds."""
    counter = rng.randint(0, 10**6)
    name = f"n{counter}"
    context = rng.choice([None, None, "excavator1", "dumptruck1"])
    if depth >= max_depth or rng.random() < 0.35:
        if rng.random() < 0.5:
            return Condition(name=name, predicate=lambda ctx: True,
                             context=context), "Check"
        return Task(name=name, binding=None, context=context), "Act"
    kind = rng.choice(["seq", "seqnm", "sel", "par", "inv", "fir"])
    n_kids = 1 if kind in ("inv", "fir") else rng.randint(1, 4)
    kids = []
    for _ in range(n_kids):
        child, spec = random_tree(rng, registry, depth + 1, max_depth)
        child.spec_name = spec
        kids.append(child)
    if kind == "seq":
        return Sequence(name, kids, context, memory=True), "Sequence"
    if kind == "seqnm":
        return Sequence(name, kids, context, memory=False), "SequenceWithoutMemory"
    if kind == "sel":
        return Selector(name, kids, context), "Selector"
    if kind == "inv":
        return Inverter(name, kids, context), "Inverter"
    if kind == "fir":
        return FailureIsRunning(name, kids, context), "FailureIsRunning"
    pol = rng.choice([ParallelPolicy.SucceedOnOne(),
                      ParallelPolicy.SucceedOnAll(),
                      ParallelPolicy.SucceedOnChild(rng.randrange(n_kids))])
    return Parallel(name, kids, context, policy=pol), None


def normalize_contexts(node, inherited=None):
    if node.context is None:
        node.context = inherited
    for c in node.children:
        normalize_contexts(c, node.context)


def test_round_trip_random_trees():
    reg = make_registry()
    rng = random.Random(7)
    for _ in range(200):
        tree, spec = random_tree(rng, reg)
        if spec:
            tree.spec_name = spec
        normalize_contexts(tree)
        text = serialize(tree)
        rebuilt = resolve(parse_document(text), reg)
        assert trees_isomorphic(tree, rebuilt), text


def test_round_trip_single_condition_leaf():
    tree = Sequence("Root", [Condition(name="c", predicate=lambda ctx: True)])
    tree.children[0].spec_name = "Check"
    text = serialize(tree)
    assert text.splitlines()[1] == "\tc: Check"
    rebuilt = resolve(parse_document(text), make_registry())
    assert trees_isomorphic(tree, rebuilt)


def test_comments_never_affect_tree_shape():
    plain = resolve(parse_document(EXAMPLE), make_registry())
    noisy = EXAMPLE.replace("Root: Sequence",
                            "# header\n\nRoot: Sequence  # root note")
    assert trees_isomorphic(plain, resolve(parse_document(noisy),
                                           make_registry()))


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=300))
def test_parser_is_total_on_arbitrary_bytes(data):
    try:
        parse_document(data)
    except ParseError as err:
        assert isinstance(err.line, int)
