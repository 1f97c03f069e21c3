from .core import (
    ABSENT,
    Blackboard,
    BlackboardTypeError,
    Condition,
    Decorator,
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
    TreeNode,
    aggregate_parallel,
    decorate,
)
from .dsl import (
    NodeRegistry,
    ParseError,
    ResolveError,
    TreeDocument,
    parse_document,
    parse_line,
    resolve,
    serialize,
)
