"""polyjudge: sandboxed multilingual code judging with evaluation metrics and
dataset curation tools.

The judge compiles and runs untrusted programs against unit tests inside a
resource-limited, network-blocked jail and classifies each run into one of
six outcomes. The toolkit side covers pass@k / macro-F1 / accuracy / top-k
metrics, geometric-mean held-out splitting, circulation-balanced sample
selection, and bug-fix pair mining.
"""

from .executor import ComparePolicy, SandboxExecutor, classify, compare_output
from .gateway import ExecuteCodeRequest, GatewayService, make_server, serve_forever
from .metrics import (
    LabelSetPair,
    ProblemResultSet,
    accuracy,
    corpus_pass_at_k,
    macro_f1,
    pass_at_k,
    top_k_accuracy,
)
from .model import (
    ExecOutcome,
    Problem,
    ResourceLimits,
    SandboxSettings,
    Submission,
    TestVerdict,
    UnitTest,
    default_limits,
    job_outcome,
)
from .registry import (
    RuntimeRegistry,
    RuntimeSpec,
    RuntimeUnavailableError,
    UnknownRuntimeError,
    load_registry,
)
from .sandbox import RawRun, SandboxSetupError
from .scheduler import JobCancelledError, JobTicket, QueueFullError, WorkerPool

__version__ = "0.1.0"

__all__ = [
    "ComparePolicy",
    "ExecOutcome",
    "ExecuteCodeRequest",
    "GatewayService",
    "JobCancelledError",
    "JobTicket",
    "LabelSetPair",
    "Problem",
    "ProblemResultSet",
    "QueueFullError",
    "RawRun",
    "ResourceLimits",
    "RuntimeRegistry",
    "RuntimeSpec",
    "RuntimeUnavailableError",
    "SandboxExecutor",
    "SandboxSetupError",
    "SandboxSettings",
    "Submission",
    "TestVerdict",
    "UnitTest",
    "UnknownRuntimeError",
    "WorkerPool",
    "accuracy",
    "classify",
    "compare_output",
    "corpus_pass_at_k",
    "default_limits",
    "job_outcome",
    "load_registry",
    "macro_f1",
    "make_server",
    "pass_at_k",
    "serve_forever",
    "top_k_accuracy",
    "__version__",
]
