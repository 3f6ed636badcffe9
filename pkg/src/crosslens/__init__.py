"""Multi-agent analysis engine for heterogeneous data sources."""

from .bundle import DataSource, RunConfig, RunContext, TaskBundle, init_run, load_bundle
from .gateway import Gateway, ScriptedBackend, extract_tagged
from .report import FinalReport

__version__ = "0.1.0"

__all__ = [
    "DataSource",
    "FinalReport",
    "Gateway",
    "RunConfig",
    "RunContext",
    "ScriptedBackend",
    "TaskBundle",
    "extract_tagged",
    "init_run",
    "load_bundle",
    "__version__",
]
