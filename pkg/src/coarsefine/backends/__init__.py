"""Backend clients: HTTP generation/scoring and the deterministic mock world."""

from .client import (
    BackendBundle,
    CallMeter,
    GenerationBackend,
    HttpScorerHandle,
    InflightLimiter,
    OpenAIChatBackend,
    RequestLog,
    RequestRecord,
    build_http_backends,
    metered_bundle,
    with_retries,
)
from .mock import (
    ChainPlan,
    MockGenerator,
    MockProblem,
    MockScorerHandle,
    MockSuite,
    MockWorld,
    build_chain_text,
    load_suite,
    mock_world,
    suite_from_dict,
    suite_to_dict,
)

__all__ = [
    "BackendBundle",
    "CallMeter",
    "ChainPlan",
    "GenerationBackend",
    "HttpScorerHandle",
    "InflightLimiter",
    "MockGenerator",
    "MockProblem",
    "MockScorerHandle",
    "MockSuite",
    "MockWorld",
    "OpenAIChatBackend",
    "RequestLog",
    "RequestRecord",
    "build_chain_text",
    "build_http_backends",
    "load_suite",
    "metered_bundle",
    "mock_world",
    "suite_from_dict",
    "suite_to_dict",
    "with_retries",
]
