"""Simulator of DRAM activation failures under reduced tRCD and a TRNG built on them."""

__version__ = "0.1.0"

from .device import CellAddress, Condition, DeviceConfig, FailureModel, WordAddress, generate_device
from .patterns import DataPattern, all_patterns
from .streams import SampleStream
from .timing import TimingParams, alg2_loop_runtime, schedule, validate_trace

__all__ = ["CellAddress", "Condition", "DataPattern", "DeviceConfig", "FailureModel", "SampleStream",
           "TimingParams", "WordAddress", "__version__", "alg2_loop_runtime", "all_patterns",
           "generate_device", "schedule", "validate_trace"]
