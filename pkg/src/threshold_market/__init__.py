"""Threshold-agent market simulator with a queueing view of price cascades."""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("threshold-market")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .market import Market, MarketParams, MarketState, run
from .queue_sim import QueueParams, sample_busy_periods
from .distributions import ServiceDist

__all__ = ["Market", "MarketParams", "MarketState", "QueueParams", "ServiceDist", "run", "sample_busy_periods", "__version__"]
