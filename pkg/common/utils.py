import time
import logging
import threading
from functools import wraps
from typing import Dict

logger = logging.getLogger(__name__)

# Metrics storage
step_usage_count: Dict[str, int] = {}
error_counts: Dict[str, int] = {}
response_times: Dict[str, float] = {}
corpus_counts: Dict[str, int] = {
    'sentences': 0,
    'samples': 0,
    'reductions': 0
}
_counts_lock = threading.Lock()


def bump_count(name: str, amount: int = 1):
    """Add to a corpus counter; safe from parse worker threads."""
    with _counts_lock:
        corpus_counts[name] = corpus_counts.get(name, 0) + amount


def setup_logging(level: str = "INFO", fmt: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"):
    """Configure root logging once for an entry point."""
    numeric = getattr(logging, level.upper(), None)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=fmt, force=True)


def track_step(func):
    """Decorator to track step usage, errors, and wall-clock times."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        func_name = func.__name__

        try:
            result = func(*args, **kwargs)

            step_usage_count[func_name] = step_usage_count.get(func_name, 0) + 1
            response_times[func_name] = round(time.time() - start_time, 3)

            logger.info(f"Step {func_name} completed in {response_times[func_name]}s")
            return result

        except Exception as e:
            error_counts[func_name] = error_counts.get(func_name, 0) + 1
            logger.error(f"Step {func_name} failed: {str(e)}")
            raise

    return wrapper


def _snapshot_counts() -> Dict[str, int]:
    with _counts_lock:
        return dict(corpus_counts)


def get_metrics() -> Dict:
    """Return all collected metrics."""
    return {
        'step_usage': dict(step_usage_count),
        'errors': dict(error_counts),
        'response_times': dict(response_times),
        'corpus_counts': _snapshot_counts()
    }
