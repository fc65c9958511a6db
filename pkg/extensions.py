from flask_limiter import Limiter
from flask_limiter.util import get_remote_address
from concurrent.futures import ThreadPoolExecutor
import logging
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

VERSION = "1.0.0"

# Initialize rate limiter for the report service
storage_uri = os.environ.get('REDIS_URL', 'memory://')

limiter = Limiter(
    key_func=get_remote_address,
    default_limits=[os.environ.get('HYPBOUND_RATE_LIMIT', "200 per hour")],
    storage_uri=storage_uri,  # Uses Redis if REDIS_URL is set, otherwise in-memory
    strategy="fixed-window",
)


def configure_logging(level=None):
    """Configure root logging once from HYPBOUND_LOG_LEVEL."""
    level = level or os.environ.get('HYPBOUND_LOG_LEVEL', 'INFO')
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def thread_cap():
    """Number of worker threads allowed by HYPBOUND_THREADS (at least 1)."""
    try:
        return max(1, int(os.environ.get('HYPBOUND_THREADS', '1')))
    except ValueError:
        logging.warning("Ignoring non-integer HYPBOUND_THREADS=%r", os.environ.get('HYPBOUND_THREADS'))
        return 1


def parallel_map(fn, items):
    """Map fn over items, results in input order regardless of thread count."""
    items = list(items)
    workers = min(thread_cap(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def output_dir():
    return os.environ.get('HYPBOUND_OUTPUT_DIR', 'out')
