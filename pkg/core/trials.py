"""
Seeded trial batches over a thread pool.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .conf import amplab_setting

logger = logging.getLogger(__name__)


def trial_seed(seed, index):
    """Stream of trial ``index``; depends only on the master seed and the index."""
    return np.random.SeedSequence(seed, spawn_key=(index,))


def run_trials(func, seed, trials, workers=None):
    """
    Call ``func(index, seed_sequence)`` for every trial and return the results
    ordered by trial index.
    """
    workers = workers or amplab_setting("WORKERS")
    tasks = [(index, trial_seed(seed, index)) for index in range(trials)]
    if workers <= 1 or trials <= 1:
        results = [(index, func(index, stream)) for index, stream in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(func, index, stream): index for index, stream in tasks}
            results = [(futures[future], future.result()) for future in futures]
    logger.debug("finished %d trials on %d workers", trials, workers)
    return [result for _, result in sorted(results, key=lambda item: item[0])]
