"""Hot inner loop of the discrete-event service simulation.

Written in nopython-compatible numpy code; :func:`aoicache.accel.maybe_njit`
compiles it when numba is available and AOICACHE_PURE_PYTHON is unset.  Both
paths execute identical float64 operations, so outputs are bit-for-bit
equal.
"""

import numpy as np

from .accel import maybe_njit

FRESHNESS_WINDOW = 0
ALWAYS_REFRESH = 1
NEVER_REFRESH = 2

# Sentinel version stamp: infinitely stale, so the first service of each
# item fetches a real version under every policy.
STALE = -np.inf


def service_process_py(
    arrivals,
    item_index,
    fetch_draws,
    delivery_draws,
    windows,
    policy_code,
    queue_cap,
    service_start,
    departure,
    refreshed,
    aoi_delivery,
    aoi_service_start,
):
    """One FIFO server draining the request stream in arrival order.

    At each service start the cached copy's age decides whether a fetch
    precedes the delivery.  Fills the five output arrays in place and
    returns -1, or the request index at which the in-system count first
    exceeded queue_cap.
    """
    n = arrivals.shape[0]
    version = np.full(windows.shape[0], STALE)
    prev_departure = 0.0
    drained = 0  # departures at or before the current arrival
    for i in range(n):
        t = arrivals[i]
        while drained < i and departure[drained] <= t:
            drained += 1
        if i + 1 - drained > queue_cap:
            return i
        c = item_index[i]
        start = t if t > prev_departure else prev_departure
        age = start - version[c]
        if policy_code == ALWAYS_REFRESH:
            do_refresh = True
        elif policy_code == NEVER_REFRESH:
            do_refresh = version[c] == STALE
        else:
            do_refresh = age >= windows[c]
        if do_refresh:
            version[c] = start
            aoi = fetch_draws[i] + delivery_draws[i]
            dep = start + fetch_draws[i] + delivery_draws[i]
        else:
            dep = start + delivery_draws[i]
            aoi = dep - version[c]
        service_start[i] = start
        departure[i] = dep
        refreshed[i] = do_refresh
        aoi_delivery[i] = aoi
        aoi_service_start[i] = age
        prev_departure = dep
    return -1


service_process = maybe_njit(service_process_py, cache=True)
