"""Refreshing-window assignment minimizing delay under a mean-age budget.

Minimizing the mean delay is equivalent to minimizing the request-weighted
mean refresh probability, which is convex in the per-item expected cache
serves per refresh cycle.  The age budget converts to a separable allowance
on those allocations, so the solver equalizes a marginal price across items
by bisecting a single dual variable; a projected-gradient reference solver
cross-checks it in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytics import CatalogPrediction, Prediction, predict_catalog
from .errors import BracketFailure, NonConvergence
from .model import Catalog, ServiceRates

STATUS_OPTIMAL = "optimal"
STATUS_BOUNDARY = "boundary_all_refresh"
STATUS_INFEASIBLE = "infeasible_budget"
STATUS_UNSTABLE = "unstable_at_optimum"

# Budgets within this absolute margin of the AoI floor count as the
# all-refresh boundary.
_BOUNDARY_TOL = 1e-12

_BRACKET_LO = 1e-15
_BRACKET_HI = 1e6


@dataclass(frozen=True)
class OptProblem:
    """Window-design instance.

    arrival_rates are per item (requests/s) and must sum to
    total_arrival_rate; aoi_budget is the required mean age over all
    delivered content, seconds.
    """

    arrival_rates: np.ndarray
    rates: ServiceRates
    aoi_budget: float
    total_arrival_rate: float

    def __post_init__(self):
        lam = np.asarray(self.arrival_rates, dtype=float)
        object.__setattr__(self, "arrival_rates", lam)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("arrival_rates must be a non-empty 1-d vector")
        if not (lam > 0).all():
            raise ValueError("every arrival rate must be positive")
        if not self.total_arrival_rate > 0:
            raise ValueError("total_arrival_rate must be positive")
        if abs(float(lam.sum()) - self.total_arrival_rate) > 1e-9 * self.total_arrival_rate:
            raise ValueError("arrival_rates must sum to total_arrival_rate")
        if not self.aoi_budget > 0:
            raise ValueError("aoi_budget must be positive")

    @classmethod
    def from_catalog(
        cls, catalog: Catalog, rates: ServiceRates, aoi_budget: float
    ) -> "OptProblem":
        return cls(
            arrival_rates=catalog.arrival_rates,
            rates=rates,
            aoi_budget=float(aoi_budget),
            total_arrival_rate=catalog.total_arrival_rate,
        )


@dataclass(frozen=True)
class OptResult:
    """Solver output.

    windows        optimal refreshing windows, seconds
    cycle_serves   expected cache serves per refresh cycle at the optimum
    dual_price     marginal delay-for-age price (math.inf at the boundary)
    predicted      system-level prediction at the returned windows
    per_item       per-item predictions at the returned windows
    budget_slack   unused allowance; ~0 at status "optimal"
    status         optimal | boundary_all_refresh | infeasible_budget |
                   unstable_at_optimum
    """

    windows: np.ndarray
    cycle_serves: np.ndarray
    dual_price: float
    predicted: Prediction
    per_item: tuple[Prediction, ...]
    budget_slack: float
    status: str


def cycle_budget(problem: OptProblem) -> float:
    """Total allocation allowance implied by the age budget.

    Each item consumes (serves + exp(-serves)) of it; the allowance equals
    the item count exactly when the budget sits at the AoI floor and grows
    linearly in the budget above the floor.
    """
    item_count = problem.arrival_rates.size
    lam = problem.total_arrival_rate
    return 2.0 * lam * problem.aoi_budget + item_count - 2.0 * lam * problem.rates.aoi_floor


def _inv_gap(n: float) -> float:
    # 1/n - 1/(exp(n) - 1), series-switched to dodge cancellation near 0
    if n < 1e-3:
        return 0.5 - n / 12.0 + n**3 / 720.0
    if n > 700.0:  # exp overflows; the second term is below 1e-300
        return 1.0 / n
    return 1.0 / n - 1.0 / math.expm1(n)


def stationarity_price(arrival_rate: float, cycle_serves: float) -> float:
    """Marginal price equalized across items at the optimum.

    Strictly decreasing in cycle_serves, behaving like arrival_rate/(2n)
    near zero and arrival_rate/n**2 for large n; linear in arrival_rate.
    """
    if not arrival_rate > 0:
        raise ValueError("arrival_rate must be positive")
    if not cycle_serves > 0:
        raise ValueError("cycle_serves must be positive")
    return arrival_rate / cycle_serves * _inv_gap(cycle_serves)


def invert_price(arrival_rate: float, price: float) -> float:
    """Allocation at which stationarity_price equals the given price.

    Bisection on the strictly decreasing price curve, to absolute tolerance
    1e-12 in the allocation (a few ulps at very large allocations, where
    1e-12 is below float spacing).
    """
    if not price > 0:
        raise ValueError("price must be positive")
    lo, hi = _BRACKET_LO, _BRACKET_HI
    if (
        stationarity_price(arrival_rate, lo) < price
        or stationarity_price(arrival_rate, hi) > price
    ):
        raise BracketFailure(
            f"no allocation in ({lo:g}, {hi:g}) carries price {price!r}"
        )
    while hi - lo > max(1e-12, 8.0 * math.ulp(hi)):
        mid = 0.5 * (lo + hi)
        if stationarity_price(arrival_rate, mid) >= price:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _complete(
    problem: OptProblem,
    serves: np.ndarray,
    dual_price: float,
    status: str,
) -> OptResult:
    lam = problem.arrival_rates
    floor = problem.rates.aoi_floor
    windows = floor + serves / lam
    catalog = Catalog.from_popularities(
        lam / lam.sum(), problem.total_arrival_rate, windows
    )
    prediction: CatalogPrediction = predict_catalog(
        catalog, problem.rates, allow_unstable=True
    )
    if status == STATUS_OPTIMAL and math.isinf(prediction.system.mean_delay):
        status = STATUS_UNSTABLE
    slack = cycle_budget(problem) - float(np.sum(serves + np.exp(-serves)))
    return OptResult(
        windows=windows,
        cycle_serves=serves,
        dual_price=dual_price,
        predicted=prediction.system,
        per_item=prediction.per_item,
        budget_slack=slack,
        status=status,
    )


def solve(problem: OptProblem) -> OptResult:
    """Optimal windows by bisection on the dual price.

    Budgets below the AoI floor are infeasible (status only; the windows
    reported are the floor vector, the closest achievable point).  At the
    floor every request refreshes.  In the interior the allowance is spent
    exactly: the objective strictly improves with every extra cache serve,
    so slack is never optimal.  If the resulting mix still saturates the
    server the status is unstable_at_optimum and the result is reported
    for diagnosis.
    """
    lam = problem.arrival_rates
    item_count = lam.size
    allowance = cycle_budget(problem)
    floor = problem.rates.aoi_floor

    if problem.aoi_budget < floor - _BOUNDARY_TOL:
        return _complete(problem, np.zeros(item_count), math.inf, STATUS_INFEASIBLE)
    if problem.aoi_budget <= floor + _BOUNDARY_TOL:
        return _complete(problem, np.zeros(item_count), math.inf, STATUS_BOUNDARY)

    def consumption(price: float) -> tuple[np.ndarray, float]:
        serves = np.array([invert_price(float(l), price) for l in lam])
        return serves, float(np.sum(serves + np.exp(-serves)))

    # consumption is strictly decreasing in the price and tends to the item
    # count from above, so an allowance above the item count brackets.
    price_hi = float(lam.max()) * 1e6
    while consumption(price_hi)[1] >= allowance:
        price_hi *= 2.0
    price_lo = price_hi / 2.0
    while consumption(price_lo)[1] < allowance:
        price_lo /= 2.0

    for _ in range(200):
        if price_hi - price_lo <= 1e-15 * price_hi:
            break
        mid = 0.5 * (price_lo + price_hi)
        _, used = consumption(mid)
        if used > allowance:
            price_lo = mid
        else:
            price_hi = mid
    # the high-price side under-consumes, keeping the predicted age at or
    # just below the budget
    serves, _ = consumption(price_hi)
    return _complete(problem, serves, price_hi, STATUS_OPTIMAL)


def _refresh_prob_vec(n: np.ndarray) -> np.ndarray:
    small = n < 1e-8
    safe = np.where(small, 1.0, n)
    return np.where(small, 1.0 - n / 2.0 + n * n / 6.0, -np.expm1(-safe) / safe)


def _refresh_prob_grad_vec(n: np.ndarray) -> np.ndarray:
    # d/dn (1 - exp(-n))/n = ((n + 1) exp(-n) - 1) / n**2
    small = n < 1e-4
    safe = np.where(small, 1.0, n)
    exact = ((safe + 1.0) * np.exp(-safe) - 1.0) / (safe * safe)
    series = -0.5 + n / 3.0 - n * n / 8.0
    return np.where(small, series, exact)


def _equal_allocation(total: float, item_count: int) -> float:
    # n + exp(-n) = total / item_count, root in n >= 0
    target = total / item_count
    lo, hi = 0.0, max(target, 1.0)
    while hi + math.exp(-hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid + math.exp(-mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_projected_gradient(
    problem: OptProblem,
    max_iters: int = 200_000,
    patience: int = 100,
    min_improvement: float = 1e-10,
) -> OptResult:
    """Reference solver: gradient steps retracted to the budget surface.

    The optimum always spends the full allowance, so iterates stay on the
    surface: each step moves along the gradient component tangent to it,
    clips at zero, and rescales back.  Step length halves on failure and
    grows on success; the run stops once the objective improves by less
    than min_improvement over a patience-long window, and raises
    NonConvergence at the iteration cap.  Used to cross-check solve().
    """
    lam = problem.arrival_rates
    item_count = lam.size
    allowance = cycle_budget(problem)
    floor = problem.rates.aoi_floor

    if problem.aoi_budget < floor - _BOUNDARY_TOL:
        return _complete(problem, np.zeros(item_count), math.inf, STATUS_INFEASIBLE)
    if problem.aoi_budget <= floor + _BOUNDARY_TOL:
        return _complete(problem, np.zeros(item_count), math.inf, STATUS_BOUNDARY)

    def usage(serves: np.ndarray) -> float:
        return float(np.sum(serves + np.exp(-serves)))

    def retract(serves: np.ndarray) -> np.ndarray:
        # rescale to the surface; usage(t * serves) is increasing in t
        if not serves.any():
            raise NonConvergence("degenerate all-zero iterate")
        t_lo, t_hi = 0.0, 1.0
        for _ in range(400):
            if usage(t_hi * serves) >= allowance:
                break
            t_hi *= 2.0
        else:
            raise NonConvergence("retraction failed to bracket the surface")
        for _ in range(200):
            mid = 0.5 * (t_lo + t_hi)
            if usage(mid * serves) < allowance:
                t_lo = mid
            else:
                t_hi = mid
        return 0.5 * (t_lo + t_hi) * serves

    def objective(serves: np.ndarray) -> float:
        return float(np.dot(lam, _refresh_prob_vec(serves)))

    serves = np.full(item_count, _equal_allocation(allowance, item_count))
    best = objective(serves)
    window_best = best
    step = 1.0
    converged = False
    for iteration in range(1, max_iters + 1):
        grad = lam * _refresh_prob_grad_vec(serves)
        normal = 1.0 - np.exp(-serves)
        coeff = float(np.dot(grad, normal) / np.dot(normal, normal))
        descent = -(grad - coeff * normal)
        scale = float(np.max(np.abs(descent)))
        if scale == 0.0:
            converged = True
            break
        accepted = False
        for _ in range(60):
            trial = np.clip(serves + step * descent, 0.0, None)
            trial = retract(trial)
            value = objective(trial)
            if value < best:
                serves, best = trial, value
                step *= 1.25
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        if iteration % patience == 0:
            if window_best - best < min_improvement:
                converged = True
                break
            window_best = best
    if not converged:
        raise NonConvergence(
            f"no convergence within {max_iters} iterations (objective {best!r})"
        )
    normal = 1.0 - np.exp(-serves)
    grad = lam * _refresh_prob_grad_vec(serves)
    dual = -float(np.dot(grad, normal) / np.dot(normal, normal))
    return _complete(problem, serves, dual, STATUS_OPTIMAL)


def solve_per_class(problems) -> list[OptResult]:
    """Independently solve one instance per traffic class.

    Classes with distinct age requirements decouple: each class's weighted
    age constraint involves only its own windows, so the joint problem is
    exactly the concatenation of the per-class solutions.
    """
    return [solve(p) for p in problems]
