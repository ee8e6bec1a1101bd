# Layer: core — thread-safe domain state shared by gateway request handlers.

import logging
import math
import threading
from typing import Optional

from .exceptions import ValidationError
from .models import LedgerSnapshot, RoutingDecision, RoutingPolicy
from .routing import adapt, decide

_log = logging.getLogger(__name__)


class CostLedger:
    """Monotone local/remote request counters and accumulated remote cost.

    Updates are atomic under one lock; ``snapshot()`` returns a consistent
    immutable view.
    """

    def __init__(self, currency_unit: str = "USD") -> None:
        self._lock = threading.Lock()
        self._local = 0
        self._remote = 0
        self._cost = 0.0
        self.currency_unit = currency_unit

    def record_local(self) -> LedgerSnapshot:
        with self._lock:
            self._local += 1
            return self._snapshot()

    def record_remote(self, cost_units: float) -> LedgerSnapshot:
        cost = float(cost_units)
        if not math.isfinite(cost) or cost < 0.0:
            raise ValidationError(f"remote cost must be finite and >= 0, got {cost_units!r}")
        with self._lock:
            self._remote += 1
            self._cost += cost
            return self._snapshot()

    def snapshot(self) -> LedgerSnapshot:
        with self._lock:
            return self._snapshot()

    def _snapshot(self) -> LedgerSnapshot:
        return LedgerSnapshot(self._local, self._remote, self._cost, self.currency_unit)


class AdaptiveRouter:
    """Routing policy plus optional online adaptation, serialized by a lock.

    ``route()`` decides against the current threshold and, when adaptation
    is enabled, applies the controller step before releasing the lock, so
    decisions are linearizable with respect to threshold updates.
    """

    def __init__(self, policy: RoutingPolicy, adaptation_enabled: bool = False) -> None:
        if adaptation_enabled and policy.adaptation is None:
            raise ValidationError("adaptation enabled but the policy has no adaptation state")
        self._lock = threading.Lock()
        self._policy = policy
        self.adaptation_enabled = adaptation_enabled

    @property
    def policy(self) -> RoutingPolicy:
        return self.snapshot()

    def snapshot(self) -> RoutingPolicy:
        """Current policy, including the latest adaptation state."""
        with self._lock:
            return self._policy

    def route(self, score: float) -> RoutingDecision:
        with self._lock:
            decision = decide(score, self._policy)
            if self.adaptation_enabled:
                state = self._policy.adaptation
                _, self._policy = adapt(state, self._policy, decision)
            _log.debug(
                "score=%.6g threshold=%.6g -> %s",
                score, decision.threshold_used, decision.route.value,
            )
            return decision

    def replace_policy(self, policy: RoutingPolicy) -> Optional[RoutingPolicy]:
        with self._lock:
            previous, self._policy = self._policy, policy
            return previous
