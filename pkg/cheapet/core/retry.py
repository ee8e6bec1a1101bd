# Layer: core — pure Python, zero HTTP/file I/O imports.

import logging
import random
from typing import Optional

_log = logging.getLogger(__name__)


class BackoffStrategy:
    """Exponential backoff with full jitter and attempt tracking.

    Pure value object: no I/O, no sleeping. The un-jittered ceiling for
    retry ``n`` (0-based) is ``base_ms * 2**n`` capped at ``max_delay_ms``;
    the actual delay is drawn uniformly from ``[0, ceiling]``.
    """

    def __init__(
        self,
        max_retries: int = 3,
        base_delay_ms: float = 100,
        max_delay_ms: float = 10_000,
        backoff_factor: float = 2.0,
        rng: Optional[random.Random] = None,
    ) -> None:
        self.max_retries = max_retries
        self.base_delay_ms = base_delay_ms
        self.max_delay_ms = max_delay_ms
        self.backoff_factor = backoff_factor
        self.rng = rng or random.Random()
        self.retry_count = 0

    @property
    def max_attempts(self) -> int:
        return self.max_retries + 1

    def reset(self) -> None:
        self.retry_count = 0

    def should_retry(self) -> bool:
        return self.retry_count < self.max_retries

    def ceiling_ms(self, retry_index: int) -> float:
        delay = self.base_delay_ms * (self.backoff_factor**retry_index)
        return min(delay, self.max_delay_ms)

    def get_next_delay_ms(self) -> float:
        delay = self.rng.uniform(0.0, self.ceiling_ms(self.retry_count))
        self.retry_count += 1
        return delay

    def get_attempt_info(self) -> str:
        return f"Retry {self.retry_count}/{self.max_retries}"
