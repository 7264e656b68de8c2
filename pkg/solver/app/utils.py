"""
시간 유틸리티: 실행 기록용 서울 시각, 시간 예산 측정용 스톱워치
"""
import time
from datetime import datetime, timezone, timedelta

# 서울 시간대 (UTC+9)
SEOUL_TIMEZONE = timezone(timedelta(hours=9))


def now_seoul() -> datetime:
    """현재 서울 시간 반환 (UTC+9)"""
    return datetime.now(SEOUL_TIMEZONE)


def now_seoul_iso() -> str:
    """현재 서울 시간을 ISO 형식 문자열로 반환"""
    return now_seoul().isoformat()


class Stopwatch:
    """단계별 경과 시간 측정"""

    def __init__(self):
        self._start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._start

    def expired(self, budget_seconds: float) -> bool:
        return self.elapsed() >= budget_seconds
