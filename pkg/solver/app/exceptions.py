"""
예외 모듈
각 예외는 CLI 종료 코드를 함께 가집니다.
"""
from typing import Optional


class JespError(Exception):
    """솔버 공통 예외"""

    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(JespError):
    """잘못된 설정 또는 플래그"""

    exit_code = 2


class ProblemFormatError(JespError):
    """문제 파일 파싱 실패"""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"{line}행: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line


class DpomdpSyntaxError(ProblemFormatError):
    """문법 오류 (기대한 토큰과 다름)"""

    def __init__(self, line: Optional[int], expected: str, found: str = ""):
        detail = f"{expected} 필요" + (f" ('{found}' 발견)" if found else "")
        super().__init__(detail, line)
        self.expected = expected


class DimensionMismatch(ProblemFormatError):
    """행/행렬 크기 불일치"""


class UnknownIdentifier(ProblemFormatError):
    """정의되지 않은 상태/행동/관측 이름"""


class NormalizationError(ProblemFormatError):
    """확률 합이 허용 오차(1e-6)를 넘게 어긋남"""


class AlphabetMismatch(JespError):
    """FSC와 문제의 행동/관측 집합 불일치"""

    exit_code = 2


class ZeroProbabilityObservation(JespError):
    """Pr(o|b,a) = 0 인 관측으로 신념 갱신 시도"""


class CapacityExceeded(JespError):
    """모델 크기 상한 초과"""

    exit_code = 4


class StochasticActionRuleUnsupported(JespError):
    """지연(lagged) 정식화는 결정적 행동 규칙만 지원"""

    exit_code = 2


class NonConvergence(JespError):
    """FSC 평가 반복 상한 도달 (모델 오류 신호)"""


class RestartTimeout(JespError):
    """재시작 시간 예산 초과"""

    exit_code = 3
