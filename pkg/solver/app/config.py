"""
환경 설정 모듈
솔버 기본값, 로깅, Sentry 등의 설정을 관리합니다.
"""
from pydantic_settings import BaseSettings
from functools import lru_cache
from typing import Optional


class Settings(BaseSettings):
    """애플리케이션 설정"""

    # 앱 설정
    app_env: str = "development"
    log_level: Optional[str] = None  # 비어 있으면 app_env 기준으로 결정

    # POMDP 솔버 설정
    solver_epsilon: float = 0.001  # 목표 상/하한 간격
    solver_timeout_seconds: float = 5.0  # 최적 응답 1회당 시간 예산
    solver_max_trials: Optional[int] = None  # None이면 시간 예산만 사용
    solver_max_alpha_vectors: int = 2000  # α-벡터 개수 상한
    solver_max_depth: int = 200  # 탐색 깊이 상한

    # FSC 평가 설정
    eval_epsilon: float = 0.001  # 벨만 잔차
    eval_max_iterations: int = 1_000_000

    # 지역 탐색 설정
    restart_timeout_seconds: float = 7200.0
    max_init_nodes: int = 5  # 랜덤 초기 FSC 최대 노드 수
    acceptance_margin: float = 1e-9

    # 벤치마크 설정
    bench_gamma: float = 0.9
    bench_solver_timeout_seconds: float = 30.0  # Grid3*3 급 문제용

    # 용량 제한
    flatten_entry_cap: int = 10**8  # |⨯A|·|⨯Ω| 상한
    extended_state_cap: int = 10**7  # 소거 전 확장 상태 수 상한

    # 병렬 처리
    jobs: int = 1

    sentry_dsn: str | None = None

    @property
    def effective_log_level(self) -> str:
        """로그 레벨 반환 (프로덕션은 INFO)"""
        if self.log_level:
            return self.log_level.upper()
        return "INFO" if self.app_env == "production" else "DEBUG"

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        env_prefix = "JESP_"
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """설정 싱글톤 인스턴스 반환"""
    return Settings()
