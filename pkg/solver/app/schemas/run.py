"""
실행 설정 및 실행 결과 스키마
"""
import logging
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from ..config import get_settings
from ..models.best_response import BestResponseForm
from .fsc import FscDocument

logger = logging.getLogger(__name__)


class InitMode(str, Enum):
    """초기 FSC 생성 방식"""
    RANDOM = "random"
    MPOMDP_D = "mpomdp-d"  # MPOMDP 해에서 결정적 추출
    MPOMDP_S = "mpomdp-s"  # MPOMDP 해에서 확률적 추출


class SolverConfig(BaseModel):
    """점 기반 POMDP 솔버 설정"""
    epsilon: float = Field(0.001, gt=0, description="b0에서의 목표 상/하한 간격")
    timeout_seconds: float = Field(5.0, gt=0, description="시간 예산 (초)")
    max_trials: Optional[int] = Field(None, ge=1, description="탐색 시행 상한 (결정적 실행용)")
    max_alpha_vectors: int = Field(2000, ge=1)
    max_depth: int = Field(200, ge=1)

    @classmethod
    def from_settings(cls, **overrides) -> "SolverConfig":
        settings = get_settings()
        values = {
            "epsilon": settings.solver_epsilon,
            "timeout_seconds": settings.solver_timeout_seconds,
            "max_trials": settings.solver_max_trials,
            "max_alpha_vectors": settings.solver_max_alpha_vectors,
            "max_depth": settings.solver_max_depth,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class RunConfig(BaseModel):
    """JESP 실행 설정"""
    init: InitMode = InitMode.MPOMDP_D
    restarts: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    gamma: Optional[float] = Field(None, gt=0, lt=1, description="할인율 덮어쓰기")
    restart_timeout_seconds: float = Field(7200.0, gt=0)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    eval_epsilon: float = Field(0.001, gt=0)
    acceptance_margin: float = Field(1e-9, ge=0)
    max_init_nodes: int = Field(5, ge=1)
    br_form: BestResponseForm = BestResponseForm.MOMDP
    agent_order: Optional[List[int]] = Field(None, description="라운드로빈 순서 (기본 0..|I|-1)")
    max_iterations: Optional[int] = Field(None, ge=1, description="지역 탐색 반복 상한 (스모크 테스트용)")
    jobs: int = Field(1, ge=1)

    @field_validator("agent_order")
    @classmethod
    def validate_agent_order(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is not None and sorted(v) != list(range(len(v))):
            raise ValueError("agent_order 는 0..|I|-1 의 순열이어야 합니다")
        return v

    @model_validator(mode="after")
    def single_restart_for_mpomdp(self) -> "RunConfig":
        # MPOMDP 초기화는 결정적이므로 재시작이 의미 없음
        if self.init != InitMode.RANDOM and self.restarts != 1:
            logger.warning(f"[CLI] {self.init.value} 초기화는 재시작 1회로 고정합니다 (요청 {self.restarts})")
            self.restarts = 1
        return self

    @classmethod
    def from_settings(cls, **overrides) -> "RunConfig":
        """Settings 기본값 위에 명시한 값만 덮어씀"""
        settings = get_settings()
        values = {
            "restart_timeout_seconds": settings.restart_timeout_seconds,
            "eval_epsilon": settings.eval_epsilon,
            "acceptance_margin": settings.acceptance_margin,
            "max_init_nodes": settings.max_init_nodes,
            "jobs": settings.jobs,
            "solver": SolverConfig.from_settings(),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class IterationRecord(BaseModel):
    """지역 탐색 반복 1회 기록"""
    iteration: int
    agent: int
    candidate_value: float
    accepted: bool
    best_value: float
    fsc_sizes: List[int]
    states_before_elimination: int
    states_after_elimination: int
    solver_lower_bound: float
    solver_upper_bound: float
    elapsed: float


class RestartReport(BaseModel):
    """재시작 1회 결과"""
    index: int
    seed: Optional[int] = None
    value: float
    initial_value: float
    converged: bool
    timed_out: bool
    iterations: int
    fsc_sizes: List[int]
    slack: Dict[str, float] = Field(default_factory=dict, description="에이전트별 ε-내쉬 여유")
    phases: Dict[str, float] = Field(default_factory=dict, description="단계별 경과 시간 (초)")
    trace: List[IterationRecord] = Field(default_factory=list)


class RunReport(BaseModel):
    """실행 결과 파일"""
    problem: str
    started_at: str
    finished_at: str
    config: RunConfig
    discount: float
    value: float
    best_restart: int
    mpomdp_upper_bound: Optional[float] = None
    slack: Dict[str, float] = Field(default_factory=dict)
    fscs: List[FscDocument]
    restarts: List[RestartReport]
