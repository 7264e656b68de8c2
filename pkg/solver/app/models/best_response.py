"""
최적 응답 POMDP 모델
확장 상태 e = ⟨s, n_≠i, õ⟩
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .pomdp import Pomdp

# 아직 관측이 없음을 나타내는 표식 (초기 신념에만 등장)
NULL_OBSERVATION = -1


class BestResponseForm(str, Enum):
    """확장 상태 정식화"""
    MOMDP = "momdp"    # ⟨s, n_≠i^t, õ_i^t⟩ (기본)
    LAGGED = "lagged"  # ⟨s, n_≠i^{t-1}, õ_≠i^t⟩


@dataclass(frozen=True)
class ExtendedState:
    """
    확장 상태
    MOMDP 정식화에서 own_obs는 에이전트 i의 관측,
    지연 정식화에서는 다른 에이전트들의 결합 관측 인덱스입니다.
    """
    s: int
    n_others: Tuple[int, ...]
    own_obs: int = NULL_OBSERVATION

    @property
    def is_sentinel(self) -> bool:
        return self.own_obs == NULL_OBSERVATION


@dataclass(eq=False)
class BestResponsePomdp:
    """확장 상태 위의 POMDP와 인덱스 표"""
    pomdp: Pomdp
    states: List[ExtendedState]
    agent: int
    form: BestResponseForm = BestResponseForm.MOMDP
    states_before_elimination: int = 0
    states_after_elimination: int = 0
    index: Dict[ExtendedState, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {e: k for k, e in enumerate(self.states)}

    @property
    def elimination_ratio(self) -> float:
        if not self.states_after_elimination:
            return float("inf")
        return self.states_before_elimination / self.states_after_elimination

    def state_of(self, index: int) -> ExtendedState:
        return self.states[index]

    def index_of(self, state: ExtendedState) -> Optional[int]:
        return self.index.get(state)
