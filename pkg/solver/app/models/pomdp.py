"""
확률 모델
Dec-POMDP, POMDP, 신념(belief) 및 결합(joint) 인덱스 공간
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..exceptions import ConfigError

# 결합 행동·관측 이름의 에이전트 구분자 (.pomdp 토큰 안전)
JOINT_LABEL_SEPARATOR = "+"


def check_discount(discount: float) -> float:
    """할인율 덮어쓰기 값 검사 (0 < γ < 1)"""
    if not 0.0 < discount < 1.0:
        raise ConfigError(f"할인율은 (0, 1) 구간이어야 합니다: {discount}")
    return float(discount)


class Provenance(str, Enum):
    """POMDP 생성 출처"""
    NATIVE = "native"                # 파일에서 직접 읽음
    MPOMDP = "mpomdp"                # Dec-POMDP 평탄화
    BEST_RESPONSE = "best-response"  # 최적 응답 컴파일


class JointSpace:
    """
    에이전트별 집합의 곱집합 ⨯_i X^i 인덱스 공간
    에이전트 0이 최상위 자리 (joint = x_0·|X^1|·… + … + x_n)
    """

    def __init__(self, sizes: Sequence[int]):
        self.sizes: Tuple[int, ...] = tuple(int(n) for n in sizes)
        self.size = int(np.prod(self.sizes)) if self.sizes else 1
        # 각 자리의 가중치
        strides = []
        acc = 1
        for n in reversed(self.sizes):
            strides.append(acc)
            acc *= n
        self.strides: Tuple[int, ...] = tuple(reversed(strides))

    @cached_property
    def components(self) -> np.ndarray:
        """[size, n_agents] 배열: 결합 인덱스 → 에이전트별 인덱스"""
        if not self.sizes:
            return np.zeros((1, 0), dtype=np.int64)
        grid = np.indices(self.sizes).reshape(len(self.sizes), -1).T
        return np.ascontiguousarray(grid, dtype=np.int64)

    def to_index(self, parts: Sequence[int]) -> int:
        if len(parts) != len(self.sizes):
            raise IndexError(f"구성 요소 개수 {len(parts)} != {len(self.sizes)}")
        index = 0
        for value, n, stride in zip(parts, self.sizes, self.strides):
            if not 0 <= value < n:
                raise IndexError(f"인덱스 {value} 범위 초과 (0..{n - 1})")
            index += int(value) * stride
        return index

    def to_tuple(self, index: int) -> Tuple[int, ...]:
        if not 0 <= index < self.size:
            raise IndexError(f"결합 인덱스 {index} 범위 초과 (0..{self.size - 1})")
        return tuple(int(x) for x in self.components[index])

    def matching(self, agent: int, value: int) -> np.ndarray:
        """agent의 구성 요소가 value인 결합 인덱스들"""
        return np.flatnonzero(self.components[:, agent] == value)

    def __eq__(self, other) -> bool:
        return isinstance(other, JointSpace) and self.sizes == other.sizes

    def __repr__(self) -> str:
        return f"JointSpace({self.sizes})"


@dataclass(frozen=True, eq=False)
class DecPomdp:
    """
    Dec-POMDP ⟨I, S, A, Ω, T, O, R, b0, γ⟩ (무한 지평)

    transitions[a, s, s'], observations[a, s', o], rewards[s, a] 에서
    a, o는 결합 인덱스입니다.
    """
    agent_labels: Tuple[str, ...]
    state_labels: Tuple[str, ...]
    action_labels: Tuple[Tuple[str, ...], ...]
    observation_labels: Tuple[Tuple[str, ...], ...]
    transitions: np.ndarray
    observations: np.ndarray
    rewards: np.ndarray
    initial_belief: np.ndarray
    discount: float

    @property
    def n_agents(self) -> int:
        return len(self.agent_labels)

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    @cached_property
    def joint_actions(self) -> JointSpace:
        return JointSpace([len(a) for a in self.action_labels])

    @cached_property
    def joint_observations(self) -> JointSpace:
        return JointSpace([len(o) for o in self.observation_labels])

    def with_discount(self, discount: float) -> "DecPomdp":
        """할인율만 바꾼 사본"""
        discount = check_discount(discount)
        return DecPomdp(
            agent_labels=self.agent_labels,
            state_labels=self.state_labels,
            action_labels=self.action_labels,
            observation_labels=self.observation_labels,
            transitions=self.transitions,
            observations=self.observations,
            rewards=self.rewards,
            initial_belief=self.initial_belief,
            discount=float(discount),
        )

    def joint_action_label(self, index: int) -> str:
        parts = self.joint_actions.to_tuple(index)
        return JOINT_LABEL_SEPARATOR.join(self.action_labels[i][a] for i, a in enumerate(parts))

    def joint_observation_label(self, index: int) -> str:
        parts = self.joint_observations.to_tuple(index)
        return JOINT_LABEL_SEPARATOR.join(self.observation_labels[i][o] for i, o in enumerate(parts))


@dataclass(frozen=True, eq=False)
class Pomdp:
    """
    단일 에이전트 POMDP

    transitions는 행동별 희소 행렬 T_a[s, s'] 입니다.
    """
    state_labels: Tuple[str, ...]
    action_labels: Tuple[str, ...]
    observation_labels: Tuple[str, ...]
    transitions: Tuple[sp.csr_matrix, ...]
    observations: np.ndarray
    rewards: np.ndarray
    initial_belief: np.ndarray
    discount: float
    provenance: Provenance = Provenance.NATIVE
    joint_actions: Optional[JointSpace] = None
    joint_observations: Optional[JointSpace] = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    @property
    def n_actions(self) -> int:
        return len(self.action_labels)

    @property
    def n_observations(self) -> int:
        return len(self.observation_labels)

    @cached_property
    def observation_kernels(self) -> Tuple[Tuple[sp.csr_matrix, ...], ...]:
        """M[a][o] = T_a · diag(O[a, :, o]) = Pr(s', o | s, a)"""
        kernels = []
        for a, t_a in enumerate(self.transitions):
            kernels.append(tuple(
                sp.csr_matrix(t_a.multiply(self.observations[a, :, o][np.newaxis, :]))
                for o in range(self.n_observations)
            ))
        return tuple(kernels)

    @cached_property
    def transposed_transitions(self) -> Tuple[sp.csr_matrix, ...]:
        """신념 예측용 T_aᵀ"""
        return tuple(sp.csr_matrix(t_a.T) for t_a in self.transitions)

    def with_discount(self, discount: float) -> "Pomdp":
        discount = check_discount(discount)
        return Pomdp(
            state_labels=self.state_labels,
            action_labels=self.action_labels,
            observation_labels=self.observation_labels,
            transitions=self.transitions,
            observations=self.observations,
            rewards=self.rewards,
            initial_belief=self.initial_belief,
            discount=float(discount),
            provenance=self.provenance,
            joint_actions=self.joint_actions,
            joint_observations=self.joint_observations,
            metadata=dict(self.metadata),
        )

    def equals(self, other: "Pomdp", atol: float = 0.0) -> bool:
        """필드 단위 비교 (atol=0이면 정확히 일치)"""
        if (self.state_labels, self.action_labels, self.observation_labels) != (
            other.state_labels, other.action_labels, other.observation_labels
        ):
            return False
        if self.discount != other.discount:
            return False
        if len(self.transitions) != len(other.transitions):
            return False
        for mine, theirs in zip(self.transitions, other.transitions):
            if mine.shape != theirs.shape:
                return False
            diff = mine - theirs
            if diff.nnz and abs(diff).max() > atol:
                return False
        if self.observations.shape != other.observations.shape or self.rewards.shape != other.rewards.shape:
            return False
        return (
            np.allclose(self.observations, other.observations, rtol=0.0, atol=atol)
            and np.allclose(self.rewards, other.rewards, rtol=0.0, atol=atol)
            and np.allclose(self.initial_belief, other.initial_belief, rtol=0.0, atol=atol)
        )


# 정규화 후 버리는 확률 하한
BELIEF_DROP_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class Belief:
    """희소 신념 상태 (상태 인덱스 → 확률)"""
    indices: np.ndarray
    probs: np.ndarray
    n_states: int

    @classmethod
    def from_dense(cls, vector: np.ndarray) -> "Belief":
        """정규화 후 1e-12 미만 항목 제거"""
        vector = np.asarray(vector, dtype=float)
        total = vector.sum()
        if total <= 0:
            raise ValueError("합이 0인 벡터는 신념이 될 수 없습니다")
        normalized = vector / total
        keep = np.flatnonzero(normalized >= BELIEF_DROP_THRESHOLD)
        probs = normalized[keep]
        return cls(indices=keep, probs=probs / probs.sum(), n_states=len(vector))

    @classmethod
    def point(cls, state: int, n_states: int) -> "Belief":
        return cls(indices=np.array([state]), probs=np.array([1.0]), n_states=n_states)

    @classmethod
    def uniform(cls, n_states: int) -> "Belief":
        return cls.from_dense(np.ones(n_states))

    def to_dense(self) -> np.ndarray:
        vector = np.zeros(self.n_states)
        vector[self.indices] = self.probs
        return vector

    def __getitem__(self, state: int) -> float:
        hit = np.flatnonzero(self.indices == state)
        return float(self.probs[hit[0]]) if len(hit) else 0.0

    def __len__(self) -> int:
        return len(self.indices)
