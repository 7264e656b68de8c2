"""
유한 상태 제어기(FSC) 모델
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


@dataclass
class FscNode:
    """노드 메타데이터 (평가에는 쓰이지 않음)"""
    belief: Optional[np.ndarray] = None  # 대표 신념 (원본 POMDP 상태 공간)
    weight: float = 0.0
    source_alpha_index: Optional[int] = None


@dataclass(eq=False)
class Fsc:
    """
    FSC ⟨N, η, ψ⟩, 시작 노드는 항상 0

    action_rule[n, a] = ψ(n, a), node_transition[n, o, n'] = η(n, o, n')
    """
    action_labels: Tuple[str, ...]
    observation_labels: Tuple[str, ...]
    action_rule: np.ndarray
    node_transition: np.ndarray
    nodes: List[FscNode] = field(default_factory=list)
    agent: int = 0
    state_labels: Optional[Tuple[str, ...]] = None  # 대표 신념의 상태 이름

    def __post_init__(self):
        if not self.nodes:
            self.nodes = [FscNode() for _ in range(self.n_nodes)]

    @property
    def n_nodes(self) -> int:
        return self.action_rule.shape[0]

    @property
    def start(self) -> int:
        return 0

    @property
    def deterministic(self) -> bool:
        return bool(
            np.all(np.isclose(self.action_rule.max(axis=1), 1.0))
            and np.all(np.isclose(self.node_transition.max(axis=2), 1.0))
        )

    def action_of(self, node: int) -> int:
        """결정적 노드의 행동 (확률적이면 최빈 행동, 동률은 낮은 인덱스)"""
        return int(np.argmax(self.action_rule[node]))

    def successor_of(self, node: int, observation: int) -> int:
        return int(np.argmax(self.node_transition[node, observation]))

    @classmethod
    def deterministic_from(
        cls,
        actions: List[int],
        successors: List[List[int]],
        action_labels: Tuple[str, ...],
        observation_labels: Tuple[str, ...],
        agent: int = 0,
    ) -> "Fsc":
        """노드별 행동과 (노드, 관측) 후속 노드 목록으로 결정적 FSC 생성"""
        n_nodes = len(actions)
        psi = np.zeros((n_nodes, len(action_labels)))
        psi[np.arange(n_nodes), actions] = 1.0
        eta = np.zeros((n_nodes, len(observation_labels), n_nodes))
        for n, row in enumerate(successors):
            for o, target in enumerate(row):
                eta[n, o, target] = 1.0
        return cls(
            action_labels=tuple(action_labels),
            observation_labels=tuple(observation_labels),
            action_rule=psi,
            node_transition=eta,
            agent=agent,
        )

    def relabeled(self, permutation: List[int]) -> "Fsc":
        """
        노드 번호 재배치 (permutation[old] = new)
        시작 노드는 새 번호 0이어야 합니다.
        """
        perm = np.asarray(permutation)
        if perm[0] != 0:
            raise ValueError("시작 노드는 0번에 남아 있어야 합니다")
        inverse = np.argsort(perm)
        psi = self.action_rule[inverse]
        eta = self.node_transition[inverse][:, :, inverse]
        nodes = [self.nodes[old] for old in inverse]
        return Fsc(
            action_labels=self.action_labels,
            observation_labels=self.observation_labels,
            action_rule=psi,
            node_transition=eta,
            nodes=nodes,
            agent=self.agent,
            state_labels=self.state_labels,
        )


@dataclass
class NodeValueTable:
    """노드별 α-벡터 (벨만 평가 방정식의 고정점)"""
    alphas: np.ndarray  # [n_nodes, n_states]
    residual: float
    iterations: int
    residuals: List[float] = field(default_factory=list)

    def value_at(self, belief: np.ndarray, node: int = 0) -> float:
        return float(self.alphas[node] @ belief)
