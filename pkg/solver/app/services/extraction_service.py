"""
FSC 추출 서비스
α-벡터 집합 Γ → FSC

- extract_fsc: 최적 응답 Γ에서 결정적 FSC (노드 = 도달한 α-벡터)
- extract_initial_fsc: MPOMDP Γ에서 에이전트별 초기 FSC (M-S 확률적 / M-D 결정적)
"""
import logging
from collections import deque
from enum import Enum
from typing import Dict, List

import numpy as np

from ..models.alpha import AlphaVectorSet
from ..models.fsc import Fsc, FscNode
from ..models.pomdp import Belief, DecPomdp, Pomdp
from .model_service import observation_distribution, unnormalized_update

logger = logging.getLogger(__name__)

# 이보다 작은 관측 확률은 불가능한 관측 (자기 루프)
IMPOSSIBLE_OBSERVATION = 1e-12


class ExtractionVariant(str, Enum):
    """MPOMDP 추출 방식"""
    STOCHASTIC = "M-S"
    DETERMINISTIC = "M-D"


class _NodeTable:
    """α-벡터 인덱스를 키로 하는 노드 목록 (FIFO 처리 순서)"""

    def __init__(self):
        self.key_to_node: Dict[int, int] = {}
        self.keys: List[int] = []
        self.beliefs: List[np.ndarray] = []
        self.weights: List[float] = []
        self.frontier: deque = deque()

    def __len__(self) -> int:
        return len(self.keys)

    def visit(self, key: int, belief: np.ndarray, weight: float) -> int:
        """키에 해당하는 노드를 찾거나 만들고, 있으면 대표 신념을 가중 평균으로 병합"""
        node = self.key_to_node.get(key)
        if node is None:
            node = len(self.keys)
            self.key_to_node[key] = node
            self.keys.append(key)
            self.beliefs.append(belief.copy())
            self.weights.append(weight)
            self.frontier.append(node)
            return node
        total = self.weights[node] + weight
        if total > 0:
            self.beliefs[node] = (self.weights[node] * self.beliefs[node] + weight * belief) / total
        self.weights[node] = total
        return node

    def metadata(self) -> List[FscNode]:
        return [
            FscNode(belief=b, weight=w, source_alpha_index=k)
            for b, w, k in zip(self.beliefs, self.weights, self.keys)
        ]


def _dense(b) -> np.ndarray:
    return b.to_dense() if isinstance(b, Belief) else np.asarray(b, dtype=float)


def _posterior(m: Pomdp, belief: np.ndarray, a: int, o: int) -> np.ndarray:
    posterior = unnormalized_update(m, belief, a, o)
    return posterior / posterior.sum()


def extract_fsc(
    gamma_set: AlphaVectorSet,
    m: Pomdp,
    b0=None,
    agent: int = 0,
) -> Fsc:
    """
    Γ에서 결정적 FSC 추출
    시작 노드 = argmax_α α·b0, 각 노드·관측마다 갱신된 신념의 argmax α 노드로 전이
    불가능한 관측은 자기 루프
    """
    if not len(gamma_set):
        raise ValueError("Γ가 비어 있습니다")
    start = _dense(b0) if b0 is not None else m.initial_belief.astype(float)
    table = _NodeTable()
    table.visit(gamma_set.best(start)[0], start, 1.0)
    successors: Dict[int, List[int]] = {}
    while table.frontier:
        node = table.frontier.popleft()
        action = gamma_set[table.keys[node]].action
        belief = table.beliefs[node]
        distribution = observation_distribution(m, belief, action)
        row = []
        for o in range(m.n_observations):
            p = float(distribution[o])
            if p < IMPOSSIBLE_OBSERVATION:
                row.append(node)
                continue
            updated = _posterior(m, belief, action, o)
            key, _ = gamma_set.best(updated)
            row.append(table.visit(key, updated, table.weights[node] * p))
        successors[node] = row
    actions = [gamma_set[k].action for k in table.keys]
    fsc = Fsc.deterministic_from(
        actions=actions,
        successors=[successors[n] for n in range(len(table))],
        action_labels=m.action_labels,
        observation_labels=m.observation_labels,
        agent=agent,
    )
    fsc.nodes = table.metadata()
    fsc.state_labels = m.state_labels
    logger.debug(f"[EXTRACT] 에이전트 {agent} FSC 추출 - 노드 {fsc.n_nodes}개 (|Γ|={len(gamma_set)})")
    return fsc


def extract_initial_fsc(
    gamma_set: AlphaVectorSet,
    mp: Pomdp,
    d: DecPomdp,
    agent: int,
    variant: ExtractionVariant = ExtractionVariant.DETERMINISTIC,
) -> Fsc:
    """
    MPOMDP Γ에서 에이전트 agent의 초기 FSC 추출

    노드 행동 = α-벡터 결합 행동의 agent 성분.
    M-S: o_≠i 마다 η(n,o_i,n') += Pr(o_≠i | o_i, b, a)
    M-D: 가장 확률 높은 o_≠i 하나로 결정적 전이 (동률은 낮은 결합 인덱스)
    """
    if not len(gamma_set):
        raise ValueError("Γ가 비어 있습니다")
    joint_actions = d.joint_actions
    joint_observations = d.joint_observations
    n_own_obs = len(d.observation_labels[agent])
    start = mp.initial_belief.astype(float)
    table = _NodeTable()
    table.visit(gamma_set.best(start)[0], start, 1.0)
    transitions: Dict[int, List[Dict[int, float]]] = {}
    while table.frontier:
        node = table.frontier.popleft()
        joint_action = gamma_set[table.keys[node]].action
        belief = table.beliefs[node]
        weight = table.weights[node]
        distribution = observation_distribution(mp, belief, joint_action)
        rows: List[Dict[int, float]] = []
        for o_i in range(n_own_obs):
            candidates = joint_observations.matching(agent, o_i)
            p_own = float(distribution[candidates].sum())
            if p_own < IMPOSSIBLE_OBSERVATION:
                rows.append({node: 1.0})
                continue
            row: Dict[int, float] = {}
            if variant == ExtractionVariant.DETERMINISTIC:
                o = int(candidates[int(np.argmax(distribution[candidates]))])
                updated = _posterior(mp, belief, joint_action, o)
                target = table.visit(gamma_set.best(updated)[0], updated, weight * p_own)
                row[target] = 1.0
            else:
                for o in candidates:
                    p = float(distribution[o])
                    if p < IMPOSSIBLE_OBSERVATION:
                        continue
                    updated = _posterior(mp, belief, joint_action, int(o))
                    target = table.visit(gamma_set.best(updated)[0], updated, weight * p)
                    row[target] = row.get(target, 0.0) + p / p_own
                total = sum(row.values())
                row = {k: v / total for k, v in row.items()}
            rows.append(row)
        transitions[node] = rows

    n_nodes = len(table)
    psi = np.zeros((n_nodes, len(d.action_labels[agent])))
    eta = np.zeros((n_nodes, n_own_obs, n_nodes))
    for node, key in enumerate(table.keys):
        own_action = joint_actions.to_tuple(gamma_set[key].action)[agent]
        psi[node, own_action] = 1.0
        for o_i, row in enumerate(transitions[node]):
            for target, p in row.items():
                eta[node, o_i, target] = p
    fsc = Fsc(
        action_labels=d.action_labels[agent],
        observation_labels=d.observation_labels[agent],
        action_rule=psi,
        node_transition=eta,
        nodes=table.metadata(),
        agent=agent,
        state_labels=d.state_labels,
    )
    logger.debug(f"[EXTRACT] 에이전트 {agent} 초기 FSC ({variant.value}) - 노드 {n_nodes}개")
    return fsc


def extract_initial_fscs(
    gamma_set: AlphaVectorSet,
    mp: Pomdp,
    d: DecPomdp,
    variant: ExtractionVariant,
) -> List[Fsc]:
    return [extract_initial_fsc(gamma_set, mp, d, i, variant) for i in range(d.n_agents)]
