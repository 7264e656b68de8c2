"""
몬테카를로 시뮬레이션 서비스
결합 FSC의 할인 누적 보상 추정 (evaluate_joint 교차 검증용)
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..models.fsc import Fsc
from ..models.pomdp import DecPomdp
from .fsc_service import check_alphabets

logger = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    """시뮬레이션 결과 (평균 ± 표준오차)"""
    mean: float
    stderr: float
    episodes: int
    horizon: int


def _sample_rows(cumulative: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """행별 누적 분포에서 인덱스 하나씩 추출"""
    u = rng.random(cumulative.shape[0]) * cumulative[:, -1]
    index = (cumulative <= u[:, np.newaxis]).sum(axis=1)
    return np.minimum(index, cumulative.shape[1] - 1)


def simulate(
    d: DecPomdp,
    fscs: Sequence[Fsc],
    episodes: int,
    horizon: int,
    rng: np.random.Generator,
) -> SimulationResult:
    """
    에피소드를 벡터화해 동시에 진행
    반환 값은 horizon에서 잘린 할인 누적 보상의 평균과 표준오차
    """
    for j, f in enumerate(fscs):
        check_alphabets(f, d.action_labels[j], d.observation_labels[j])
    actions = d.joint_actions
    observations = d.joint_observations
    action_cdf = [np.cumsum(f.action_rule, axis=1) for f in fscs]
    node_cdf = [np.cumsum(f.node_transition, axis=2) for f in fscs]
    transition_cdf = np.cumsum(d.transitions, axis=2)
    observation_cdf = np.cumsum(d.observations, axis=2)

    states = _sample_rows(np.tile(np.cumsum(d.initial_belief), (episodes, 1)), rng)
    nodes = np.zeros((episodes, d.n_agents), dtype=np.int64)
    returns = np.zeros(episodes)
    weight = 1.0
    for _ in range(horizon):
        joint_a = np.zeros(episodes, dtype=np.int64)
        for j in range(d.n_agents):
            a_j = _sample_rows(action_cdf[j][nodes[:, j]], rng)
            joint_a += a_j * actions.strides[j]
        returns += weight * d.rewards[states, joint_a]
        states = _sample_rows(transition_cdf[joint_a, states], rng)
        joint_o = _sample_rows(observation_cdf[joint_a, states], rng)
        parts = observations.components[joint_o]
        for j in range(d.n_agents):
            nodes[:, j] = _sample_rows(node_cdf[j][nodes[:, j], parts[:, j]], rng)
        weight *= d.discount

    mean = float(returns.mean())
    stderr = float(returns.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    logger.debug(f"[SIM] {episodes}회 × {horizon}스텝 - 평균 {mean:.4f} ± {stderr:.4f}")
    return SimulationResult(mean=mean, stderr=stderr, episodes=episodes, horizon=horizon)
