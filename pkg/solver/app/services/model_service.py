"""
모델 서비스
관측 확률, 신념 갱신, MPOMDP 평탄화, 정규화 검사
"""
import logging
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from ..config import get_settings
from ..exceptions import CapacityExceeded, NormalizationError, ZeroProbabilityObservation
from ..models.pomdp import Belief, DecPomdp, JointSpace, Pomdp, Provenance

logger = logging.getLogger(__name__)

# 정규화 허용 오차
STRICT_TOLERANCE = 1e-9
RENORMALIZE_TOLERANCE = 1e-6


def normalize_rows(table: np.ndarray, what: str, axis: int = -1) -> Tuple[np.ndarray, int]:
    """
    확률 행 정규화 검사
    1e-9 이내면 그대로, 1e-6 이내면 경고 후 재정규화, 그 이상이면 NormalizationError
    Returns: (table, 재정규화한 행 수)
    """
    if np.any(table < -STRICT_TOLERANCE) or np.any(table > 1 + STRICT_TOLERANCE):
        raise NormalizationError(f"{what}: [0, 1] 범위를 벗어난 확률")
    table = np.clip(table, 0.0, None)
    sums = table.sum(axis=axis, keepdims=True)
    error = np.abs(sums - 1.0)
    worst = float(error.max()) if error.size else 0.0
    if worst > RENORMALIZE_TOLERANCE:
        raise NormalizationError(f"{what}: 확률 합 오차 {worst:.3g} (허용 {RENORMALIZE_TOLERANCE})")
    loose = error > STRICT_TOLERANCE
    count = int(loose.sum())
    if count:
        logger.warning(f"[MODEL] {what}: {count}개 행 재정규화 (최대 오차 {worst:.3g})")
        table = np.where(loose, table / sums, table)
    return table, count


def validate_dec_pomdp(d: DecPomdp) -> None:
    """불변 조건 검사 (정규화, 할인율)"""
    if not 0.0 < d.discount < 1.0:
        raise NormalizationError(f"할인율은 (0, 1) 구간이어야 합니다: {d.discount}")
    for table, what in ((d.transitions, "T"), (d.observations, "O")):
        sums = table.sum(axis=-1)
        if np.abs(sums - 1.0).max() > STRICT_TOLERANCE:
            raise NormalizationError(f"{what} 행 합이 1이 아닙니다")
    if abs(d.initial_belief.sum() - 1.0) > STRICT_TOLERANCE:
        raise NormalizationError("초기 신념 합이 1이 아닙니다")


def validate_pomdp(m: Pomdp) -> None:
    """POMDP 불변 조건 검사"""
    if not 0.0 < m.discount < 1.0:
        raise NormalizationError(f"할인율은 (0, 1) 구간이어야 합니다: {m.discount}")
    for a, t_a in enumerate(m.transitions):
        sums = np.asarray(t_a.sum(axis=1)).ravel()
        if np.abs(sums - 1.0).max() > STRICT_TOLERANCE:
            raise NormalizationError(f"T 행 합이 1이 아닙니다 (행동 {m.action_labels[a]})")
    if np.abs(m.observations.sum(axis=-1) - 1.0).max() > STRICT_TOLERANCE:
        raise NormalizationError("O 행 합이 1이 아닙니다")
    if abs(m.initial_belief.sum() - 1.0) > STRICT_TOLERANCE:
        raise NormalizationError("초기 신념 합이 1이 아닙니다")


def _check_indices(m: Pomdp, a: int, o: int) -> None:
    if not 0 <= a < m.n_actions:
        raise IndexError(f"행동 인덱스 {a} 범위 초과")
    if not 0 <= o < m.n_observations:
        raise IndexError(f"관측 인덱스 {o} 범위 초과")


def _dense(b) -> np.ndarray:
    return b.to_dense() if isinstance(b, Belief) else np.asarray(b, dtype=float)


def predict(m: Pomdp, b: np.ndarray, a: int) -> np.ndarray:
    """Σ_s b(s)·T(s, a, s')"""
    return m.transposed_transitions[a] @ b


def observation_distribution(m: Pomdp, b: np.ndarray, a: int) -> np.ndarray:
    """o별 Pr(o | b, a)"""
    return predict(m, b, a) @ m.observations[a]


def observation_prob(m: Pomdp, b, a: int, o: int) -> float:
    """Pr(o | b, a) = Σ_{s,s'} b(s)·T(s,a,s')·O(a,s',o)"""
    _check_indices(m, a, o)
    return float(predict(m, _dense(b), a) @ m.observations[a, :, o])


def unnormalized_update(m: Pomdp, b: np.ndarray, a: int, o: int) -> np.ndarray:
    """O(a,s',o)·Σ_s T(s,a,s')·b(s) (합 = Pr(o|b,a))"""
    return predict(m, b, a) * m.observations[a, :, o]


def update_dense(m: Pomdp, b: np.ndarray, a: int, o: int) -> Tuple[np.ndarray, float]:
    """밀집 벡터 신념 갱신, (사후 신념, Pr(o|b,a)) 반환"""
    posterior = unnormalized_update(m, b, a, o)
    prob = float(posterior.sum())
    if prob <= 0.0:
        raise ZeroProbabilityObservation(
            f"Pr(o={m.observation_labels[o]} | b, a={m.action_labels[a]}) = 0"
        )
    posterior = posterior / prob
    posterior[posterior < 1e-12] = 0.0
    return posterior / posterior.sum(), prob


def belief_update(m: Pomdp, b, a: int, o: int) -> Belief:
    """b^{a,o}(s') ∝ O(a,s',o)·Σ_s T(s,a,s')·b(s)"""
    _check_indices(m, a, o)
    posterior, _ = update_dense(m, _dense(b), a, o)
    return Belief.from_dense(posterior)


def flatten_mpomdp(d: DecPomdp, entry_cap: int | None = None) -> Pomdp:
    """
    Dec-POMDP → MPOMDP (모든 관측을 공유하는 중앙 제어기)
    행동 집합 ⨯_i A^i, 관측 집합 ⨯_i Ω^i
    """
    cap = entry_cap if entry_cap is not None else get_settings().flatten_entry_cap
    joint_a: JointSpace = d.joint_actions
    joint_o: JointSpace = d.joint_observations
    if joint_a.size * joint_o.size > cap:
        raise CapacityExceeded(
            f"|⨯A|·|⨯Ω| = {joint_a.size * joint_o.size} 이 상한 {cap} 을 넘습니다"
        )
    action_labels = tuple(d.joint_action_label(a) for a in range(joint_a.size))
    observation_labels = tuple(d.joint_observation_label(o) for o in range(joint_o.size))
    if d.n_agents == 1:
        action_labels = d.action_labels[0]
        observation_labels = d.observation_labels[0]
    transitions = tuple(sp.csr_matrix(d.transitions[a]) for a in range(joint_a.size))
    logger.debug(
        f"[MODEL] MPOMDP 평탄화 - |S|={d.n_states}, |A|={joint_a.size}, |Ω|={joint_o.size}"
    )
    return Pomdp(
        state_labels=d.state_labels,
        action_labels=action_labels,
        observation_labels=observation_labels,
        transitions=transitions,
        observations=d.observations,
        rewards=d.rewards,
        initial_belief=d.initial_belief,
        discount=d.discount,
        provenance=Provenance.MPOMDP if d.n_agents > 1 else Provenance.NATIVE,
        joint_actions=joint_a,
        joint_observations=joint_o,
    )


def pomdp_as_dec_pomdp(m: Pomdp) -> DecPomdp:
    """단일 에이전트 POMDP를 1-에이전트 Dec-POMDP로 감쌈"""
    dense_t = np.stack([t_a.toarray() for t_a in m.transitions])
    return DecPomdp(
        agent_labels=("agent0",),
        state_labels=m.state_labels,
        action_labels=(m.action_labels,),
        observation_labels=(m.observation_labels,),
        transitions=dense_t,
        observations=m.observations,
        rewards=m.rewards,
        initial_belief=m.initial_belief,
        discount=m.discount,
    )
