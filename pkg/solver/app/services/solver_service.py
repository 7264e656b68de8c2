"""
점 기반 POMDP 솔버 서비스 (HSVI 계열 휴리스틱 탐색)

- 하한 Γ: 블라인드 정책 α-벡터에서 시작, 방문 신념에서 점 기반 백업으로만 성장
- 상한: MDP 가치(꼭짓점) + 톱니(sawtooth) 보간 점 집합, 값은 줄어들기만 함
- 탐색: 상한 최대 행동, 가중 초과 간격 최대 관측으로 내려가며 돌아올 때 갱신
- 동률은 항상 낮은 인덱스
"""
import json
import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..exceptions import ProblemFormatError
from ..models.alpha import AlphaVector, AlphaVectorSet, SolveResult
from ..models.pomdp import Belief, Pomdp
from ..schemas.run import SolverConfig
from ..utils import Stopwatch
from .model_service import observation_distribution, unnormalized_update

logger = logging.getLogger(__name__)

# 이보다 작은 관측 확률은 없는 관측으로 취급
MIN_OBSERVATION_PROB = 1e-12
# 백업 결과를 Γ에 넣기 위한 최소 개선량
IMPROVEMENT_TOLERANCE = 1e-12
# MDP 상한 가치 반복 종료 잔차
MDP_RESIDUAL = 1e-9
MDP_MAX_ITERATIONS = 100_000
# Γ 상한 판정에 쓰는 최근 방문 신념 수
VISITED_WINDOW = 2000
# 이만큼 늘어날 때마다 지배 벡터 제거
PRUNE_INTERVAL = 16


def _dense(b) -> np.ndarray:
    return b.to_dense() if isinstance(b, Belief) else np.asarray(b, dtype=float)


def backup(m: Pomdp, b, gamma_set: AlphaVectorSet) -> AlphaVector:
    """
    점 기반 벨만 백업
    α_a = R(·,a) + γ Σ_o M_{a,o}·argmax_{α∈Γ} α·b^{a,o}, b에서 최대인 α_a 반환
    """
    belief = _dense(b)
    matrix = gamma_set.matrix
    best_vector, best_value, best_action = None, -np.inf, 0
    for a in range(m.n_actions):
        vector = m.rewards[:, a].astype(float)
        for kernel in m.observation_kernels[a]:
            if not kernel.nnz:
                continue
            successor = kernel.T @ belief
            if not successor.any():
                continue
            k = int(np.argmax(matrix @ successor))
            vector = vector + m.discount * (kernel @ matrix[k])
        value = float(vector @ belief)
        if value > best_value:
            best_vector, best_value, best_action = vector, value, a
    return AlphaVector(values=best_vector, action=best_action)


def blind_policy_vectors(m: Pomdp) -> List[AlphaVector]:
    """α_a = (I − γT_a)^{-1} R(·,a)"""
    identity = sp.identity(m.n_states, format="csc")
    vectors = []
    for a, t_a in enumerate(m.transitions):
        values = spla.spsolve(identity - m.discount * t_a.tocsc(), m.rewards[:, a].astype(float))
        vectors.append(AlphaVector(values=np.atleast_1d(values), action=a))
    return vectors


def mdp_upper_bound(m: Pomdp) -> np.ndarray:
    """
    완전 관측 MDP 가치 (상태별 상한)
    R_max/(1−γ)에서 내려오는 가치 반복이라 모든 반복값이 상한
    """
    values = np.full(m.n_states, m.rewards.max() / (1.0 - m.discount))
    for _ in range(MDP_MAX_ITERATIONS):
        q = np.stack([m.rewards[:, a] + m.discount * (t_a @ values) for a, t_a in enumerate(m.transitions)], axis=1)
        updated = np.minimum(q.max(axis=1), values)
        if np.abs(updated - values).max() < MDP_RESIDUAL:
            return updated
        values = updated
    return values


def prune(gamma_set: AlphaVectorSet) -> int:
    """
    점별(pointwise) 지배되는 벡터 제거, 제거한 개수 반환
    같은 벡터가 여럿이면 낮은 인덱스만 남김
    """
    matrix = gamma_set.matrix
    indices = np.arange(len(gamma_set))
    keep = []
    for i in indices:
        covers = np.all(matrix >= matrix[i], axis=1)
        strictly = np.any(matrix > matrix[i], axis=1) | (indices < i)
        covers[i] = False
        if not np.any(covers & strictly):
            keep.append(int(i))
    removed = len(gamma_set) - len(keep)
    if removed:
        gamma_set.keep(keep)
    return removed


class UpperBound:
    """꼭짓점 값 + 내부 점 집합의 톱니 보간 상한"""

    def __init__(self, corners: np.ndarray):
        self.corners = corners.astype(float)
        self.points: List[np.ndarray] = []
        self.values: List[float] = []
        self._matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.points)

    def value(self, belief: np.ndarray) -> float:
        corner_value = float(self.corners @ belief)
        if not self.points:
            return corner_value
        if self._matrix is None:
            self._matrix = np.vstack(self.points)
        points = self._matrix
        gains = np.asarray(self.values) - points @ self.corners
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(points > 0, belief[np.newaxis, :] / points, np.inf)
        scale = ratios.min(axis=1)
        return float(min(corner_value, corner_value + np.min(gains * scale)))

    def update(self, belief: np.ndarray, value: float) -> None:
        """value < 현재 상한일 때만 저장"""
        current = self.value(belief)
        if value >= current:
            return
        support = np.flatnonzero(belief)
        if len(support) == 1:
            self.corners[support[0]] = value
            return
        self.points.append(belief.copy())
        self.values.append(float(value))
        self._matrix = None


class PointBasedSolver:
    """HSVI 계열 점 기반 솔버"""

    def __init__(self, m: Pomdp, config: Optional[SolverConfig] = None):
        self.m = m
        self.config = config or SolverConfig.from_settings()
        self.gamma_set = AlphaVectorSet(blind_policy_vectors(m))
        prune(self.gamma_set)
        self.upper = UpperBound(mdp_upper_bound(m))
        self.visited: deque = deque(maxlen=VISITED_WINDOW)
        self._pruned_size = len(self.gamma_set)

    # ---------- 값 ----------

    def lower_value(self, belief: np.ndarray) -> float:
        return self.gamma_set.value(belief)

    def upper_value(self, belief: np.ndarray) -> float:
        return self.upper.value(belief)

    def _children(self, belief: np.ndarray, a: int) -> List[Tuple[int, float, np.ndarray]]:
        """(관측, 확률, 다음 신념) 목록"""
        distribution = observation_distribution(self.m, belief, a)
        children = []
        for o in range(self.m.n_observations):
            p = float(distribution[o])
            if p < MIN_OBSERVATION_PROB:
                continue
            posterior = unnormalized_update(self.m, belief, a, o)
            children.append((o, p, posterior / posterior.sum()))
        return children

    def _upper_q(self, belief: np.ndarray) -> np.ndarray:
        q = np.zeros(self.m.n_actions)
        for a in range(self.m.n_actions):
            continuation = sum(p * self.upper_value(child) for _, p, child in self._children(belief, a))
            q[a] = float(self.m.rewards[:, a] @ belief) + self.m.discount * continuation
        return q

    # ---------- 갱신 ----------

    def update(self, belief: np.ndarray) -> None:
        """신념 하나에서 하한 백업과 상한 갱신"""
        vector = backup(self.m, belief, self.gamma_set)
        if float(vector.values @ belief) > self.lower_value(belief) + IMPROVEMENT_TOLERANCE:
            self.gamma_set.add(vector)
        self.upper.update(belief, float(self._upper_q(belief).max()))
        self.visited.append(belief)

    def _enforce_cap(self, b0: np.ndarray) -> None:
        """|Γ| 상한 초과 시 방문 신념에서 최대가 되지 않는 벡터부터 제거"""
        cap = self.config.max_alpha_vectors
        if len(self.gamma_set) > cap or len(self.gamma_set) >= self._pruned_size + PRUNE_INTERVAL:
            prune(self.gamma_set)
            self._pruned_size = len(self.gamma_set)
        if len(self.gamma_set) <= cap:
            return
        beliefs = np.vstack(list(self.visited) + [b0])
        winners = np.argmax(beliefs @ self.gamma_set.matrix.T, axis=1)
        counts = np.bincount(winners, minlength=len(self.gamma_set))
        protected = int(winners[-1])
        order = sorted(range(len(self.gamma_set)), key=lambda k: (-counts[k], k))
        keep = [protected] + [k for k in order if k != protected][: cap - 1]
        self.gamma_set.keep(keep)

    def _explore(self, b0: np.ndarray) -> None:
        """상한-하한 간격이 충분히 작아질 때까지 한 경로를 내려가고 돌아오며 갱신"""
        path = []
        belief = b0
        epsilon = self.config.epsilon
        for depth in range(self.config.max_depth):
            threshold = epsilon * self.m.discount ** (-depth)
            if self.upper_value(belief) - self.lower_value(belief) <= threshold:
                break
            path.append(belief)
            action = int(np.argmax(self._upper_q(belief)))
            children = self._children(belief, action)
            if not children:
                break
            next_threshold = epsilon * self.m.discount ** (-(depth + 1))
            gaps = [
                p * (self.upper_value(child) - self.lower_value(child) - next_threshold)
                for _, p, child in children
            ]
            belief = children[int(np.argmax(gaps))][2]
        for visited in reversed(path):
            self.update(visited)

    # ---------- 실행 ----------

    def solve(self) -> SolveResult:
        watch = Stopwatch()
        b0 = self.m.initial_belief.astype(float)
        epsilon = self.config.epsilon
        history = []
        trials = 0
        self.update(b0)
        while True:
            lb, ub = self.lower_value(b0), self.upper_value(b0)
            history.append((trials, lb, ub, len(self.gamma_set), len(self.upper)))
            if ub - lb <= epsilon:
                break
            if self.config.max_trials is not None and trials >= self.config.max_trials:
                break
            if watch.expired(self.config.timeout_seconds):
                break
            self._explore(b0)
            self._enforce_cap(b0)
            trials += 1
        prune(self.gamma_set)
        lb, ub = self.lower_value(b0), self.upper_value(b0)
        result = SolveResult(
            gamma_set=self.gamma_set,
            lb_at_b0=lb,
            ub_at_b0=ub,
            iterations=trials,
            elapsed=watch.elapsed(),
            converged=ub - lb <= epsilon,
            history=history,
        )
        logger.debug(
            f"[SOLVER] |S|={self.m.n_states} - 시행 {trials}회, lb={lb:.4f}, ub={ub:.4f}, "
            f"|Γ|={len(self.gamma_set)}, {result.elapsed:.2f}s"
        )
        return result


def solve(m: Pomdp, config: Optional[SolverConfig] = None) -> SolveResult:
    """POMDP 풀이 (하한 Γ, b0에서의 상/하한)"""
    return PointBasedSolver(m, config).solve()


# ---------- Γ 덤프 ----------

def dump_alpha_vectors(gamma_set: AlphaVectorSet, m: Pomdp) -> str:
    """Γ → JSON (벡터별 행동 이름과 상태 값)"""
    document = {
        "states": list(m.state_labels),
        "actions": list(m.action_labels),
        "vectors": [
            {"action": m.action_labels[v.action], "values": [float(x) for x in v.values]}
            for v in gamma_set
        ],
    }
    return json.dumps(document, ensure_ascii=False, indent=2)


def load_alpha_vectors(text: str, m: Pomdp) -> AlphaVectorSet:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFormatError(f"Γ 파일 형식 오류: {e}")
    if document.get("states") != list(m.state_labels):
        raise ProblemFormatError("Γ 파일의 상태 목록이 문제와 다릅니다")
    actions = {label: a for a, label in enumerate(m.action_labels)}
    vectors = []
    for entry in document.get("vectors", []):
        if entry["action"] not in actions:
            raise ProblemFormatError(f"알 수 없는 행동 '{entry['action']}'")
        vectors.append(AlphaVector(values=np.asarray(entry["values"], dtype=float), action=actions[entry["action"]]))
    if not vectors:
        raise ProblemFormatError("Γ 파일에 벡터가 없습니다")
    return AlphaVectorSet(vectors)
