"""
최적 응답 POMDP 컴파일 서비스
다른 에이전트들의 FSC를 고정하고 에이전트 i의 단일 에이전트 POMDP를 만듭니다.

- MOMDP 정식화 (기본): e = ⟨s, n_≠i, õ_i⟩
- 지연 정식화: e = ⟨s, n^{t-1}_≠i, õ_≠i⟩ (결정적 ψ만 지원)
- 도달 불가능 상태 소거 (BFS)
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from ..config import get_settings
from ..exceptions import AlphabetMismatch, CapacityExceeded, StochasticActionRuleUnsupported
from ..models.best_response import NULL_OBSERVATION, BestResponseForm, BestResponsePomdp, ExtendedState
from ..models.fsc import Fsc
from ..models.pomdp import JOINT_LABEL_SEPARATOR, DecPomdp, JointSpace, Pomdp, Provenance
from .fsc_service import check_alphabets, product_fsc

logger = logging.getLogger(__name__)


def _partners(d: DecPomdp, fscs: Sequence[Optional[Fsc]], agent: int) -> List[Tuple[int, Fsc]]:
    """
    i를 제외한 에이전트의 (번호, FSC) 목록
    fscs는 에이전트 수만큼(i 자리는 무시) 또는 |I|-1개
    """
    if not 0 <= agent < d.n_agents:
        raise IndexError(f"에이전트 {agent} 범위 초과")
    others = [j for j in range(d.n_agents) if j != agent]
    if len(fscs) == d.n_agents:
        chosen = [fscs[j] for j in others]
    elif len(fscs) == d.n_agents - 1:
        chosen = list(fscs)
    else:
        raise AlphabetMismatch(f"FSC {len(fscs)}개로는 에이전트 {agent}의 최적 응답을 만들 수 없습니다")
    for j, f in zip(others, chosen):
        if f is None:
            raise AlphabetMismatch(f"에이전트 {j}의 FSC가 없습니다")
        check_alphabets(f, d.action_labels[j], d.observation_labels[j])
    return list(zip(others, chosen))


class _JointIndex:
    """(다른 에이전트 결합 인덱스, 에이전트 i 인덱스) → 전체 결합 인덱스"""

    def __init__(self, space: JointSpace, agent: int):
        self.space = space
        self.agent = agent
        other_sizes = [n for j, n in enumerate(space.sizes) if j != agent]
        self.others = JointSpace(other_sizes)
        table = np.zeros((self.others.size, space.sizes[agent]), dtype=np.int64)
        for rest in range(self.others.size):
            parts = list(self.others.to_tuple(rest)) if other_sizes else []
            for own in range(space.sizes[agent]):
                full = parts[:agent] + [own] + parts[agent:]
                table[rest, own] = space.to_index(full)
        self.table = table

    def __call__(self, rest: int, own: int) -> int:
        return int(self.table[rest, own])


def _partner_controller(d: DecPomdp, partners: List[Tuple[int, Fsc]]) -> Fsc:
    """다른 에이전트들의 곱 제어기 (1명이면 그대로)"""
    fscs = [f for _, f in partners]
    if not fscs:
        # 단일 에이전트: 노드 1개, 행동·관측 1개인 자명한 제어기
        return Fsc.deterministic_from([0], [[0]], ("-",), ("-",))
    return product_fsc(fscs) if len(fscs) > 1 else fscs[0]


def _check_capacity(count: int, cap: Optional[int]) -> None:
    cap = cap if cap is not None else get_settings().extended_state_cap
    if count > cap:
        raise CapacityExceeded(f"확장 상태 {count}개가 상한 {cap}을 넘습니다")


def _node_label(space: JointSpace, n: int) -> str:
    return "-".join(str(x) for x in space.to_tuple(n)) if space.sizes else "0"


def _assemble(
    d: DecPomdp,
    agent: int,
    form: BestResponseForm,
    states: List[ExtendedState],
    labels: List[str],
    parts: Dict[int, List[Tuple[np.ndarray, np.ndarray, np.ndarray]]],
    observations: np.ndarray,
    rewards: np.ndarray,
    initial: np.ndarray,
) -> BestResponsePomdp:
    size = len(states)
    transitions = []
    for a_i in range(len(d.action_labels[agent])):
        chunks = parts[a_i]
        rows = np.concatenate([c[0] for c in chunks]) if chunks else np.zeros(0, dtype=np.int64)
        cols = np.concatenate([c[1] for c in chunks]) if chunks else np.zeros(0, dtype=np.int64)
        data = np.concatenate([c[2] for c in chunks]) if chunks else np.zeros(0)
        transitions.append(sp.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr())
    pomdp = Pomdp(
        state_labels=tuple(labels),
        action_labels=d.action_labels[agent],
        observation_labels=d.observation_labels[agent],
        transitions=tuple(transitions),
        observations=observations,
        rewards=rewards,
        initial_belief=initial,
        discount=d.discount,
        provenance=Provenance.BEST_RESPONSE,
        metadata={"agent": agent, "form": form.value},
    )
    return BestResponsePomdp(
        pomdp=pomdp,
        states=states,
        agent=agent,
        form=form,
        states_before_elimination=size,
        states_after_elimination=size,
    )


def build_best_response(
    d: DecPomdp,
    fscs_others: Sequence[Optional[Fsc]],
    agent: int,
    state_cap: Optional[int] = None,
) -> BestResponsePomdp:
    """
    MOMDP 정식화 최적 응답 POMDP

    T_e(e,a_i,e') = Σ_{a_≠i} ψ_≠i(n,a_≠i) Σ_{o_≠i} T(s,a,s')·O(a,s',⟨o_≠i,o_i'⟩)·η_≠i(n,o_≠i,n')
    O_e(a_i,e',o_i) = 1[o_i = e'.own_obs], r_e(e,a_i) = Σ_{a_≠i} ψ_≠i(n,a_≠i)·R(s,a)
    인덱스 e = ((s·|N| + n)·K + k), k = 0은 NULL, k = o_i + 1
    """
    partners = _partners(d, fscs_others, agent)
    controller = _partner_controller(d, partners)
    node_space = JointSpace([f.n_nodes for _, f in partners])
    n_nodes = node_space.size
    n_s = d.n_states
    n_own_obs = len(d.observation_labels[agent])
    n_own_act = len(d.action_labels[agent])
    width = n_own_obs + 1
    size = n_s * n_nodes * width
    _check_capacity(size, state_cap)

    action_index = _JointIndex(d.joint_actions, agent)
    observation_index = _JointIndex(d.joint_observations, agent)
    psi = controller.action_rule
    eta = controller.node_transition

    parts: Dict[int, List[Tuple[np.ndarray, np.ndarray, np.ndarray]]] = {a: [] for a in range(n_own_act)}
    rewards = np.zeros((n_s, n_nodes, n_own_act))
    replicate = np.arange(width)
    for a_i in range(n_own_act):
        for a_rest in range(action_index.others.size):
            weights = psi[:, a_rest]
            if not weights.any():
                continue
            a = action_index(a_rest, a_i)
            rewards[:, :, a_i] += np.outer(d.rewards[:, a], weights)
            for o_rest in range(observation_index.others.size):
                node_part = weights[:, np.newaxis] * eta[:, o_rest, :]
                if not node_part.any():
                    continue
                for o_i in range(n_own_obs):
                    o = observation_index(o_rest, o_i)
                    kernel = d.transitions[a] * d.observations[a, :, o][np.newaxis, :]
                    if not kernel.any():
                        continue
                    block = sp.kron(sp.csr_matrix(kernel), sp.csr_matrix(node_part), format="coo")
                    # 원 상태의 own_obs 자리마다 같은 행을 복제
                    rows = (block.row[:, np.newaxis] * width + replicate).ravel()
                    cols = np.repeat(block.col * width + o_i + 1, width)
                    data = np.repeat(block.data, width)
                    parts[a_i].append((rows, cols, data))

    observations = np.zeros((n_own_act, size, n_own_obs))
    k_of_state = np.tile(np.arange(width), n_s * n_nodes)
    for o_i in range(n_own_obs):
        observations[:, k_of_state == o_i + 1, o_i] = 1.0
    observations[:, k_of_state == 0, :] = 1.0 / n_own_obs

    initial = np.zeros(size)
    initial[np.arange(n_s) * n_nodes * width] = d.initial_belief

    states, labels = [], []
    own_labels = d.observation_labels[agent]
    for s in range(n_s):
        for n in range(n_nodes):
            node_tuple = node_space.to_tuple(n) if node_space.sizes else ()
            for k in range(width):
                own = k - 1 if k else NULL_OBSERVATION
                states.append(ExtendedState(s, node_tuple, own))
                labels.append(
                    f"{d.state_labels[s]}|{_node_label(node_space, n)}|{own_labels[own] if k else 'NULL'}"
                )
    brp = _assemble(
        d, agent, BestResponseForm.MOMDP, states, labels, parts, observations,
        np.repeat(rewards.reshape(n_s * n_nodes, n_own_act), width, axis=0), initial,
    )
    logger.debug(f"[BR] 에이전트 {agent} 최적 응답 POMDP (MOMDP) - 확장 상태 {size}개")
    return brp


def build_best_response_lagged(
    d: DecPomdp,
    fscs_others: Sequence[Optional[Fsc]],
    agent: int,
    state_cap: Optional[int] = None,
) -> BestResponsePomdp:
    """
    지연 정식화 최적 응답 POMDP, e = ⟨s, n^{t-1}_≠i, õ_≠i⟩

    현재 노드 n^t = η_≠i(n^{t-1}, õ_≠i) 이며 õ_≠i = NULL 이면 n^t = n^{t-1}.
    T_e = Σ_{n^t} η·T(s,⟨ψ(n^t),a_i⟩,s')·Σ_{o_i} O, 다음 상태 e' = ⟨s', n^t, o'_≠i⟩
    O_e(a_i, e', o_i) = O(a,s',⟨o'_≠i,o_i⟩) / Σ_{o_i} O(a,s',⟨o'_≠i,o_i⟩)
    r_e(e, a_i) = Σ_{n^t} η·R(s, ⟨ψ(n^t), a_i⟩)
    """
    partners = _partners(d, fscs_others, agent)
    for j, f in partners:
        if not np.all(np.isclose(f.action_rule.max(axis=1), 1.0)):
            raise StochasticActionRuleUnsupported(f"에이전트 {j}의 FSC 행동 규칙이 확률적입니다")
    controller = _partner_controller(d, partners)
    node_space = JointSpace([f.n_nodes for _, f in partners])
    n_nodes = node_space.size
    n_s = d.n_states
    n_own_act = len(d.action_labels[agent])
    n_own_obs = len(d.observation_labels[agent])
    action_index = _JointIndex(d.joint_actions, agent)
    observation_index = _JointIndex(d.joint_observations, agent)
    n_rest_obs = observation_index.others.size
    width = n_rest_obs + 1
    size = n_s * n_nodes * width
    _check_capacity(size, state_cap)

    partner_action = controller.action_rule.argmax(axis=1)
    # step[n_prev, k, n_t]: k = 0 이면 항등, 아니면 η(n_prev, k-1, n_t)
    step = np.zeros((n_nodes, width, n_nodes))
    step[:, 0, :] = np.eye(n_nodes)
    step[:, 1:, :] = controller.node_transition

    # Σ_{o_i} O(a, s', ⟨o_≠i, o_i⟩) 캐시 (O_e 분모로 재사용)
    own_columns = observation_index.table  # [o_rest, o_i]
    marginal = d.observations[:, :, own_columns].sum(axis=3)  # [a, s', o_rest]

    parts: Dict[int, List[Tuple[np.ndarray, np.ndarray, np.ndarray]]] = {a: [] for a in range(n_own_act)}
    rewards = np.zeros((n_s, n_nodes * width, n_own_act))
    observations = np.full((n_own_act, size, n_own_obs), 1.0 / n_own_obs)
    for a_i in range(n_own_act):
        for n_t in range(n_nodes):
            a = action_index(int(partner_action[n_t]), a_i)
            incoming = step[:, :, n_t].reshape(-1)  # (n_prev, k) 순서
            if not incoming.any():
                continue
            rewards[:, :, a_i] += np.outer(d.rewards[:, a], incoming)
            column = sp.csr_matrix(incoming[:, np.newaxis])
            for o_rest in range(n_rest_obs):
                kernel = d.transitions[a] * marginal[a, :, o_rest][np.newaxis, :]
                if kernel.any():
                    block = sp.kron(sp.csr_matrix(kernel), column, format="coo")
                    cols = (block.col * n_nodes + n_t) * width + o_rest + 1
                    parts[a_i].append((block.row, cols, block.data))
                targets = (np.arange(n_s) * n_nodes + n_t) * width + o_rest + 1
                denominator = marginal[a, :, o_rest]
                numerators = d.observations[a][:, own_columns[o_rest]]  # [s', o_i]
                safe = denominator > 0
                observations[a_i, targets[safe], :] = numerators[safe] / denominator[safe, np.newaxis]

    initial = np.zeros(size)
    initial[np.arange(n_s) * n_nodes * width] = d.initial_belief

    states, labels = [], []
    rest_labels = [
        JOINT_LABEL_SEPARATOR.join(
            d.observation_labels[j][x]
            for j, x in zip([j for j in range(d.n_agents) if j != agent], observation_index.others.to_tuple(r))
        )
        for r in range(n_rest_obs)
    ]
    for s in range(n_s):
        for n in range(n_nodes):
            node_tuple = node_space.to_tuple(n) if node_space.sizes else ()
            for k in range(width):
                rest = k - 1 if k else NULL_OBSERVATION
                states.append(ExtendedState(s, node_tuple, rest))
                labels.append(f"{d.state_labels[s]}|{_node_label(node_space, n)}|{rest_labels[rest] if k else 'NULL'}")
    brp = _assemble(
        d, agent, BestResponseForm.LAGGED, states, labels, parts, observations,
        rewards.reshape(n_s * n_nodes * width, n_own_act), initial,
    )
    logger.debug(f"[BR] 에이전트 {agent} 최적 응답 POMDP (지연) - 확장 상태 {size}개")
    return brp


def compile_best_response(
    d: DecPomdp,
    fscs_others: Sequence[Optional[Fsc]],
    agent: int,
    form: BestResponseForm = BestResponseForm.MOMDP,
    eliminate: bool = True,
) -> BestResponsePomdp:
    """정식화 선택 + 상태 소거"""
    build = build_best_response if form == BestResponseForm.MOMDP else build_best_response_lagged
    brp = build(d, fscs_others, agent)
    return eliminate_unreachable(brp) if eliminate else brp


def reachable_states(brp: BestResponsePomdp) -> np.ndarray:
    """b0_e 지지 집합에서 출발해 양의 확률 전이로 닿는 상태 (오름차순)"""
    m = brp.pomdp
    size = m.n_states
    adjacency = sum((abs(t_a) for t_a in m.transitions), sp.csr_matrix((size, size)))
    support = np.flatnonzero(m.initial_belief > 0)
    # 가상 출발점 (size 번) → 지지 집합
    root = sp.csr_matrix((np.ones(len(support)), (np.full(len(support), size), support)), shape=(size + 1, size + 1))
    graph = sp.bmat([[adjacency, None], [None, sp.csr_matrix((1, 1))]], format="csr") + root
    order = breadth_first_order(graph, size, directed=True, return_predecessors=False)
    return np.sort(order[order != size])


def eliminate_unreachable(brp: BestResponsePomdp) -> BestResponsePomdp:
    """도달 가능한 확장 상태로 제한하고 번호를 다시 매김 (상대 순서 유지)"""
    keep = reachable_states(brp)
    m = brp.pomdp
    pomdp = Pomdp(
        state_labels=tuple(m.state_labels[k] for k in keep),
        action_labels=m.action_labels,
        observation_labels=m.observation_labels,
        transitions=tuple(sp.csr_matrix(t_a[keep][:, keep]) for t_a in m.transitions),
        observations=m.observations[:, keep, :],
        rewards=m.rewards[keep],
        initial_belief=m.initial_belief[keep],
        discount=m.discount,
        provenance=m.provenance,
        metadata=dict(m.metadata),
    )
    result = BestResponsePomdp(
        pomdp=pomdp,
        states=[brp.states[k] for k in keep],
        agent=brp.agent,
        form=brp.form,
        states_before_elimination=brp.states_before_elimination,
        states_after_elimination=len(keep),
    )
    logger.debug(
        f"[BR] 상태 소거 - {brp.states_before_elimination} → {len(keep)} "
        f"(비율 {result.elimination_ratio:.2f})"
    )
    return result


def legend(brp: BestResponsePomdp, d: DecPomdp) -> List[Dict[str, str]]:
    """확장 상태 인덱스 범례 (상태 이름, 다른 에이전트 노드, 관측 이름)"""
    rows = []
    agent = brp.agent
    others = [j for j in range(d.n_agents) if j != agent]
    rest_space = JointSpace([len(d.observation_labels[j]) for j in others])
    for index, e in enumerate(brp.states):
        if e.is_sentinel:
            observation = "NULL"
        elif brp.form == BestResponseForm.MOMDP:
            observation = d.observation_labels[agent][e.own_obs]
        else:
            observation = JOINT_LABEL_SEPARATOR.join(
                d.observation_labels[j][x] for j, x in zip(others, rest_space.to_tuple(e.own_obs))
            )
        rows.append({
            "index": str(index),
            "state": d.state_labels[e.s],
            "partner_nodes": " ".join(str(n) for n in e.n_others),
            "observation": observation,
        })
    return rows
