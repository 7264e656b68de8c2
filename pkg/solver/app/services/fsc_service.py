"""
FSC 서비스
평가(고정점 반복/선형 해), 결합 평가, 랜덤 생성, 직렬화, DOT 출력
"""
import json
import logging
from functools import lru_cache, reduce
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..config import get_settings
from ..exceptions import AlphabetMismatch, NonConvergence, ProblemFormatError
from ..models.fsc import Fsc, FscNode, NodeValueTable
from ..models.pomdp import JOINT_LABEL_SEPARATOR, DecPomdp, JointSpace, Pomdp
from ..schemas.fsc import FscDocument, FscNodeSchema, TransitionEntry
from .model_service import flatten_mpomdp

logger = logging.getLogger(__name__)

# FSC 분포 정규화 허용 오차
DISTRIBUTION_TOLERANCE = 1e-9


def check_alphabets(
    f: Fsc,
    action_labels: Sequence[str],
    observation_labels: Sequence[str],
) -> None:
    """FSC의 행동/관측 알파벳이 문제와 같은지 확인"""
    if tuple(f.action_labels) != tuple(action_labels):
        raise AlphabetMismatch(
            f"에이전트 {f.agent} 행동 집합 불일치: {list(f.action_labels)} != {list(action_labels)}"
        )
    if tuple(f.observation_labels) != tuple(observation_labels):
        raise AlphabetMismatch(
            f"에이전트 {f.agent} 관측 집합 불일치: "
            f"{list(f.observation_labels)} != {list(observation_labels)}"
        )


def validate_fsc(f: Fsc) -> None:
    """ψ, η 행 정규화 검사"""
    if np.abs(f.action_rule.sum(axis=1) - 1.0).max() > DISTRIBUTION_TOLERANCE:
        raise ProblemFormatError("ψ(n, ·) 합이 1이 아닙니다")
    if np.abs(f.node_transition.sum(axis=2) - 1.0).max() > DISTRIBUTION_TOLERANCE:
        raise ProblemFormatError("η(n, o, ·) 합이 1이 아닙니다")


def product_fsc(fscs: Sequence[Fsc]) -> Fsc:
    """
    에이전트별 FSC의 곱 제어기
    노드·행동·관측 모두 에이전트 0이 최상위 자리인 결합 인덱스
    η 를 밀집 배열로 만들므로 작은 제어기에만 사용 (결합 평가는 joint_chain)
    """
    psi = fscs[0].action_rule
    eta = fscs[0].node_transition
    for f in fscs[1:]:
        n_a, n_b = psi.shape[0], f.n_nodes
        psi = np.einsum("ia,jb->ijab", psi, f.action_rule).reshape(n_a * n_b, -1)
        eta = np.einsum("iok,jpl->ijopkl", eta, f.node_transition).reshape(
            n_a * n_b, eta.shape[1] * f.node_transition.shape[1], n_a * n_b
        )
    nodes = JointSpace([f.n_nodes for f in fscs])
    action_space = JointSpace([len(f.action_labels) for f in fscs])
    observation_space = JointSpace([len(f.observation_labels) for f in fscs])

    def label(space: JointSpace, index: int, attr: str) -> str:
        return JOINT_LABEL_SEPARATOR.join(getattr(fscs[k], attr)[x] for k, x in enumerate(space.to_tuple(index)))

    return Fsc(
        action_labels=tuple(label(action_space, a, "action_labels") for a in range(action_space.size)),
        observation_labels=tuple(
            label(observation_space, o, "observation_labels") for o in range(observation_space.size)
        ),
        action_rule=psi,
        node_transition=eta,
        nodes=[FscNode() for _ in range(nodes.size)],
    )


def _assemble_chain(blocks: Iterable[Tuple[sp.spmatrix, sp.csr_matrix]], size: int) -> sp.csr_matrix:
    """(노드 부분, 관측 커널) 블록의 크로네커 곱 합"""
    rows, cols, data = [], [], []
    for node_part, kernel in blocks:
        block = sp.kron(node_part, kernel, format="coo")
        rows.append(block.row)
        cols.append(block.col)
        data.append(block.data)
    if not rows:
        return sp.csr_matrix((size, size))
    return sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()


def _fsc_blocks(m: Pomdp, f: Fsc) -> Iterator[Tuple[sp.csr_matrix, sp.csr_matrix]]:
    for a in range(m.n_actions):
        weights = f.action_rule[:, a]
        if not weights.any():
            continue
        for o, kernel in enumerate(m.observation_kernels[a]):
            if not kernel.nnz:
                continue
            node_part = weights[:, np.newaxis] * f.node_transition[:, o, :]
            if node_part.any():
                yield sp.csr_matrix(node_part), kernel


def policy_chain(m: Pomdp, f: Fsc) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    (노드, 상태) 마르코프 연쇄
    P[(n,s),(n',s')] = Σ_a ψ(n,a) Σ_o T(s,a,s')·O(a,s',o)·η(n,o,n'), r[(n,s)] = Σ_a ψ(n,a)·R(s,a)
    """
    chain = _assemble_chain(_fsc_blocks(m, f), f.n_nodes * m.n_states)
    rewards = (f.action_rule @ m.rewards.T).ravel()
    return chain, rewards


def _kron_all(factors: Sequence) -> sp.csr_matrix:
    return reduce(lambda left, right: sp.kron(left, right, format="csr"), factors)


def joint_chain(mp: Pomdp, fscs: Sequence[Fsc]) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    에이전트별 FSC를 곱하지 않고 만드는 (n_1, …, n_|I|, s) 연쇄
    결합 행동 가중치 Π_j ψ_j(n_j, a_j), 결합 노드 전이 ⊗_j η_j(·, o_j, ·) 모두 희소
    """
    n_joint = int(np.prod([f.n_nodes for f in fscs]))
    slices = [
        [sp.csr_matrix(f.node_transition[:, o, :]) for o in range(len(f.observation_labels))]
        for f in fscs
    ]
    rewards = np.zeros(n_joint * mp.n_states)
    weights_by_action = []
    for a in range(mp.n_actions):
        parts = mp.joint_actions.to_tuple(a)
        weights = reduce(np.kron, [f.action_rule[:, x] for f, x in zip(fscs, parts)])
        weights_by_action.append(weights)
        if weights.any():
            rewards += np.kron(weights, mp.rewards[:, a])

    def blocks() -> Iterator[Tuple[sp.csr_matrix, sp.csr_matrix]]:
        for a, weights in enumerate(weights_by_action):
            if not weights.any():
                continue
            scale = sp.diags(weights, format="csr")
            for o, kernel in enumerate(mp.observation_kernels[a]):
                if not kernel.nnz:
                    continue
                parts = mp.joint_observations.to_tuple(o)
                node_part = scale @ _kron_all([slices[j][x] for j, x in enumerate(parts)])
                node_part.eliminate_zeros()
                if node_part.nnz:
                    yield node_part, kernel

    return _assemble_chain(blocks(), n_joint * mp.n_states), rewards


def _fixed_point(
    chain: sp.csr_matrix,
    rewards: np.ndarray,
    discount: float,
    shape: Tuple[int, int],
    epsilon: float,
    max_iterations: int,
) -> NodeValueTable:
    values = np.zeros_like(rewards)
    residuals: List[float] = []
    for iteration in range(1, max_iterations + 1):
        updated = rewards + discount * (chain @ values)
        residual = float(np.abs(updated - values).max())
        residuals.append(residual)
        values = updated
        if residual < epsilon:
            return NodeValueTable(
                alphas=values.reshape(shape),
                residual=residual,
                iterations=iteration,
                residuals=residuals,
            )
    raise NonConvergence(f"FSC 평가가 {max_iterations}회 안에 수렴하지 않았습니다 (잔차 {residuals[-1]:.3g})")


def _evaluation_limits(epsilon: Optional[float], max_iterations: Optional[int]) -> Tuple[float, int]:
    settings = get_settings()
    epsilon = epsilon if epsilon is not None else settings.eval_epsilon
    max_iterations = max_iterations if max_iterations is not None else settings.eval_max_iterations
    if epsilon <= 0:
        raise ValueError("epsilon 은 0보다 커야 합니다")
    return epsilon, max_iterations


def evaluate_fsc(
    m: Pomdp,
    f: Fsc,
    epsilon: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> NodeValueTable:
    """
    노드별 α-벡터 고정점 반복
    α^n_s = Σ_a ψ(n,a)[R(s,a) + γ Σ_{s',o} T·O Σ_{n'} η(n,o,n')·α^{n'}_{s'}]
    최대 변화량 < epsilon 에서 종료, 0 벡터에서 시작
    """
    epsilon, max_iterations = _evaluation_limits(epsilon, max_iterations)
    check_alphabets(f, m.action_labels, m.observation_labels)
    chain, rewards = policy_chain(m, f)
    return _fixed_point(chain, rewards, m.discount, (f.n_nodes, m.n_states), epsilon, max_iterations)


def solve_fsc_exact(m: Pomdp, f: Fsc) -> NodeValueTable:
    """(I − γP)α = r 희소 선형 해 (검증용)"""
    check_alphabets(f, m.action_labels, m.observation_labels)
    chain, rewards = policy_chain(m, f)
    system = sp.identity(chain.shape[0], format="csc") - m.discount * chain.tocsc()
    values = np.atleast_1d(spla.spsolve(system, rewards))
    return NodeValueTable(alphas=values.reshape(f.n_nodes, m.n_states), residual=0.0, iterations=0)


@lru_cache(maxsize=8)
def _mpomdp_of(d: DecPomdp) -> Pomdp:
    return flatten_mpomdp(d)


def evaluate_joint(
    d: DecPomdp,
    fscs: Sequence[Fsc],
    epsilon: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> float:
    """
    결합 정책 가치: (s, n_1, …, n_|I|) 곱 연쇄를 (b0, 시작 노드들)에서 평가
    """
    if len(fscs) != d.n_agents:
        raise AlphabetMismatch(f"FSC {len(fscs)}개, 에이전트 {d.n_agents}명")
    for j, f in enumerate(fscs):
        check_alphabets(f, d.action_labels[j], d.observation_labels[j])
    epsilon, max_iterations = _evaluation_limits(epsilon, max_iterations)
    mpomdp = _mpomdp_of(d)
    chain, rewards = joint_chain(mpomdp, fscs)
    n_joint = rewards.size // mpomdp.n_states
    table = _fixed_point(chain, rewards, d.discount, (n_joint, mpomdp.n_states), epsilon, max_iterations)
    return table.value_at(d.initial_belief, 0)


def random_fsc(
    action_labels: Sequence[str],
    observation_labels: Sequence[str],
    max_nodes: int,
    rng: np.random.Generator,
    agent: int = 0,
) -> Fsc:
    """노드 수 ~ U{1..K}, 행동·후속 노드 균등 추출한 결정적 FSC"""
    if max_nodes < 1:
        raise ValueError("max_nodes 는 1 이상이어야 합니다")
    n_nodes = int(rng.integers(1, max_nodes + 1))
    actions = rng.integers(0, len(action_labels), size=n_nodes)
    successors = rng.integers(0, n_nodes, size=(n_nodes, len(observation_labels)))
    return Fsc.deterministic_from(
        actions=actions.tolist(),
        successors=successors.tolist(),
        action_labels=tuple(action_labels),
        observation_labels=tuple(observation_labels),
        agent=agent,
    )


def constant_fsc(action_labels: Sequence[str], observation_labels: Sequence[str], action: str, agent: int = 0) -> Fsc:
    """한 행동만 반복하는 1-노드 FSC"""
    index = list(action_labels).index(action)
    return Fsc.deterministic_from(
        actions=[index],
        successors=[[0] * len(observation_labels)],
        action_labels=tuple(action_labels),
        observation_labels=tuple(observation_labels),
        agent=agent,
    )


def fsc_equals(a: Fsc, b: Fsc) -> bool:
    """필드 단위 정확 비교 (메타데이터 포함)"""
    if (a.agent, a.action_labels, a.observation_labels, a.state_labels) != (
        b.agent, b.action_labels, b.observation_labels, b.state_labels
    ):
        return False
    if not (np.array_equal(a.action_rule, b.action_rule) and np.array_equal(a.node_transition, b.node_transition)):
        return False
    for x, y in zip(a.nodes, b.nodes):
        if (x.weight, x.source_alpha_index) != (y.weight, y.source_alpha_index):
            return False
        if (x.belief is None) != (y.belief is None):
            return False
        if x.belief is not None and not np.array_equal(x.belief, y.belief):
            return False
    return True


# ---------- 직렬화 ----------

def to_document(f: Fsc) -> FscDocument:
    """Fsc → FSC 파일 스키마"""
    deterministic = f.deterministic
    nodes = []
    for n, meta in enumerate(f.nodes):
        transitions = {}
        for o, label in enumerate(f.observation_labels):
            row = f.node_transition[n, o]
            if deterministic:
                transitions[label] = f.successor_of(n, o)
            else:
                transitions[label] = [
                    TransitionEntry(to=int(k), p=float(row[k])) for k in np.flatnonzero(row)
                ]
        belief = None
        if meta.belief is not None and f.state_labels is not None:
            belief = {f.state_labels[s]: float(meta.belief[s]) for s in np.flatnonzero(meta.belief)}
        nodes.append(FscNodeSchema(
            id=n,
            action=f.action_labels[f.action_of(n)] if deterministic else None,
            action_dist=None if deterministic else {
                f.action_labels[a]: float(f.action_rule[n, a]) for a in np.flatnonzero(f.action_rule[n])
            },
            transitions=transitions,
            weight=float(meta.weight),
            belief=belief,
            source_alpha_index=meta.source_alpha_index,
        ))
    return FscDocument(
        agent=f.agent,
        start=0,
        deterministic=deterministic,
        actions=list(f.action_labels),
        observations=list(f.observation_labels),
        states=list(f.state_labels) if f.state_labels is not None else None,
        nodes=nodes,
    )


def from_document(doc: FscDocument) -> Fsc:
    """FSC 파일 스키마 → Fsc"""
    actions = {label: a for a, label in enumerate(doc.actions)}
    observations = {label: o for o, label in enumerate(doc.observations)}
    states = {label: s for s, label in enumerate(doc.states)} if doc.states is not None else None
    n_nodes = len(doc.nodes)
    psi = np.zeros((n_nodes, len(actions)))
    eta = np.zeros((n_nodes, len(observations), n_nodes))
    metadata = []
    for node in doc.nodes:
        n = node.id
        distribution = {node.action: 1.0} if node.action is not None else node.action_dist
        for label, p in distribution.items():
            if label not in actions:
                raise AlphabetMismatch(f"노드 {n}: 알 수 없는 행동 '{label}'")
            psi[n, actions[label]] = p
        if set(node.transitions) != set(observations):
            raise AlphabetMismatch(f"노드 {n}: 관측 전이 집합이 관측 알파벳과 다릅니다")
        for label, target in node.transitions.items():
            entries = [TransitionEntry(to=target, p=1.0)] if isinstance(target, int) else target
            for entry in entries:
                if entry.to >= n_nodes:
                    raise ProblemFormatError(f"노드 {n}: 존재하지 않는 후속 노드 {entry.to}")
                eta[n, observations[label], entry.to] = entry.p
        belief = None
        if node.belief is not None and states is not None:
            belief = np.zeros(len(states))
            for label, p in node.belief.items():
                belief[states[label]] = p
        metadata.append(FscNode(belief=belief, weight=node.weight, source_alpha_index=node.source_alpha_index))
    f = Fsc(
        action_labels=tuple(doc.actions),
        observation_labels=tuple(doc.observations),
        action_rule=psi,
        node_transition=eta,
        nodes=metadata,
        agent=doc.agent,
        state_labels=tuple(doc.states) if doc.states is not None else None,
    )
    validate_fsc(f)
    if doc.deterministic and not f.deterministic:
        raise ProblemFormatError("deterministic 으로 표시됐지만 ψ 또는 η 가 점 질량이 아닙니다")
    return f


def serialize(f: Fsc) -> str:
    return to_document(f).model_dump_json(indent=2, exclude_none=True)


def deserialize(text: str) -> Fsc:
    try:
        doc = FscDocument.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValueError) as e:
        raise ProblemFormatError(f"FSC 파일 형식 오류: {e}")
    return from_document(doc)


def to_dot(f: Fsc) -> str:
    """제어기 그래프 DOT 텍스트"""
    lines = [f'digraph "fsc_agent{f.agent}" {{', "  rankdir=LR;"]
    for n in range(f.n_nodes):
        actions = ", ".join(
            f"{f.action_labels[a]}" if f.deterministic else f"{f.action_labels[a]}:{f.action_rule[n, a]:.3g}"
            for a in np.flatnonzero(f.action_rule[n])
        )
        shape = "doublecircle" if n == 0 else "circle"
        lines.append(f'  n{n} [shape={shape}, label="n{n}\\n{actions}"];')
    for n in range(f.n_nodes):
        for o, label in enumerate(f.observation_labels):
            for k in np.flatnonzero(f.node_transition[n, o]):
                p = f.node_transition[n, o, k]
                text = label if p == 1.0 else f"{label} ({p:.3g})"
                lines.append(f'  n{n} -> n{k} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
