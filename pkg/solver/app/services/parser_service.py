"""
문제 파일 파서 서비스
.dpomdp (다중 에이전트) 및 .pomdp (Cassandra) 텍스트 형식 읽기/쓰기

지원 항목:
- 헤더: agents, discount, values, states, actions, observations, start (include/exclude)
- 행렬: T, O, R (스칼라/행/전체 행렬 형식), 와일드카드 *, uniform, identity
- 이름과 인덱스 혼용, # 주석, LF/CRLF
"""
import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..exceptions import (
    CapacityExceeded,
    DimensionMismatch,
    DpomdpSyntaxError,
    NormalizationError,
    UnknownIdentifier,
)
from ..models.pomdp import DecPomdp, Pomdp, Provenance
from .model_service import flatten_mpomdp, normalize_rows

logger = logging.getLogger(__name__)

# 밀집 전이 텐서 최대 원소 수
DENSE_ENTRY_CAP = 5 * 10**7

_STATEMENT = re.compile(
    r"^\s*(agents|discount|values|states|actions|observations|start\s+include|start\s+exclude|start|T|O|R)\s*:(.*)$"
)


@dataclass
class ParseDiagnostics:
    """파싱 진단 정보"""
    warnings: List[Tuple[int, str]] = field(default_factory=list)
    renormalized_rows: int = 0

    @property
    def clean(self) -> bool:
        return not self.warnings and self.renormalized_rows == 0


@dataclass
class _Statement:
    keyword: str
    line: int
    header: str
    body: List[Tuple[int, str]] = field(default_factory=list)

    def body_tokens(self) -> List[str]:
        return [tok for _, text in self.body for tok in text.split()]


def _split_statements(text: str) -> List[_Statement]:
    """주석 제거 후 키워드 줄 단위로 문장 묶기"""
    statements: List[_Statement] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\r").strip()
        if not line:
            continue
        match = _STATEMENT.match(line)
        if match:
            keyword = re.sub(r"\s+", " ", match.group(1))
            statements.append(_Statement(keyword, number, match.group(2).strip()))
        elif statements:
            statements[-1].body.append((number, line))
        else:
            raise DpomdpSyntaxError(number, "헤더 지시어", line.split()[0])
    return statements


def _parse_float(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise DpomdpSyntaxError(line, "실수 값", token)


def _labels_from_tokens(tokens: Sequence[str], line: int, what: str) -> Tuple[str, ...]:
    """숫자 하나면 개수, 아니면 이름 목록"""
    if not tokens:
        raise DpomdpSyntaxError(line, f"{what} 개수 또는 이름")
    if len(tokens) == 1 and tokens[0].isdigit():
        count = int(tokens[0])
        if count < 1:
            raise DimensionMismatch(f"{what} 개수는 1 이상이어야 합니다", line)
        return tuple(str(i) for i in range(count))
    if len(set(tokens)) != len(tokens):
        raise DpomdpSyntaxError(line, f"중복 없는 {what} 이름")
    return tuple(tokens)


class _Resolver:
    """이름/인덱스/와일드카드 → 인덱스 배열"""

    def __init__(self, labels: Sequence[str], what: str):
        self.labels = tuple(labels)
        self.lookup: Dict[str, int] = {name: i for i, name in enumerate(self.labels)}
        self.what = what

    def __call__(self, token: str, line: int) -> np.ndarray:
        if token == "*":
            return np.arange(len(self.labels))
        if token in self.lookup:
            return np.array([self.lookup[token]])
        if token.isdigit() and int(token) < len(self.labels):
            return np.array([int(token)])
        raise UnknownIdentifier(f"알 수 없는 {self.what} '{token}'", line)


class _Builder:
    """파싱 상태 누적"""

    def __init__(self, diagnostics: ParseDiagnostics):
        self.diagnostics = diagnostics
        self.agent_labels: Optional[Tuple[str, ...]] = None
        self.discount: Optional[float] = None
        self.cost = False
        self.state_labels: Optional[Tuple[str, ...]] = None
        self.action_labels: Optional[Tuple[Tuple[str, ...], ...]] = None
        self.observation_labels: Optional[Tuple[Tuple[str, ...], ...]] = None
        self.start: Optional[np.ndarray] = None
        self.start_line = 0
        self.transitions: Optional[np.ndarray] = None
        self.observations: Optional[np.ndarray] = None
        # 행동별 보상: ("flat", [S]) 또는 ("full", [S, S', O])
        self.rewards: Dict[int, Tuple[str, np.ndarray]] = {}

    # ---------- 헤더 ----------

    @property
    def n_agents(self) -> int:
        return len(self.agent_labels) if self.agent_labels else 1

    def header(self, st: _Statement) -> None:
        tokens = st.header.split() + st.body_tokens()
        if st.keyword == "agents":
            if not tokens:
                raise DpomdpSyntaxError(st.line, "에이전트 수")
            if len(tokens) == 1 and tokens[0].isdigit():
                self.agent_labels = tuple(f"agent{i}" for i in range(int(tokens[0])))
            else:
                self.agent_labels = tuple(tokens)
        elif st.keyword == "discount":
            if len(tokens) != 1:
                raise DpomdpSyntaxError(st.line, "할인율 하나")
            self.discount = _parse_float(tokens[0], st.line)
        elif st.keyword == "values":
            if tokens not in (["reward"], ["cost"]):
                raise DpomdpSyntaxError(st.line, "reward 또는 cost", " ".join(tokens))
            self.cost = tokens == ["cost"]
        elif st.keyword == "states":
            self.state_labels = _labels_from_tokens(tokens, st.line, "상태")
        elif st.keyword in ("actions", "observations"):
            self._per_agent(st)
        else:
            self._start(st, tokens)

    def _per_agent(self, st: _Statement) -> None:
        what = "행동" if st.keyword == "actions" else "관측"
        if self.n_agents == 1:
            labels = (_labels_from_tokens(st.header.split() + st.body_tokens(), st.line, what),)
        else:
            lines = ([(st.line, st.header)] if st.header else []) + st.body
            if len(lines) != self.n_agents:
                raise DimensionMismatch(
                    f"{what}: 에이전트 {self.n_agents}명에 대해 {len(lines)}줄", st.line
                )
            labels = tuple(_labels_from_tokens(text.split(), number, what) for number, text in lines)
        if st.keyword == "actions":
            self.action_labels = labels
        else:
            self.observation_labels = labels

    def _start(self, st: _Statement, tokens: List[str]) -> None:
        n = self._require_states(st.line)
        self.start_line = st.line
        resolve = _Resolver(self.state_labels, "상태")
        if st.keyword == "start include":
            chosen = np.unique(np.concatenate([resolve(t, st.line) for t in tokens]))
            self.start = np.zeros(n)
            self.start[chosen] = 1.0 / len(chosen)
        elif st.keyword == "start exclude":
            excluded = np.unique(np.concatenate([resolve(t, st.line) for t in tokens]))
            self.start = np.ones(n)
            self.start[excluded] = 0.0
            if not self.start.sum():
                raise NormalizationError("모든 상태가 제외되었습니다", st.line)
            self.start /= self.start.sum()
        elif tokens == ["uniform"]:
            self.start = np.full(n, 1.0 / n)
        elif len(tokens) == 1 and _is_index(tokens[0], n):
            self.start = np.zeros(n)
            self.start[resolve(tokens[0], st.line)] = 1.0
        elif len(tokens) == n and all(_is_number(t) for t in tokens):
            self.start = np.array([_parse_float(t, st.line) for t in tokens])
        elif len(tokens) == 1:
            self.start = np.zeros(n)
            self.start[resolve(tokens[0], st.line)] = 1.0
        else:
            raise DimensionMismatch(f"start: 상태 {n}개에 대해 값 {len(tokens)}개", st.line)

    def _require_states(self, line: int) -> int:
        if self.state_labels is None:
            raise DpomdpSyntaxError(line, "states: 선언")
        return len(self.state_labels)

    def _require_all(self, line: int) -> None:
        self._require_states(line)
        if self.action_labels is None:
            raise DpomdpSyntaxError(line, "actions: 선언")
        if self.observation_labels is None:
            raise DpomdpSyntaxError(line, "observations: 선언")
        if self.transitions is None:
            n_s = len(self.state_labels)
            n_a = int(np.prod([len(a) for a in self.action_labels]))
            n_o = int(np.prod([len(o) for o in self.observation_labels]))
            if n_a * n_s * n_s > DENSE_ENTRY_CAP:
                raise CapacityExceeded(f"전이 텐서 {n_a}×{n_s}×{n_s} 가 너무 큽니다")
            self.transitions = np.zeros((n_a, n_s, n_s))
            self.observations = np.zeros((n_a, n_s, n_o))

    # ---------- 결합 인덱스 ----------

    def _joint(self, field_text: str, line: int, labels: Tuple[Tuple[str, ...], ...], what: str) -> np.ndarray:
        tokens = field_text.split()
        sizes = [len(x) for x in labels]
        total = int(np.prod(sizes))
        if tokens == ["*"]:
            return np.arange(total)
        if len(tokens) == 1 and len(labels) > 1:
            if tokens[0].isdigit() and int(tokens[0]) < total:
                return np.array([int(tokens[0])])
            raise UnknownIdentifier(f"알 수 없는 결합 {what} '{tokens[0]}'", line)
        if len(tokens) != len(labels):
            raise DpomdpSyntaxError(line, f"결합 {what} 구성 요소 {len(labels)}개", field_text)
        parts = [_Resolver(labels[i], what)(tok, line) for i, tok in enumerate(tokens)]
        strides = np.cumprod([1] + sizes[::-1])[:-1][::-1]
        return np.array(sorted(
            int(sum(int(p) * int(st) for p, st in zip(combo, strides)))
            for combo in itertools.product(*parts)
        ))

    def _joint_width(self, labels) -> Tuple[int, ...]:
        """결합 필드의 허용 토큰 수"""
        return (1,) if len(labels) == 1 else (1, len(labels))

    # ---------- 행렬 ----------

    def _fields(self, st: _Statement, kinds: Sequence[str]) -> Tuple[List[str], List[str]]:
        """
        헤더를 인덱스 필드와 값 토큰으로 분리
        dpomdp: 'T: a : s : s2 : p', pomdp: 'T: a : s : s2 p'
        """
        fields = [f.strip() for f in st.header.split(":")]
        while fields and fields[-1] == "":
            fields.pop()
        values: List[str] = []
        if len(fields) == len(kinds) + 1:
            values = fields.pop().split()
        elif len(fields) == len(kinds):
            last = fields[-1].split()
            labels = self._kind_labels(kinds[-1])
            widths = (1,) if kinds[-1] == "state" else self._joint_width(labels)
            if len(last) - 1 in widths and len(last) not in widths:
                values = [last[-1]]
                fields[-1] = " ".join(last[:-1])
        if len(fields) > len(kinds) or not fields:
            raise DpomdpSyntaxError(st.line, f"{st.keyword}: 필드 {len(kinds)}개 이하", st.header)
        return fields, values + st.body_tokens()

    def _kind_labels(self, kind: str):
        if kind == "action":
            return self.action_labels
        if kind == "obs":
            return self.observation_labels
        return (self.state_labels,)

    def _select(self, kind: str, text: str, line: int) -> np.ndarray:
        if kind == "state":
            return _Resolver(self.state_labels, "상태")(text.strip(), line)
        if kind == "action":
            return self._joint(text, line, self.action_labels, "행동")
        return self._joint(text, line, self.observation_labels, "관측")

    def _numbers(self, tokens: List[str], shape: Tuple[int, ...], line: int) -> np.ndarray:
        expected = int(np.prod(shape)) if shape else 1
        if len(tokens) != expected:
            raise DimensionMismatch(f"값 {expected}개 필요, {len(tokens)}개 발견", line)
        return np.array([_parse_float(t, line) for t in tokens]).reshape(shape)

    def transition(self, st: _Statement) -> None:
        self._require_all(st.line)
        kinds = ("action", "state", "state")
        fields, tokens = self._fields(st, kinds)
        sel = [self._select(k, f, st.line) for k, f in zip(kinds, fields)]
        n_s = len(self.state_labels)
        if len(sel) == 1 and tokens in (["uniform"], ["identity"]):
            block = np.full((n_s, n_s), 1.0 / n_s) if tokens == ["uniform"] else np.eye(n_s)
            self.transitions[sel[0]] = block
            return
        if len(sel) == 2 and tokens == ["uniform"]:
            self.transitions[np.ix_(sel[0], sel[1])] = 1.0 / n_s
            return
        shape = {1: (n_s, n_s), 2: (n_s,), 3: ()}[len(sel)]
        values = self._numbers(tokens, shape, st.line)
        index = np.ix_(*sel) if len(sel) > 1 else (sel[0],)
        self.transitions[index] = values

    def observation(self, st: _Statement) -> None:
        self._require_all(st.line)
        kinds = ("action", "state", "obs")
        fields, tokens = self._fields(st, kinds)
        sel = [self._select(k, f, st.line) for k, f in zip(kinds, fields)]
        n_s = len(self.state_labels)
        n_o = self.observations.shape[2]
        if len(sel) <= 2 and tokens == ["uniform"]:
            index = np.ix_(*sel) if len(sel) > 1 else (sel[0],)
            self.observations[index] = 1.0 / n_o
            return
        if len(sel) == 1 and tokens == ["identity"]:
            if n_s != n_o:
                raise DimensionMismatch("identity 관측에는 |S| = |Ω| 필요", st.line)
            self.observations[sel[0]] = np.eye(n_s)
            return
        shape = {1: (n_s, n_o), 2: (n_o,), 3: ()}[len(sel)]
        values = self._numbers(tokens, shape, st.line)
        index = np.ix_(*sel) if len(sel) > 1 else (sel[0],)
        self.observations[index] = values

    def reward(self, st: _Statement) -> None:
        self._require_all(st.line)
        kinds = ("action", "state", "state", "obs")
        fields, tokens = self._fields(st, kinds)
        if len(fields) < 2:
            raise DpomdpSyntaxError(st.line, "R: <행동> : <상태> ...", st.header)
        sel = [self._select(k, f, st.line) for k, f in zip(kinds, fields)]
        n_s = len(self.state_labels)
        n_o = self.observations.shape[2]
        shape = {2: (n_s, n_o), 3: (n_o,), 4: ()}[len(sel)]
        values = self._numbers(tokens, shape, st.line)
        flat = len(sel) == 4 and fields[2] == "*" and fields[3] == "*"
        for a in sel[0]:
            kind, table = self.rewards.get(int(a), ("flat", np.zeros(n_s)))
            if flat and kind == "flat":
                table[sel[1]] = values
            else:
                if kind == "flat":
                    table = np.repeat(table[:, None, None], n_s, axis=1).repeat(n_o, axis=2)
                    kind = "full"
                rest = [sel[2] if len(sel) > 2 else np.arange(n_s), sel[3] if len(sel) > 3 else np.arange(n_o)]
                table[np.ix_(sel[1], *rest)] = values
            self.rewards[int(a)] = (kind, table)

    # ---------- 마무리 ----------

    def build(self) -> DecPomdp:
        self._require_all(0)
        if self.discount is None:
            raise DpomdpSyntaxError(None, "discount: 선언")
        n_s = len(self.state_labels)
        transitions, fixed_t = normalize_rows(self.transitions, "T")
        observations, fixed_o = normalize_rows(self.observations, "O")
        if self.start is None:
            start = np.full(n_s, 1.0 / n_s)
            self.diagnostics.warnings.append((0, "start: 없음 - 균등 초기 신념 사용"))
        else:
            start, fixed_b = normalize_rows(self.start, "start")
            fixed_o += fixed_b
        self.diagnostics.renormalized_rows = fixed_t + fixed_o
        if fixed_t + fixed_o:
            self.diagnostics.warnings.append((0, f"{fixed_t + fixed_o}개 확률 행 재정규화"))
        rewards = np.zeros((n_s, transitions.shape[0]))
        for a, (kind, table) in self.rewards.items():
            if kind == "flat":
                rewards[:, a] = table
            else:
                # R(s,a) = Σ_{s',o} T(s,a,s')·O(a,s',o)·R(s,a,s',o)
                rewards[:, a] = np.einsum("ij,jk,ijk->i", transitions[a], observations[a], table)
        if self.cost:
            rewards = -rewards
        return DecPomdp(
            agent_labels=self.agent_labels or ("agent0",),
            state_labels=self.state_labels,
            action_labels=self.action_labels,
            observation_labels=self.observation_labels,
            transitions=transitions,
            observations=observations,
            rewards=rewards,
            initial_belief=start,
            discount=float(self.discount),
        )


def _is_index(token: str, n: int) -> bool:
    """상태 번호로 읽을 수 있는 정수 토큰"""
    return token.isdigit() and int(token) < n


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_dpomdp(text: str) -> Tuple[DecPomdp, ParseDiagnostics]:
    """
    .dpomdp / .pomdp 텍스트 파싱
    Returns: (DecPomdp, ParseDiagnostics)
    """
    diagnostics = ParseDiagnostics()
    builder = _Builder(diagnostics)
    for st in _split_statements(text):
        if st.keyword == "T":
            builder.transition(st)
        elif st.keyword == "O":
            builder.observation(st)
        elif st.keyword == "R":
            builder.reward(st)
        else:
            builder.header(st)
    model = builder.build()
    logger.debug(
        f"[PARSER] 파싱 완료 - |I|={model.n_agents}, |S|={model.n_states}, "
        f"|A|={model.joint_actions.size}, |Ω|={model.joint_observations.size}"
    )
    return model, diagnostics


def parse_pomdp(text: str) -> Pomdp:
    """단일 에이전트 .pomdp 텍스트 → Pomdp"""
    model, _ = parse_dpomdp(text)
    if model.n_agents != 1:
        raise DpomdpSyntaxError(None, "단일 에이전트 문제", f"agents: {model.n_agents}")
    return flatten_mpomdp(model)


# ---------- 출력 ----------

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _safe(label: str) -> str:
    """토큰으로 쓸 수 있는 이름"""
    return re.sub(r"[\s:#]+", "_", label)


def _label_line(labels: Sequence[str]) -> str:
    if tuple(labels) == tuple(str(i) for i in range(len(labels))):
        return str(len(labels))
    return " ".join(_safe(x) for x in labels)


def emit_pomdp(m: Pomdp) -> str:
    """Pomdp → Cassandra .pomdp 텍스트 (확률은 유효숫자 17자리)"""
    states = [_safe(x) for x in m.state_labels]
    actions = [_safe(x) for x in m.action_labels]
    observations = [_safe(x) for x in m.observation_labels]
    out = [
        f"# provenance: {m.provenance.value}",
        f"discount: {_fmt(m.discount)}",
        "values: reward",
        f"states: {_label_line(m.state_labels)}",
        f"actions: {_label_line(m.action_labels)}",
        f"observations: {_label_line(m.observation_labels)}",
        "start:",
        " ".join(_fmt(p) for p in m.initial_belief),
        "",
    ]
    for a, t_a in enumerate(m.transitions):
        coo = sp.coo_matrix(t_a)
        for s, s2, p in sorted(zip(coo.row, coo.col, coo.data)):
            if p != 0.0:
                out.append(f"T: {actions[a]} : {states[s]} : {states[s2]} {_fmt(p)}")
    out.append("")
    for a, s2, o in zip(*np.nonzero(m.observations)):
        out.append(f"O: {actions[a]} : {states[s2]} : {observations[o]} {_fmt(m.observations[a, s2, o])}")
    out.append("")
    for s, a in zip(*np.nonzero(m.rewards)):
        out.append(f"R: {actions[a]} : {states[s]} : * : * {_fmt(m.rewards[s, a])}")
    return "\n".join(out) + "\n"


def emit_dpomdp(d: DecPomdp) -> str:
    """DecPomdp → .dpomdp 텍스트"""
    states = [_safe(x) for x in d.state_labels]
    out = [
        f"agents: {' '.join(_safe(x) for x in d.agent_labels)}",
        f"discount: {_fmt(d.discount)}",
        "values: reward",
        f"states: {' '.join(states)}",
        "start:",
        " ".join(_fmt(p) for p in d.initial_belief),
        "actions:",
        *(" ".join(_safe(x) for x in labels) for labels in d.action_labels),
        "observations:",
        *(" ".join(_safe(x) for x in labels) for labels in d.observation_labels),
        "",
    ]

    def joint(index: int, space, labels) -> str:
        return " ".join(_safe(labels[i][x]) for i, x in enumerate(space.to_tuple(index)))

    for a, s, s2 in zip(*np.nonzero(d.transitions)):
        out.append(
            f"T: {joint(a, d.joint_actions, d.action_labels)} : {states[s]} : {states[s2]} : "
            f"{_fmt(d.transitions[a, s, s2])}"
        )
    out.append("")
    for a, s2, o in zip(*np.nonzero(d.observations)):
        out.append(
            f"O: {joint(a, d.joint_actions, d.action_labels)} : {states[s2]} : "
            f"{joint(o, d.joint_observations, d.observation_labels)} : {_fmt(d.observations[a, s2, o])}"
        )
    out.append("")
    for s, a in zip(*np.nonzero(d.rewards)):
        out.append(
            f"R: {joint(a, d.joint_actions, d.action_labels)} : {states[s]} : * : * : {_fmt(d.rewards[s, a])}"
        )
    return "\n".join(out) + "\n"
