"""
벤치마크 문제 생성 서비스
DecTiger, Tiger, Recycling, 3×3 격자 만남 문제를 코드로 만듭니다.

Recycling 과 격자 문제의 상수는 공개된 문제 설명을 바탕으로 재구성한 값입니다.
공식 벤치마크 파일이 있으면 bench 명령이 그 파일을 그대로 사용합니다.
"""
import itertools
import logging
from typing import Callable, Dict

import numpy as np

from ..models.pomdp import DecPomdp, Pomdp
from .model_service import flatten_mpomdp
from .parser_service import emit_dpomdp, emit_pomdp

logger = logging.getLogger(__name__)

# DecTiger 보상
TIGER_LISTEN_ACCURACY = 0.85
DEC_TIGER_REWARDS = {
    "listen-listen": -2.0,
    "both-correct": 20.0,
    "both-tiger": -50.0,
    "tiger-listen": -101.0,
    "correct-listen": 9.0,
    "split": -100.0,
}


def dec_tiger(discount: float = 0.9) -> DecPomdp:
    """2-에이전트 DecTiger"""
    states = ("tiger-left", "tiger-right")
    actions = ("listen", "open-left", "open-right")
    observations = ("hear-left", "hear-right")
    n_joint = len(actions) ** 2
    transitions = np.full((n_joint, 2, 2), 0.5)
    transitions[0] = np.eye(2)
    observation_table = np.full((n_joint, 2, 4), 0.25)
    accuracy = TIGER_LISTEN_ACCURACY
    for s in range(2):
        hear = [accuracy if o == s else 1 - accuracy for o in range(2)]
        observation_table[0, s] = [hear[o0] * hear[o1] for o0 in range(2) for o1 in range(2)]
    rewards = np.zeros((2, n_joint))
    for s, (a0, a1) in itertools.product(range(2), itertools.product(range(3), repeat=2)):
        tiger_door = 1 + s  # tiger-left 이면 open-left 가 호랑이 문
        kinds = ["listen" if a == 0 else ("tiger" if a == tiger_door else "correct") for a in (a0, a1)]
        key = {
            ("listen", "listen"): "listen-listen",
            ("correct", "correct"): "both-correct",
            ("tiger", "tiger"): "both-tiger",
        }.get(tuple(kinds))
        if key is None:
            if "listen" in kinds:
                key = "tiger-listen" if "tiger" in kinds else "correct-listen"
            else:
                key = "split"
        rewards[s, a0 * 3 + a1] = DEC_TIGER_REWARDS[key]
    return DecPomdp(
        agent_labels=("agent0", "agent1"),
        state_labels=states,
        action_labels=(actions, actions),
        observation_labels=(observations, observations),
        transitions=transitions,
        observations=observation_table,
        rewards=rewards,
        initial_belief=np.array([0.5, 0.5]),
        discount=discount,
    )


def tiger(discount: float = 0.95) -> Pomdp:
    """단일 에이전트 Tiger (listen −1, 맞는 문 +10, 호랑이 문 −100)"""
    transitions = np.full((3, 2, 2), 0.5)
    transitions[0] = np.eye(2)
    observations = np.full((3, 2, 2), 0.5)
    observations[0] = [[TIGER_LISTEN_ACCURACY, 1 - TIGER_LISTEN_ACCURACY],
                       [1 - TIGER_LISTEN_ACCURACY, TIGER_LISTEN_ACCURACY]]
    rewards = np.array([[-1.0, -100.0, 10.0], [-1.0, 10.0, -100.0]])
    d = DecPomdp(
        agent_labels=("agent",),
        state_labels=("tiger-left", "tiger-right"),
        action_labels=(("listen", "open-left", "open-right"),),
        observation_labels=(("hear-left", "hear-right"),),
        transitions=transitions,
        observations=observations,
        rewards=rewards,
        initial_belief=np.array([0.5, 0.5]),
        discount=discount,
    )
    return flatten_mpomdp(d)


# Recycling: 로봇별 배터리 전이 P(다음 | 현재, 행동), 0 = high, 1 = low
RECYCLING_BATTERY = {
    "search-small": np.array([[0.8, 0.2], [0.4, 0.6]]),
    "search-big": np.array([[0.5, 0.5], [0.7, 0.3]]),
    "recharge": np.array([[1.0, 0.0], [1.0, 0.0]]),
}
RECYCLING_SMALL_CAN = 2.0
RECYCLING_BIG_CAN = 5.0
RECYCLING_DEPLETION = -3.0


def recycling(discount: float = 0.9) -> DecPomdp:
    """
    2-로봇 Recycling (상태 4, 행동 3, 관측 2)
    작은 캔 탐색 +2, 두 로봇이 함께 큰 캔 탐색 +5,
    low 배터리에서 탐색하다 방전되면 −3 후 high 로 복귀
    """
    actions = tuple(RECYCLING_BATTERY)
    levels = ("high", "low")
    states = tuple(f"{x}-{y}" for x in levels for y in levels)
    n_joint = len(actions) ** 2

    def robot_reward(level: int, action: str) -> float:
        depletion = RECYCLING_BATTERY[action][1, 0] if level == 1 and action != "recharge" else 0.0
        base = RECYCLING_SMALL_CAN if action == "search-small" else 0.0
        return base + RECYCLING_DEPLETION * depletion

    transitions = np.zeros((n_joint, 4, 4))
    rewards = np.zeros((4, n_joint))
    for (i0, a0), (i1, a1) in itertools.product(enumerate(actions), repeat=2):
        a = i0 * len(actions) + i1
        transitions[a] = np.kron(RECYCLING_BATTERY[a0], RECYCLING_BATTERY[a1])
        for s, (b0, b1) in enumerate(itertools.product(range(2), repeat=2)):
            rewards[s, a] = robot_reward(b0, a0) + robot_reward(b1, a1)
            if a0 == a1 == "search-big":
                rewards[s, a] += RECYCLING_BIG_CAN
    # 각 로봇은 자기 배터리 수준을 정확히 관측
    observations = np.zeros((n_joint, 4, 4))
    for s in range(4):
        observations[:, s, s] = 1.0
    return DecPomdp(
        agent_labels=("robot1", "robot2"),
        state_labels=states,
        action_labels=(actions, actions),
        observation_labels=(levels, levels),
        transitions=transitions,
        observations=observations,
        rewards=rewards,
        initial_belief=np.array([1.0, 0.0, 0.0, 0.0]),
        discount=discount,
    )


GRID_SIDE = 3
GRID_MOVE_SUCCESS = 0.6
GRID_MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1), "stay": (0, 0)}
GRID_GOALS = (0, GRID_SIDE * GRID_SIDE - 1)


def _grid_step(cell: int, move: str) -> np.ndarray:
    """한 에이전트의 다음 칸 분포 (실패하거나 벽이면 제자리)"""
    row, col = divmod(cell, GRID_SIDE)
    dr, dc = GRID_MOVES[move]
    target_row, target_col = row + dr, col + dc
    distribution = np.zeros(GRID_SIDE * GRID_SIDE)
    if move == "stay" or not (0 <= target_row < GRID_SIDE and 0 <= target_col < GRID_SIDE):
        distribution[cell] = 1.0
        return distribution
    distribution[target_row * GRID_SIDE + target_col] = GRID_MOVE_SUCCESS
    distribution[cell] = 1.0 - GRID_MOVE_SUCCESS
    return distribution


def meeting_grid(discount: float = 0.9) -> DecPomdp:
    """
    3×3 격자 만남 문제 (상태 81, 행동 5, 관측 9)
    두 에이전트가 같은 목표 모서리(좌상단/우하단)에 있으면 +1, 각자 자기 칸을 관측
    """
    n_cells = GRID_SIDE * GRID_SIDE
    moves = tuple(GRID_MOVES)
    cells = tuple(f"c{k}" for k in range(n_cells))
    states = tuple(f"{x}-{y}" for x in cells for y in cells)
    n_joint = len(moves) ** 2
    single = np.stack([[_grid_step(c, m) for c in range(n_cells)] for m in moves])  # [m, c, c']
    transitions = np.zeros((n_joint, n_cells ** 2, n_cells ** 2))
    for m0, m1 in itertools.product(range(len(moves)), repeat=2):
        transitions[m0 * len(moves) + m1] = np.kron(single[m0], single[m1])
    observations = np.zeros((n_joint, n_cells ** 2, n_cells ** 2))
    observations[:, np.arange(n_cells ** 2), np.arange(n_cells ** 2)] = 1.0
    rewards = np.zeros((n_cells ** 2, n_joint))
    for goal in GRID_GOALS:
        rewards[goal * n_cells + goal, :] = 1.0
    initial = np.zeros(n_cells ** 2)
    initial[(GRID_SIDE - 1) * n_cells + (n_cells - GRID_SIDE)] = 1.0  # 우상단, 좌하단
    return DecPomdp(
        agent_labels=("agent0", "agent1"),
        state_labels=states,
        action_labels=(moves, moves),
        observation_labels=(cells, cells),
        transitions=transitions,
        observations=observations,
        rewards=rewards,
        initial_belief=initial,
        discount=discount,
    )


DEC_POMDP_BUILDERS: Dict[str, Callable[..., DecPomdp]] = {
    "dectiger": dec_tiger,
    "recycling": recycling,
    "grid3x3": meeting_grid,
}


def suite_files(discount: float | None = None) -> Dict[str, str]:
    """make-suite 로 쓸 파일 이름 → 내용 (discount 가 None 이면 문제 기본값)"""
    kwargs = {} if discount is None else {"discount": discount}
    files = {f"{name}.dpomdp": emit_dpomdp(build(**kwargs)) for name, build in DEC_POMDP_BUILDERS.items()}
    files["tiger.pomdp"] = emit_pomdp(tiger(**kwargs))
    return files
