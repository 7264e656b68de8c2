"""
최적 응답 서비스 유닛 테스트
최적 응답 POMDP 에서의 FSC 가치 = Dec-POMDP 결합 가치, 상태 소거, 출력

실행 방법:
pytest tests/unit_tests/test_best_response_service.py -v
"""
import numpy as np
import pytest

from app.exceptions import AlphabetMismatch, CapacityExceeded, StochasticActionRuleUnsupported
from app.models.best_response import BestResponseForm
from app.models.fsc import Fsc
from app.services.best_response_service import (
    build_best_response,
    build_best_response_lagged,
    compile_best_response,
    eliminate_unreachable,
    legend,
    reachable_states,
)
from app.services.fsc_service import constant_fsc, evaluate_fsc, evaluate_joint, random_fsc
from app.services.model_service import validate_pomdp
from app.services.parser_service import emit_pomdp, parse_pomdp

EVAL_EPSILON = 1e-4


def random_pair(d, rng):
    return [
        random_fsc(d.action_labels[j], d.observation_labels[j], 4, rng, agent=j)
        for j in range(d.n_agents)
    ]


def listen_pair(d):
    return [constant_fsc(d.action_labels[j], d.observation_labels[j], "listen", agent=j) for j in range(2)]


def small_search_pair(d):
    return [constant_fsc(d.action_labels[j], d.observation_labels[j], "search-small", agent=j) for j in range(2)]


class TestEquivalence:
    """최적 응답 POMDP 위 평가 = 결합 평가"""

    @pytest.mark.parametrize("form", list(BestResponseForm))
    @pytest.mark.parametrize("problem", ["dec_tiger", "recycling"])
    def test_random_pairs(self, request, problem, form):
        """랜덤 결정적 FSC 쌍 25개 × 두 에이전트"""
        d = request.getfixturevalue(problem)
        rng = np.random.default_rng(2024)
        bound = 2 * EVAL_EPSILON / (1 - d.discount)
        for _ in range(25):
            fscs = random_pair(d, rng)
            joint_value = evaluate_joint(d, fscs, EVAL_EPSILON)
            for agent in range(2):
                brp = compile_best_response(d, fscs, agent, form)
                table = evaluate_fsc(brp.pomdp, fscs[agent], EVAL_EPSILON)
                assert abs(table.value_at(brp.pomdp.initial_belief) - joint_value) <= bound

    def test_stochastic_partner_momdp(self, dec_tiger):
        """확률적 η 파트너도 MOMDP 정식화에서 같은 가치"""
        partner = Fsc(
            action_labels=dec_tiger.action_labels[1],
            observation_labels=dec_tiger.observation_labels[1],
            action_rule=np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
            node_transition=np.array([
                [[0.6, 0.4], [0.2, 0.8]],
                [[1.0, 0.0], [1.0, 0.0]],
            ]),
            agent=1,
        )
        own = constant_fsc(dec_tiger.action_labels[0], dec_tiger.observation_labels[0], "listen")
        brp = compile_best_response(dec_tiger, [own, partner], 0)
        value = evaluate_fsc(brp.pomdp, own, 1e-7).value_at(brp.pomdp.initial_belief)
        assert value == pytest.approx(evaluate_joint(dec_tiger, [own, partner], 1e-7), abs=1e-5)

    def test_elimination_preserves_value(self, recycling):
        """소거 전후 가치 동일"""
        rng = np.random.default_rng(5)
        fscs = random_pair(recycling, rng)
        full = compile_best_response(recycling, fscs, 1, eliminate=False)
        reduced = compile_best_response(recycling, fscs, 1)
        before = evaluate_fsc(full.pomdp, fscs[1], 1e-7).value_at(full.pomdp.initial_belief)
        after = evaluate_fsc(reduced.pomdp, fscs[1], 1e-7).value_at(reduced.pomdp.initial_belief)
        assert before == pytest.approx(after, abs=1e-6)


class TestConstruction:
    """확장 상태 구성 테스트"""

    def test_dec_tiger_listen_partner_size(self, dec_tiger):
        """1-노드 listen 파트너: |S|·|N|·(|Ω_i|+1) = 6, 소거 비율 1"""
        brp = compile_best_response(dec_tiger, listen_pair(dec_tiger), 0)
        assert brp.states_before_elimination == 6
        assert brp.states_after_elimination == 6
        assert brp.elimination_ratio == 1.0
        validate_pomdp(brp.pomdp)

    def test_partner_list_forms(self, dec_tiger):
        """FSC 목록은 |I|개 또는 |I|−1개"""
        pair = listen_pair(dec_tiger)
        full = build_best_response(dec_tiger, pair, 0)
        short = build_best_response(dec_tiger, [pair[1]], 0)
        assert full.pomdp.equals(short.pomdp)
        with pytest.raises(AlphabetMismatch):
            build_best_response(dec_tiger, [], 0)

    def test_initial_belief_on_null_layer(self, dec_tiger):
        """초기 신념은 NULL 관측, 시작 노드 상태에만"""
        brp = build_best_response(dec_tiger, listen_pair(dec_tiger), 1)
        support = np.flatnonzero(brp.pomdp.initial_belief)
        assert all(brp.state_of(k).is_sentinel for k in support)
        assert all(brp.state_of(k).n_others == (0,) for k in support)
        np.testing.assert_allclose(brp.pomdp.initial_belief[support], dec_tiger.initial_belief)

    def test_observation_is_deterministic_outside_null(self, recycling):
        """NULL 이 아닌 확장 상태의 관측은 자기 관측 성분"""
        brp = build_best_response(recycling, small_search_pair(recycling), 0)
        for k, e in enumerate(brp.states):
            if not e.is_sentinel:
                assert brp.pomdp.observations[0, k, e.own_obs] == 1.0

    def test_capacity(self, dec_tiger):
        """확장 상태 상한 초과"""
        with pytest.raises(CapacityExceeded) as e:
            build_best_response(dec_tiger, listen_pair(dec_tiger), 0, state_cap=5)
        assert e.value.exit_code == 4

    def test_lagged_rejects_stochastic_action_rule(self, dec_tiger):
        """지연 정식화는 확률적 ψ 파트너 불가"""
        partner = Fsc(
            action_labels=dec_tiger.action_labels[1],
            observation_labels=dec_tiger.observation_labels[1],
            action_rule=np.array([[0.5, 0.5, 0.0]]),
            node_transition=np.ones((1, 2, 1)),
            agent=1,
        )
        with pytest.raises(StochasticActionRuleUnsupported):
            build_best_response_lagged(dec_tiger, [None, partner], 0)

    def test_reachable_states_sorted(self, recycling):
        """도달 상태는 오름차순이며 초기 지지 집합 포함"""
        rng = np.random.default_rng(9)
        brp = build_best_response(recycling, random_pair(recycling, rng), 0)
        reachable = reachable_states(brp)
        assert np.all(np.diff(reachable) > 0)
        assert set(np.flatnonzero(brp.pomdp.initial_belief)) <= set(reachable.tolist())

    @pytest.mark.parametrize("form", list(BestResponseForm))
    def test_elimination_idempotent(self, recycling, form):
        """소거를 두 번 해도 같은 POMDP, 같은 비율"""
        rng = np.random.default_rng(21)
        once = compile_best_response(recycling, random_pair(recycling, rng), 1, form)
        twice = eliminate_unreachable(once)
        assert twice.pomdp.equals(once.pomdp)
        assert twice.states == once.states
        assert twice.states_after_elimination == once.states_after_elimination
        assert twice.elimination_ratio == once.elimination_ratio


class TestOutput:
    """.pomdp 출력과 범례 테스트"""

    @pytest.mark.parametrize("form", list(BestResponseForm))
    def test_emit_round_trip(self, dec_tiger, form):
        """출력한 .pomdp 를 다시 읽으면 같은 POMDP"""
        rng = np.random.default_rng(17)
        brp = compile_best_response(dec_tiger, random_pair(dec_tiger, rng), 0, form)
        assert parse_pomdp(emit_pomdp(brp.pomdp)).equals(brp.pomdp, atol=1e-12)

    def test_legend(self, dec_tiger):
        """범례 행 = 확장 상태"""
        brp = compile_best_response(dec_tiger, listen_pair(dec_tiger), 0)
        rows = legend(brp, dec_tiger)
        assert len(rows) == brp.states_after_elimination
        assert rows[0] == {"index": "0", "state": "tiger-left", "partner_nodes": "0", "observation": "NULL"}
        assert rows[1]["observation"] == "hear-left"
