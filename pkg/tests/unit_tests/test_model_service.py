"""
모델 서비스 유닛 테스트
결합 인덱스, 신념 갱신, MPOMDP 평탄화, 정규화 검사

실행 방법:
pytest tests/unit_tests/test_model_service.py -v
"""
import dataclasses

import numpy as np
import pytest

from app.exceptions import CapacityExceeded, ConfigError, NormalizationError, ZeroProbabilityObservation
from app.models.pomdp import Belief, JointSpace, Provenance
from app.services import problem_service
from app.services.model_service import (
    belief_update,
    flatten_mpomdp,
    normalize_rows,
    observation_prob,
    pomdp_as_dec_pomdp,
    validate_dec_pomdp,
    validate_pomdp,
)


class TestJointSpace:
    """결합 인덱스 공간 테스트"""

    def test_agent_zero_is_most_significant(self):
        """에이전트 0이 최상위 자리"""
        space = JointSpace([3, 2])
        assert space.size == 6
        assert space.to_index((1, 0)) == 2
        assert space.to_tuple(5) == (2, 1)

    def test_round_trip_all_indices(self):
        """모든 인덱스가 왕복 변환됨"""
        space = JointSpace([2, 3, 4])
        for index in range(space.size):
            assert space.to_index(space.to_tuple(index)) == index

    def test_matching(self):
        """특정 에이전트 구성 요소가 같은 결합 인덱스"""
        space = JointSpace([3, 2])
        np.testing.assert_array_equal(space.matching(1, 1), [1, 3, 5])
        np.testing.assert_array_equal(space.matching(0, 2), [4, 5])

    def test_empty_space_has_single_element(self):
        """에이전트가 없으면 크기 1"""
        space = JointSpace([])
        assert space.size == 1
        assert space.components.shape == (1, 0)

    def test_out_of_range(self):
        """범위를 벗어난 인덱스는 IndexError"""
        space = JointSpace([2, 2])
        with pytest.raises(IndexError):
            space.to_index((2, 0))
        with pytest.raises(IndexError):
            space.to_tuple(4)


class TestBeliefUpdate:
    """신념 갱신 테스트"""

    def test_tiger_listen(self, tiger):
        """균등 신념에서 listen 후 hear-left → [0.85, 0.15]"""
        b = Belief.uniform(2)
        updated = belief_update(tiger, b, 0, 0)
        np.testing.assert_allclose(updated.to_dense(), [0.85, 0.15])

    def test_observation_prob_sums_to_one(self, dec_tiger):
        """Pr(o|b,a)의 o에 대한 합은 1"""
        mp = flatten_mpomdp(dec_tiger)
        b = np.array([0.3, 0.7])
        for a in range(mp.n_actions):
            total = sum(observation_prob(mp, b, a, o) for o in range(mp.n_observations))
            assert total == pytest.approx(1.0)

    def test_dec_tiger_joint_hearing(self, dec_tiger):
        """둘 다 listen, 둘 다 hear-left 확률"""
        mp = flatten_mpomdp(dec_tiger)
        p = observation_prob(mp, np.array([0.5, 0.5]), 0, 0)
        assert p == pytest.approx(0.5 * 0.85 ** 2 + 0.5 * 0.15 ** 2)

    def test_zero_probability_observation(self, recycling):
        """불가능한 관측으로 갱신하면 예외"""
        mp = flatten_mpomdp(recycling)
        recharge_both = mp.joint_actions.to_index((2, 2))
        low_low = mp.joint_observations.to_index((1, 1))
        with pytest.raises(ZeroProbabilityObservation):
            belief_update(mp, Belief.point(0, 4), recharge_both, low_low)

    def test_invalid_index(self, tiger):
        """범위를 벗어난 행동 인덱스"""
        with pytest.raises(IndexError):
            belief_update(tiger, Belief.uniform(2), 7, 0)

    def test_sparse_belief_drops_tiny_entries(self):
        """1e-12 미만 확률은 제거"""
        b = Belief.from_dense(np.array([1.0, 1e-15, 0.0, 1.0]))
        np.testing.assert_array_equal(b.indices, [0, 3])
        assert b[0] == pytest.approx(0.5)
        assert b[1] == 0.0


class TestFlatten:
    """MPOMDP 평탄화 테스트"""

    def test_joint_sizes_and_labels(self, dec_tiger):
        """결합 행동 9개, 결합 관측 4개"""
        mp = flatten_mpomdp(dec_tiger)
        assert mp.n_actions == 9
        assert mp.n_observations == 4
        assert mp.action_labels[0] == "listen+listen"
        assert mp.observation_labels[3] == "hear-right+hear-right"
        assert mp.provenance == Provenance.MPOMDP
        validate_pomdp(mp)

    def test_entry_cap(self, dec_tiger):
        """|⨯A|·|⨯Ω| 상한 초과"""
        with pytest.raises(CapacityExceeded):
            flatten_mpomdp(dec_tiger, entry_cap=10)

    def test_single_agent_round_trip(self, tiger):
        """POMDP → 1-에이전트 Dec-POMDP → POMDP"""
        again = flatten_mpomdp(pomdp_as_dec_pomdp(tiger))
        assert again.equals(tiger)


class TestNormalization:
    """확률 정규화 검사 테스트"""

    def test_exact_rows_untouched(self):
        """정확한 행은 그대로"""
        table, count = normalize_rows(np.array([[0.25, 0.75]]), "T")
        assert count == 0
        np.testing.assert_array_equal(table, [[0.25, 0.75]])

    def test_small_error_renormalized(self):
        """1e-6 이내 오차는 재정규화"""
        table, count = normalize_rows(np.array([[0.5, 0.5 + 5e-7], [0.5, 0.5]]), "T")
        assert count == 1
        assert table[0].sum() == pytest.approx(1.0, abs=1e-12)

    def test_large_error_rejected(self):
        """1e-6 초과 오차는 NormalizationError"""
        with pytest.raises(NormalizationError):
            normalize_rows(np.array([[0.5, 0.6]]), "T")

    def test_negative_rejected(self):
        """음수 확률"""
        with pytest.raises(NormalizationError):
            normalize_rows(np.array([[-0.1, 1.1]]), "O")

    def test_discount_range(self, dec_tiger):
        """할인율 1은 거부"""
        with pytest.raises(NormalizationError):
            validate_dec_pomdp(dataclasses.replace(dec_tiger, discount=1.0))

    @pytest.mark.parametrize("discount", [0.0, 1.0, 1.5, -0.2])
    def test_discount_override_range(self, dec_tiger, tiger, discount):
        """with_discount 도 (0, 1) 밖이면 설정 오류"""
        with pytest.raises(ConfigError):
            dec_tiger.with_discount(discount)
        with pytest.raises(ConfigError):
            tiger.with_discount(discount)
        assert dec_tiger.with_discount(0.5).discount == 0.5


class TestBenchmarkGenerators:
    """벤치마크 문제 생성기 테스트"""

    @pytest.mark.parametrize("name", sorted(problem_service.DEC_POMDP_BUILDERS))
    def test_generated_models_are_valid(self, name):
        """생성한 모델이 불변 조건을 만족"""
        validate_dec_pomdp(problem_service.DEC_POMDP_BUILDERS[name]())

    def test_sizes(self):
        """상태/행동/관측 개수"""
        recycling = problem_service.recycling()
        assert (recycling.n_states, recycling.joint_actions.size, recycling.joint_observations.size) == (4, 9, 4)
        grid = problem_service.meeting_grid()
        assert grid.n_states == 81
        assert grid.action_labels[0] == ("up", "down", "left", "right", "stay")
        assert len(grid.observation_labels[1]) == 9

    def test_dec_tiger_rewards(self, dec_tiger):
        """DecTiger 보상 표"""
        listen_listen = dec_tiger.joint_actions.to_index((0, 0))
        right_right = dec_tiger.joint_actions.to_index((2, 2))
        left_listen = dec_tiger.joint_actions.to_index((1, 0))
        assert dec_tiger.rewards[0, listen_listen] == -2.0
        assert dec_tiger.rewards[0, right_right] == 20.0
        assert dec_tiger.rewards[1, right_right] == -50.0
        assert dec_tiger.rewards[0, left_listen] == -101.0
        assert dec_tiger.rewards[1, left_listen] == 9.0
