"""
POMDP 솔버 서비스 유닛 테스트
하한/상한, 격자 가치 반복과의 비교, 지배 벡터 제거, Γ 덤프

실행 방법:
pytest tests/unit_tests/test_solver_service.py -v
"""
import numpy as np
import pytest

from app.exceptions import ProblemFormatError
from app.models.alpha import AlphaVector, AlphaVectorSet
from app.schemas.run import SolverConfig
from app.services.model_service import flatten_mpomdp
from app.services.solver_service import (
    UpperBound,
    backup,
    blind_policy_vectors,
    dump_alpha_vectors,
    load_alpha_vectors,
    mdp_upper_bound,
    prune,
    solve,
)

ACCURATE = SolverConfig(epsilon=0.01, timeout_seconds=60.0)


def two_state_value(m, points: int = 2001, tolerance: float = 1e-7) -> float:
    """상태 2개 POMDP의 신념 격자 가치 반복 (선형 보간)"""
    p = np.linspace(0.0, 1.0, points)
    beliefs = np.stack([p, 1.0 - p], axis=1)
    transitions = [t.toarray() for t in m.transitions]
    values = np.zeros(points)
    while True:
        q = []
        for a in range(m.n_actions):
            total = beliefs @ m.rewards[:, a]
            predicted = beliefs @ transitions[a]
            for o in range(m.n_observations):
                joint = predicted * m.observations[a][:, o]
                prob = joint.sum(axis=1)
                safe = prob > 1e-15
                posterior = np.where(safe, joint[:, 0] / np.where(safe, prob, 1.0), 0.0)
                total = total + m.discount * prob * np.interp(posterior, p, values)
            q.append(total)
        updated = np.max(q, axis=0)
        if np.abs(updated - values).max() < tolerance:
            return float(np.interp(m.initial_belief[0], p, updated))
        values = updated


class TestSolve:
    """솔버 정확도 테스트"""

    def test_tiger_matches_grid_oracle(self, tiger):
        """Tiger 하한이 격자 가치 반복과 0.1 이내"""
        result = solve(tiger, ACCURATE)
        oracle = two_state_value(tiger)
        assert result.lb_at_b0 <= result.ub_at_b0 + 1e-9
        assert abs(result.lb_at_b0 - oracle) <= 0.1
        assert result.ub_at_b0 >= oracle - 0.1

    def test_dec_tiger_mpomdp_matches_grid_oracle(self, dec_tiger):
        """DecTiger MPOMDP 하한이 격자 가치 반복과 0.1 이내"""
        mp = flatten_mpomdp(dec_tiger)
        result = solve(mp, ACCURATE)
        assert abs(result.lb_at_b0 - two_state_value(mp)) <= 0.1

    def test_bounds_are_monotone(self, recycling):
        """하한은 늘기만, 상한은 줄기만"""
        mp = flatten_mpomdp(recycling)
        result = solve(mp, SolverConfig(max_trials=30, timeout_seconds=60.0))
        lower = [lb for _, lb, _, _, _ in result.history]
        upper = [ub for _, _, ub, _, _ in result.history]
        assert all(b >= a - 1e-9 for a, b in zip(lower, lower[1:]))
        assert all(b <= a + 1e-9 for a, b in zip(upper, upper[1:]))
        assert all(lb <= ub + 1e-9 for lb, ub in zip(lower, upper))

    def test_trial_cap_is_deterministic(self, dec_tiger):
        """max_trials 로 돌리면 같은 Γ"""
        mp = flatten_mpomdp(dec_tiger)
        config = SolverConfig(max_trials=5, timeout_seconds=600.0, epsilon=1e-6)
        first, second = solve(mp, config), solve(mp, config)
        assert first.iterations == second.iterations == 5
        np.testing.assert_array_equal(first.gamma_set.matrix, second.gamma_set.matrix)
        assert first.gamma_set.actions == second.gamma_set.actions
        assert not first.converged

    def test_converged_flag(self, tiger):
        """간격이 ε 이하면 converged"""
        result = solve(tiger, ACCURATE)
        assert result.converged == (result.ub_at_b0 - result.lb_at_b0 <= ACCURATE.epsilon)


class TestBounds:
    """초기 하한/상한 테스트"""

    def test_blind_listen_vector(self, tiger):
        """listen 블라인드 벡터 = −1/(1−γ)"""
        listen = tiger.action_labels.index("listen")
        vectors = blind_policy_vectors(tiger)
        assert [v.action for v in vectors] == [0, 1, 2]
        np.testing.assert_allclose(vectors[listen].values, [-20.0, -20.0])

    def test_mdp_bound_dominates_blind(self, tiger):
        """MDP 상한 ≥ 모든 블라인드 벡터"""
        corners = mdp_upper_bound(tiger)
        for v in blind_policy_vectors(tiger):
            assert np.all(corners >= v.values - 1e-9)

    def test_backup_improves_on_blind_set(self, tiger):
        """b0 백업 결과는 기존 Γ 값 이상"""
        gamma_set = AlphaVectorSet(blind_policy_vectors(tiger))
        b0 = tiger.initial_belief
        vector = backup(tiger, b0, gamma_set)
        assert float(vector.values @ b0) >= gamma_set.value(b0) - 1e-9


class TestPrune:
    """지배 벡터 제거 테스트"""

    def test_pointwise_dominated_removed(self):
        """점별 지배 벡터와 중복 벡터 제거, 순서 유지"""
        gamma_set = AlphaVectorSet([
            AlphaVector(np.array([1.0, 1.0]), 0),
            AlphaVector(np.array([0.0, 0.0]), 1),
            AlphaVector(np.array([1.0, 1.0]), 2),
            AlphaVector(np.array([2.0, 0.0]), 3),
        ])
        assert prune(gamma_set) == 2
        assert gamma_set.actions == [0, 3]

    def test_nothing_to_remove(self):
        """서로 지배하지 않으면 그대로"""
        gamma_set = AlphaVectorSet([
            AlphaVector(np.array([1.0, 0.0]), 0),
            AlphaVector(np.array([0.0, 1.0]), 1),
        ])
        assert prune(gamma_set) == 0
        assert len(gamma_set) == 2


class TestUpperBound:
    """톱니 보간 상한 테스트"""

    def test_sawtooth_interpolation(self):
        """내부 점 하나로 낮아진 상한"""
        upper = UpperBound(np.array([10.0, 0.0]))
        assert upper.value(np.array([0.5, 0.5])) == pytest.approx(5.0)
        upper.update(np.array([0.5, 0.5]), 2.0)
        assert upper.value(np.array([0.5, 0.5])) == pytest.approx(2.0)
        assert upper.value(np.array([0.75, 0.25])) == pytest.approx(6.0)
        assert upper.value(np.array([1.0, 0.0])) == pytest.approx(10.0)

    def test_higher_value_ignored(self):
        """현재 상한보다 큰 값은 저장하지 않음"""
        upper = UpperBound(np.array([10.0, 0.0]))
        upper.update(np.array([0.5, 0.5]), 7.0)
        assert len(upper) == 0

    def test_corner_update(self):
        """꼭짓점 신념이면 꼭짓점 값을 낮춤"""
        upper = UpperBound(np.array([10.0, 0.0]))
        upper.update(np.array([1.0, 0.0]), 8.0)
        assert len(upper) == 0
        assert upper.value(np.array([1.0, 0.0])) == pytest.approx(8.0)


class TestDump:
    """Γ 저장/복원 테스트"""

    def test_round_trip(self, tiger):
        """덤프 후 다시 읽으면 같은 벡터"""
        gamma_set = AlphaVectorSet(blind_policy_vectors(tiger))
        loaded = load_alpha_vectors(dump_alpha_vectors(gamma_set, tiger), tiger)
        np.testing.assert_allclose(loaded.matrix, gamma_set.matrix)
        assert loaded.actions == gamma_set.actions

    def test_state_list_mismatch(self, tiger):
        """다른 문제의 Γ 파일"""
        gamma_set = AlphaVectorSet(blind_policy_vectors(tiger))
        text = dump_alpha_vectors(gamma_set, tiger).replace("tiger-left", "somewhere")
        with pytest.raises(ProblemFormatError):
            load_alpha_vectors(text, tiger)
