"""
명령행 유닛 테스트
main() 종료 코드, 출력 파일, 명령별 동작

실행 방법:
pytest tests/unit_tests/test_commands.py -v
"""
import csv
import json
from pathlib import Path

import pytest

import main
from app.commands import evaluate as evaluate_command
from app.services.best_response_service import compile_best_response
from app.services.fsc_service import constant_fsc, deserialize, serialize
from app.services.parser_service import parse_dpomdp, parse_pomdp
from app.storage import load_problem


@pytest.fixture
def listen_files(tmp_path, dec_tiger):
    """DecTiger 두 에이전트의 listen 전용 FSC 파일"""
    paths = []
    for j in range(2):
        path = tmp_path / f"listen{j}.fsc.json"
        path.write_text(serialize(
            constant_fsc(dec_tiger.action_labels[j], dec_tiger.observation_labels[j], "listen", agent=j)
        ))
        paths.append(str(path))
    return paths


def value_line(output: str) -> float:
    line = next(x for x in output.splitlines() if x.startswith("value: "))
    return float(line.split(": ")[1])


class TestExitCodes:
    """종료 코드 테스트"""

    def test_missing_problem_file(self, tmp_path):
        """없는 문제 파일 → 2"""
        assert main.main(["solve", "--problem", str(tmp_path / "nowhere.dpomdp")]) == 2

    def test_syntax_error(self, tmp_path):
        """문법 오류 문제 파일 → 2"""
        path = tmp_path / "broken.dpomdp"
        path.write_text("hello world\n")
        assert main.main(["eval", "--problem", str(path), "--fsc", "a.json"]) == 2

    def test_fsc_count_mismatch(self, problems_dir, listen_files):
        """FSC 개수가 에이전트 수와 다름 → 2"""
        code = main.main(["eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", listen_files[0]])
        assert code == 2

    def test_alphabet_mismatch(self, tmp_path, problems_dir, recycling):
        """다른 문제의 FSC → 2"""
        paths = []
        for j in range(2):
            path = tmp_path / f"r{j}.fsc.json"
            path.write_text(serialize(
                constant_fsc(recycling.action_labels[j], recycling.observation_labels[j], "recharge", agent=j)
            ))
            paths.append(str(path))
        assert main.main(["eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", *paths]) == 2

    def test_invalid_gamma(self, problems_dir):
        """범위를 벗어난 할인율 → 설정 오류 2"""
        assert main.main(["solve", "--problem", str(problems_dir / "dectiger.dpomdp"), "--gamma", "1.5"]) == 2

    def test_invalid_gamma_eval(self, problems_dir, listen_files):
        """eval --gamma 1.5 도 평가 전에 2"""
        code = main.main([
            "eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", *listen_files, "--gamma", "1.5",
        ])
        assert code == 2

    def test_invalid_gamma_compile_br(self, tmp_path, problems_dir, listen_files):
        """compile-br --gamma 0 → 2, 출력 파일 없음"""
        code = main.main([
            "compile-br", "--problem", str(problems_dir / "dectiger.dpomdp"), "--agent", "0",
            "--fsc", listen_files[1], "--gamma", "0", "--out", str(tmp_path / "br.pomdp"),
        ])
        assert code == 2
        assert not (tmp_path / "br.pomdp").exists()

    def test_unknown_command(self):
        """정의되지 않은 명령은 argparse 가 종료"""
        with pytest.raises(SystemExit) as e:
            main.main(["dance"])
        assert e.value.code == 2

    def test_internal_error(self, monkeypatch, problems_dir, listen_files):
        """예상하지 못한 예외 → 1"""
        def explode(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr(evaluate_command, "evaluate_joint", explode)
        code = main.main(["eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", *listen_files])
        assert code == 1


class TestEval:
    """eval 명령 테스트"""

    def test_both_listen_value(self, capsys, problems_dir, listen_files):
        """둘 다 listen: −20"""
        code = main.main([
            "eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", *listen_files, "--eval-eps", "1e-9",
        ])
        assert code == 0
        assert value_line(capsys.readouterr().out) == pytest.approx(-20.0, abs=1e-5)

    def test_simulation_output(self, capsys, problems_dir, listen_files):
        """--simulate 추정 출력"""
        code = main.main([
            "eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", *listen_files,
            "--simulate", "50", "--horizon", "30",
        ])
        assert code == 0
        assert "simulated: " in capsys.readouterr().out

    def test_gamma_override(self, capsys, problems_dir, listen_files):
        """--gamma 0.5: −2/(1−0.5) = −4"""
        main.main([
            "eval", "--problem", str(problems_dir / "dectiger.dpomdp"), "--fsc", *listen_files,
            "--gamma", "0.5", "--eval-eps", "1e-9",
        ])
        assert value_line(capsys.readouterr().out) == pytest.approx(-4.0, abs=1e-6)


class TestSolve:
    """solve 명령 테스트"""

    def test_writes_run_and_controllers(self, capsys, tmp_path, problems_dir):
        """실행 결과, FSC, DOT, Γ 파일 저장 후 eval 값 일치"""
        problem = tmp_path / "dectiger.dpomdp"
        problem.write_text((problems_dir / "dectiger.dpomdp").read_text())
        code = main.main([
            "solve", "--problem", str(problem), "--init", "random", "--seed", "2", "--max-init-nodes", "2",
            "--max-trials", "5", "--max-iterations", "2", "--eval-eps", "1e-6", "--dot", "--dump-gamma",
        ])
        assert code == 0
        solved_value = value_line(capsys.readouterr().out)

        report = json.loads((tmp_path / "dectiger.run.json").read_text())
        assert report["value"] == pytest.approx(solved_value, abs=1e-6)
        assert report["config"]["init"] == "random"
        assert len(report["restarts"][0]["trace"]) == 2
        for agent in range(2):
            assert (tmp_path / f"dectiger.agent{agent}.dot").is_file()
            gamma = json.loads((tmp_path / f"dectiger.agent{agent}.gamma.json").read_text())
            assert gamma["vectors"]
            assert deserialize((tmp_path / f"dectiger.agent{agent}.fsc.json").read_text()).agent == agent

        code = main.main([
            "eval", "--problem", str(problem), "--eval-eps", "1e-6",
            "--fsc", str(tmp_path / "dectiger.agent0.fsc.json"), str(tmp_path / "dectiger.agent1.fsc.json"),
        ])
        assert code == 0
        assert value_line(capsys.readouterr().out) == pytest.approx(solved_value, abs=1e-5)

    def test_out_path(self, tmp_path, problems_dir):
        """--out 지정 시 같은 이름 줄기로 저장"""
        out = tmp_path / "runs" / "tiger.run.json"
        code = main.main([
            "solve", "--problem", str(problems_dir / "tiger.pomdp"), "--init", "random",
            "--max-trials", "3", "--max-iterations", "1", "--out", str(out),
        ])
        assert code == 0
        assert out.is_file()
        assert (tmp_path / "runs" / "tiger.agent0.fsc.json").is_file()


class TestCompileBr:
    """compile-br 명령 테스트"""

    def test_emitted_pomdp_matches(self, capsys, tmp_path, problems_dir, listen_files, dec_tiger):
        """출력 .pomdp = 직접 만든 최적 응답 POMDP, 범례 CSV"""
        out = tmp_path / "br.pomdp"
        code = main.main([
            "compile-br", "--problem", str(problems_dir / "dectiger.dpomdp"), "--agent", "0",
            "--fsc", listen_files[1], "--out", str(out),
        ])
        assert code == 0
        assert "states_after_elimination: 6" in capsys.readouterr().out
        expected = compile_best_response(dec_tiger, [deserialize(Path(listen_files[1]).read_text())], 0)
        assert parse_pomdp(out.read_text()).equals(expected.pomdp, atol=1e-12)

        with open(tmp_path / "br.pomdp.legend.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 6
        assert rows[0]["observation"] == "NULL"

    def test_no_eliminate_flag(self, capsys, tmp_path, problems_dir, listen_files):
        """--no-eliminate: 지연 정식화 확장 상태 2·1·3 = 6 그대로"""
        code = main.main([
            "compile-br", "--problem", str(problems_dir / "dectiger.dpomdp"), "--agent", "1",
            "--fsc", listen_files[0], "--out", str(tmp_path / "br.pomdp"), "--no-eliminate", "--br-form", "lagged",
        ])
        assert code == 0
        output = capsys.readouterr().out
        assert "states_before_elimination: 6" in output
        assert "states_after_elimination: 6" in output


class TestMakeSuite:
    """make-suite 명령 테스트"""

    def test_files_parse(self, tmp_path):
        """생성한 파일이 모두 파싱됨"""
        assert main.main(["make-suite", "--out", str(tmp_path), "--gamma", "0.8"]) == 0
        for name in ("dectiger.dpomdp", "recycling.dpomdp", "grid3x3.dpomdp"):
            d, diagnostics = parse_dpomdp((tmp_path / name).read_text())
            assert d.discount == 0.8
            assert diagnostics.clean
        d, _ = load_problem(tmp_path / "tiger.pomdp")
        assert d.n_agents == 1


class TestBenchCommand:
    """bench 명령 테스트"""

    def test_missing_suite(self, tmp_path):
        """suite 디렉터리가 없으면 2"""
        assert main.main(["bench", "--suite", str(tmp_path / "none")]) == 2

    def test_missing_required_files(self, tmp_path):
        """필수 문제 파일이 없으면 2"""
        assert main.main(["bench", "--suite", str(tmp_path)]) == 2
