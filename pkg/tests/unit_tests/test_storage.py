"""
파일 입출력 유닛 테스트

실행 방법:
pytest tests/unit_tests/test_storage.py -v
"""
import os

import pytest

from app import storage
from app.exceptions import ConfigError


class TestAtomicWrite:
    """원자적 쓰기 테스트"""

    def test_text_and_bytes(self, tmp_path):
        """텍스트와 바이트 모두 저장, 임시 파일 남지 않음"""
        storage.atomic_write(tmp_path / "a.txt", "가나다")
        storage.atomic_write(tmp_path / "b.bin", b"\x00\x01")
        assert (tmp_path / "a.txt").read_text(encoding="utf-8") == "가나다"
        assert (tmp_path / "b.bin").read_bytes() == b"\x00\x01"
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.bin"]

    def test_creates_parent_directories(self, tmp_path):
        """상위 디렉터리 자동 생성"""
        target = storage.atomic_write(tmp_path / "x" / "y" / "z.json", "{}")
        assert target.is_file()

    def test_overwrite(self, tmp_path):
        """기존 파일 덮어쓰기"""
        storage.atomic_write(tmp_path / "a.txt", "old")
        storage.atomic_write(tmp_path / "a.txt", "new")
        assert (tmp_path / "a.txt").read_text() == "new"


class TestLoadProblem:
    """문제 로드 테스트"""

    def test_missing_file(self, tmp_path):
        """없는 파일 → ConfigError"""
        with pytest.raises(ConfigError) as e:
            storage.load_problem(tmp_path / "none.dpomdp")
        assert e.value.exit_code == 2

    def test_cached_until_modified(self, tmp_path, problems_dir):
        """같은 파일은 캐시, 수정하면 다시 파싱"""
        path = tmp_path / "dectiger.dpomdp"
        text = (problems_dir / "dectiger.dpomdp").read_text()
        path.write_text(text)
        first, _ = storage.load_problem(path)
        second, _ = storage.load_problem(path)
        assert first is second

        path.write_text(text.replace("discount: 0.9", "discount: 0.8"))
        stat = path.stat()
        os.utime(path, ns=(stat.st_atime_ns, stat.st_mtime_ns + 1_000_000))
        third, _ = storage.load_problem(path)
        assert third.discount == 0.8

    def test_read_text_missing(self, tmp_path):
        """read_text 도 ConfigError"""
        with pytest.raises(ConfigError):
            storage.read_text(tmp_path / "none.json")
