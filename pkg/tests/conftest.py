"""Shared fixtures: deterministic fixture repositories and the acceptance
summary hook (one pass/fail line per criterion at the end of the run)."""

from __future__ import annotations

from pathlib import Path

import pytest

# --- fixture repo: ten files with a hand-enumerated inventory -------------

REPO10_FILES = {
    "pkg/config.py": (
        'DEFAULTS = {"rate": 1}\n'
        "\n"
        "\n"
        "def parse_config(path):\n"
        "    with open(path) as fh:\n"
        "        return fh.read()\n"
    ),
    "pkg/sensors.py": (
        "import math\n"
        "\n"
        "\n"
        "class Sensor:\n"
        '    unit = "C"\n'
        "\n"
        "    def read(self):\n"
        "        return 0.0\n"
        "\n"
        "    def calibrate(self, offset):\n"
        "        self.offset = offset\n"
        "        return self\n"
        "\n"
        "\n"
        "def average(values):\n"
        "    return sum(values) / len(values)\n"
    ),
    "pkg/motors.py": (
        "class Motor:\n"
        "    speed: int = 0\n"
        "\n"
        "    def spin(self, rate):\n"
        "        return rate * 2\n"
    ),
    "pkg/decorated.py": (
        "import functools\n"
        "\n"
        "\n"
        "@functools.lru_cache(maxsize=None)\n"
        "def cached_lookup(key):\n"
        "    return key * 2\n"
        "\n"
        "\n"
        "class Registry:\n"
        "    entries = []\n"
        "\n"
        "    @staticmethod\n"
        "    def register(name):\n"
        "        Registry.entries.append(name)\n"
    ),
    "pkg/nested.py": (
        "def outer(x):\n"
        "    def inner(y):\n"
        "        return y + 1\n"
        "    return inner(x)\n"
        "\n"
        "\n"
        "class Wrapper:\n"
        "    class Inner:\n"
        "        pass\n"
        "\n"
        "    def method(self):\n"
        "        return 1\n"
    ),
    "pkg/assignments.py": (
        "A = 1\n"
        "B, C = 2, 3\n"
        "D = E = 4\n"
        "LONG_MAP = {\n"
        '    "k": 1,\n'
        "}\n"
    ),
    "pkg/empty.py": "",
    "pkg/broken.py": "def broken(:\n    pass\n",
    "scripts/main.py": (
        "from pkg.config import parse_config\n"
        "\n"
        "\n"
        "def main():\n"
        '    cfg = parse_config("app.ini")\n'
        "    return cfg\n"
    ),
    "async_fetch.py": (
        "async def fetch(url):\n"
        "    return url\n"
        "\n"
        "\n"
        "if True:\n"
        "    HIDDEN = 1\n"
    ),
}

# (kind, qualified_name, (start, end)) — enumerated by hand from the files
# above; decorators and headers included, nested defs not listed.
REPO10_INVENTORY = [
    ("Function", "fetch", (1, 2), "async_fetch.py"),
    ("GlobalVariable", "A", (1, 1), "pkg/assignments.py"),
    ("GlobalVariable", "B", (2, 2), "pkg/assignments.py"),
    ("GlobalVariable", "D", (3, 3), "pkg/assignments.py"),
    ("GlobalVariable", "LONG_MAP", (4, 6), "pkg/assignments.py"),
    ("GlobalVariable", "DEFAULTS", (1, 1), "pkg/config.py"),
    ("Function", "parse_config", (4, 6), "pkg/config.py"),
    ("Function", "cached_lookup", (4, 6), "pkg/decorated.py"),
    ("ClassVariable", "Registry.entries", (10, 10), "pkg/decorated.py"),
    ("ClassFunction", "Registry.register", (12, 14), "pkg/decorated.py"),
    ("ClassVariable", "Motor.speed", (2, 2), "pkg/motors.py"),
    ("ClassFunction", "Motor.spin", (4, 5), "pkg/motors.py"),
    ("Function", "outer", (1, 4), "pkg/nested.py"),
    ("ClassFunction", "Wrapper.method", (11, 12), "pkg/nested.py"),
    ("ClassVariable", "Sensor.unit", (5, 5), "pkg/sensors.py"),
    ("ClassFunction", "Sensor.read", (7, 8), "pkg/sensors.py"),
    ("ClassFunction", "Sensor.calibrate", (10, 12), "pkg/sensors.py"),
    ("Function", "average", (15, 16), "pkg/sensors.py"),
    ("Function", "main", (4, 6), "scripts/main.py"),
]

# --- mini repo for the end-to-end completion scenario ----------------------

MINI_REPO_FILES = {
    "util.py": (
        "def parse_config(path):\n"
        "    with open(path) as fh:\n"
        "        return fh.read()\n"
        "\n"
        "\n"
        "def load_defaults():\n"
        '    return {"rate": 1}\n'
    ),
    "models.py": (
        "class Sensor:\n"
        '    unit = "C"\n'
        "\n"
        "    def read(self):\n"
        "        return 0.0\n"
        "\n"
        "\n"
        "THRESHOLD = 5\n"
    ),
    "main.py": "import util\n",
}

MINI_PREFIX = "import util\n\n\ndef run():\n    cfg = parse_conf"


def write_repo(root: Path, files: dict[str, str]) -> Path:
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    return root


@pytest.fixture
def repo10(tmp_path: Path) -> Path:
    return write_repo(tmp_path / "repo10", REPO10_FILES)


@pytest.fixture
def mini_repo(tmp_path: Path) -> Path:
    return write_repo(tmp_path / "mini", MINI_REPO_FILES)


# --- acceptance summary -----------------------------------------------------


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): top-level acceptance criterion"
    )


def pytest_terminal_summary(terminalreporter):
    rows: list[tuple[str, str]] = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", "call") != "call":
                continue
            marker = getattr(report, "_acceptance_name", None)
            if marker:
                rows.append((marker, "PASS" if status == "passed" else "FAIL"))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(rows):
            terminalreporter.write_line(f"[{verdict}] {name}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and marker.args:
        report._acceptance_name = marker.args[0]
