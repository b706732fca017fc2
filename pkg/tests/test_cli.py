import cmath
import csv
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apalg.cli import (EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE, EXIT_VERIFY, main,
                       parse_number, parse_problem_file, run_pipeline, serialize_problem)
from apalg.errors import ProblemSemanticError, ProblemSyntaxError

QUADRATIC = """\
# w^2 - (5 + e^{iz}) = 0
degree = 2

[strip]
lower = -0.5
upper = 0.5

[coeff 2]
term = 0, 1, 0

[coeff 0]
term = 0, -5, 0
term = 1, -1, 0

[path]
start = 0, 0
end = 60, 0
w0 = sqrt2*sqrt3, 0

[verify]
eps = 1e-3
count = 3
tau_max = 100
"""

LINEAR = """\
[strip]
lower = -0.5
upper = 0.5

[coeff 1]
term = 0, 3, 0
term = 1, 1, 0

[coeff 0]
term = 0, 1, 0
term = sqrt2, 0, 2

[path]
start = 0, 0
end = 40, 0

[verify]
eps = 1e-3
count = 2
tau_max = 1e5
"""


def write(tmp_path, text, name="problem.ap"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestNumbers:
    def test_keywords(self):
        assert parse_number("sqrt2") == 1.4142135623730951
        assert parse_number("-2*pi") == -2 * math.pi
        assert parse_number("sqrt3/2") == math.sqrt(3) / 2
        assert parse_number("1e-3") == 1e-3

    def test_bad_token_position(self):
        with pytest.raises(ProblemSyntaxError) as info:
            parse_number("2*e", line=4, column=10)
        assert info.value.line == 4 and info.value.column == 12


class TestParse:
    def test_minimal_quadratic(self):
        spec = parse_problem_file(QUADRATIC)
        assert spec.degree == 2
        assert spec.coeffs[1].is_zero
        assert spec.w0 == complex(math.sqrt(2) * math.sqrt(3), 0)
        assert spec.substrip.lower == -0.25

    def test_sqrt2_frequency(self):
        spec = parse_problem_file(LINEAR)
        assert spec.coeffs[0].freqs[1] == 1.4142135623730951

    def test_zero_leading_coefficient(self):
        text = QUADRATIC.replace("term = 0, 1, 0", "term = 0, 0, 0")
        with pytest.raises(ProblemSemanticError, match="a_m"):
            parse_problem_file(text)

    def test_unknown_key(self):
        text = QUADRATIC.replace("eps = 1e-3", "epsilon = 1e-3")
        with pytest.raises(ProblemSyntaxError) as info:
            parse_problem_file(text)
        assert info.value.line == QUADRATIC.splitlines().index("eps = 1e-3") + 1
        assert info.value.column == 1

    def test_degree_mismatch(self):
        with pytest.raises(ProblemSemanticError):
            parse_problem_file(QUADRATIC.replace("degree = 2", "degree = 1"))

    def test_path_outside_strip(self):
        with pytest.raises(ProblemSemanticError):
            parse_problem_file(QUADRATIC.replace("end = 60, 0", "end = 60, 0.7"))

    def test_unknown_section(self):
        with pytest.raises(ProblemSyntaxError):
            parse_problem_file("[solver]\n")

    def test_round_trip(self):
        spec = parse_problem_file(QUADRATIC)
        again = parse_problem_file(serialize_problem(spec))
        assert again == spec
        assert serialize_problem(again) == serialize_problem(spec)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-5, 5), st.floats(-5, 5)),
                    min_size=1, max_size=4),
           st.floats(0.01, 1.0))
    def test_round_trip_property(self, terms, half):
        lines = [f"term = {l!r}, {a!r}, {b!r}" for l, a, b in terms]
        text = (f"[strip]\nlower = {-half!r}\nupper = {half!r}\n[coeff 1]\nterm = 0, 1, 0\n"
                f"[coeff 0]\n" + "\n".join(lines) + "\n[path]\nstart = 0, 0\nend = 1, 0\n")
        spec = parse_problem_file(text)
        assert parse_problem_file(serialize_problem(spec)) == spec


class TestPipeline:
    def test_quadratic_passes(self, tmp_path):
        spec = parse_problem_file(QUADRATIC)
        code = run_pipeline(spec, tmp_path)
        assert code == EXIT_OK
        rep = json.loads((tmp_path / "apreport.json").read_text())
        assert rep["verdict"] == "pass"
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["complete"] is True
        assert [s["name"] for s in manifest["stages"]] == [
            "squarefree", "discriminant", "cover", "track", "verify"]

    def test_deterministic(self, tmp_path):
        spec = parse_problem_file(QUADRATIC)
        run_pipeline(spec, tmp_path / "a")
        run_pipeline(spec, tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_radius_too_large(self, tmp_path):
        text = QUADRATIC.replace("lower = -0.5", "lower = -3").replace("upper = 0.5", "upper = 1")
        text = text.replace("term = 0, 1, 0", "term = 0, -2, 0\nterm = 1, 1, 0")
        text = text.replace("tau_max = 100", "tau_max = 100\nr = 0.3")
        code = run_pipeline(parse_problem_file(text), tmp_path)
        assert code == EXIT_PRECONDITION
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["failed_stage"] == "cover"
        # a_2 = e^{iz} - 2 and D = 4 a_2 (5 + e^{iz}) share the zeros -i ln 2 + 2 pi k
        assert "RadiusTooLargeError" in manifest["error"] and "K=2" in manifest["error"]
        assert manifest["complete"] is False
        assert (tmp_path / "squarefree.json").exists()

    def test_linear_division(self, tmp_path):
        spec = parse_problem_file(LINEAR)
        assert run_pipeline(spec, tmp_path) == EXIT_OK
        with open(tmp_path / "branch.csv") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            z = complex(float(r["re_z"]), float(r["im_z"]))
            w = complex(float(r["re_w"]), float(r["im_w"]))
            expect = -(1 + 2j * cmath.exp(1j * math.sqrt(2) * z)) / (3 + cmath.exp(1j * z))
            assert abs(w - expect) < 1e-10

    def test_verify_fail_exit(self, tmp_path):
        # no 1e-3 almost period of 5 + e^{iz} + e^{i sqrt2 z} below 100
        text = QUADRATIC.replace("term = 1, -1, 0", "term = 1, -1, 0\nterm = sqrt2, -1, 0")
        text = text.replace("w0 = sqrt2*sqrt3, 0", "w0 = 7**0.5, 0").replace("7**0.5", "2.6457513110645907")
        spec = parse_problem_file(text)
        assert run_pipeline(spec, tmp_path) == EXIT_VERIFY
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["complete"] is True


class TestMain:
    def test_run(self, tmp_path, capsys):
        p = write(tmp_path, QUADRATIC)
        assert main(["run", "--spec", str(p), "--out", str(tmp_path / "out")]) == EXIT_OK
        assert "verdict: pass" in capsys.readouterr().out

    def test_stage_subcommand(self, tmp_path):
        p = write(tmp_path, QUADRATIC)
        assert main(["cover", "--spec", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
        assert (tmp_path / "o" / "cover.json").exists()
        assert not (tmp_path / "o" / "branch.csv").exists()

    def test_eps_override(self, tmp_path):
        p = write(tmp_path, QUADRATIC)
        out = tmp_path / "o"
        main(["verify", "--spec", str(p), "--out", str(out), "--eps", "1e-5", "--seed", "3"])
        assert json.loads((out / "apreport.json").read_text())["epsilon"] == 1e-5

    def test_usage_errors(self, tmp_path):
        assert main([]) == EXIT_USAGE
        assert main(["run", "--spec", str(tmp_path / "missing.ap")]) == EXIT_USAGE
        bad = write(tmp_path, "[strip]\nlowr = 1\n")
        assert main(["run", "--spec", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_module_entry_point(self, tmp_path):
        p = write(tmp_path, QUADRATIC)
        proc = subprocess.run([sys.executable, "-m", "apalg", "discriminant", "--spec", str(p),
                               "--out", str(tmp_path / "o")], capture_output=True, text=True)
        assert proc.returncode == EXIT_OK
        assert (tmp_path / "o" / "zeros.csv").exists()
