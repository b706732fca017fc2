"""Problem files and the solve -> cover -> track -> verify pipeline.

Problem file format (line oriented, ``#`` starts a comment)::

    degree = 2

    [strip]
    lower = -0.5
    upper = 0.5

    [coeff 2]
    term = 0, 1, 0              # frequency, real part, imaginary part

    [coeff 0]
    term = 0, -5, 0
    term = sqrt2, -1, 0

    [path]
    start = 0, 0                # or repeated "point = re, im" lines
    end = 300, 0
    w0 = 2.449, 0               # optional; default: root with largest real part

    [verify]
    eps = 1e-3
    count = 3
    tau_max = 1e5
    r = 0.1

Numbers may be written as products and quotients of literals and the
keywords ``pi``, ``sqrt2``, ``sqrt3``, with a leading minus sign
(``2*pi``, ``-sqrt2/2``).  Missing coefficient sections are zero.

Almost periodicity on a strip quantifies over every substrip compactly inside
the problem strip; the verification substrip (default: the middle half
of the problem strip) is a finite stand-in and is named in every report.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .appoly import APPoly, discriminant, squarefree_reduce
from .apverify import verify_branch_ap
from .errors import (APError, InvalidInputError, PreconditionError, ProblemSemanticError,
                     ProblemSyntaxError, VerificationError)
from .expsum import ExpSum, Strip
from .rootkit import BranchOptions, Tracker, continue_branch
from .stripgeo import Rect, build_cover, locate_zeros, zeros_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_PRECONDITION = 4
EXIT_INTERNAL = 5

CONSTANTS = {"pi": math.pi, "sqrt2": math.sqrt(2.0), "sqrt3": math.sqrt(3.0)}

_SECTION_KEYS = {
    None: {"degree"},
    "strip": {"lower", "upper"},
    "coeff": {"term"},
    "path": {"start", "end", "point", "w0"},
    "verify": {"eps", "count", "tau_max", "r", "grid", "seed", "tol_w",
               "sub_lower", "sub_upper"},
}
_FACTOR = re.compile(r"\s*(pi|sqrt2|sqrt3|[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*")


@dataclass
class VerifyOptions:
    eps: float = 1e-3
    count: int = 3
    tau_max: float = 1e5
    r: float = 0.1
    grid: float = 2.0
    seed: int = 0
    tol_w: Optional[float] = None
    sub_lower: Optional[float] = None
    sub_upper: Optional[float] = None


@dataclass
class ProblemSpec:
    strip: Strip
    coeffs: tuple
    path: tuple
    w0: Optional[complex] = None
    verify: VerifyOptions = field(default_factory=VerifyOptions)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def poly(self) -> APPoly:
        return APPoly(self.coeffs)

    @property
    def substrip(self) -> Strip:
        v = self.verify
        if v.sub_lower is not None and v.sub_upper is not None:
            return Strip(v.sub_lower, v.sub_upper)
        return self.strip.middle(0.5)

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return (self.strip == other.strip and self.path == other.path and self.w0 == other.w0
                and self.verify == other.verify
                and [c.terms for c in self.coeffs] == [c.terms for c in other.coeffs])


# -- parsing ------------------------------------------------------------------------

def parse_number(text: str, line: int = 0, column: int = 1) -> float:
    """Evaluate ``[-] factor ((*|/) factor)*`` with the keyword constants."""
    s = text.strip()
    offset = column + (len(text) - len(text.lstrip()))
    sign = 1.0
    pos = 0
    if s.startswith("-"):
        sign, pos = -1.0, 1
    elif s.startswith("+"):
        pos = 1
    value = None
    op = None
    while True:
        m = _FACTOR.match(s, pos)
        if not m or m.end() == pos:
            raise ProblemSyntaxError(f"expected a number at {s[pos:]!r}", line, offset + pos)
        tok = m.group(1)
        x = CONSTANTS[tok] if tok in CONSTANTS else float(tok)
        if value is None:
            value = x
        elif op == "*":
            value *= x
        else:
            if x == 0:
                raise ProblemSyntaxError("division by zero", line, offset + pos)
            value /= x
        pos = m.end()
        if pos == len(s):
            return sign * value
        if s[pos] not in "*/":
            raise ProblemSyntaxError(f"unexpected character {s[pos]!r}", line, offset + pos)
        op = s[pos]
        pos += 1


def _numbers(text: str, n: int, line: int, column: int) -> list:
    parts = text.split(",")
    if len(parts) != n:
        raise ProblemSyntaxError(f"expected {n} comma-separated values", line, column)
    out = []
    col = column
    for p in parts:
        out.append(parse_number(p, line, col))
        col += len(p) + 1
    return out


def parse_problem_file(text: str) -> ProblemSpec:
    section = None
    coeff_index = None
    seen = {}
    terms = {}
    points = []
    raw = {"strip": {}, "path": {}, "verify": {}}
    degree = None
    for ln, full in enumerate(text.splitlines(), start=1):
        body = full.split("#", 1)[0]
        stripped = body.strip()
        if not stripped:
            continue
        col0 = len(body) - len(body.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ProblemSyntaxError("unterminated section header", ln, col0)
            name = stripped[1:-1].split()
            if len(name) == 2 and name[0] == "coeff" and name[1].isdigit():
                section, coeff_index = "coeff", int(name[1])
                if coeff_index in terms:
                    raise ProblemSemanticError(f"duplicate section [coeff {coeff_index}]",
                                               f"coeff.{coeff_index}")
                terms[coeff_index] = []
            elif len(name) == 1 and name[0] in ("strip", "path", "verify"):
                section, coeff_index = name[0], None
                if section in seen:
                    raise ProblemSemanticError(f"duplicate section [{section}]", section)
                seen[section] = True
            else:
                raise ProblemSyntaxError(f"unknown section {stripped}", ln, col0)
            continue
        if "=" not in body:
            raise ProblemSyntaxError("expected 'key = value'", ln, col0)
        key, value = body.split("=", 1)
        key = key.strip()
        vcol = body.index("=") + 2
        if key not in _SECTION_KEYS[section]:
            where = "top level" if section is None else f"[{section}]"
            raise ProblemSyntaxError(f"unknown key {key!r} in {where}", ln, col0)
        if section is None:
            degree = int(parse_number(value, ln, vcol))
            if degree != parse_number(value, ln, vcol) or degree < 0:
                raise ProblemSemanticError("degree must be a nonnegative integer", "degree")
        elif section == "coeff":
            lam, re_, im_ = _numbers(value, 3, ln, vcol)
            terms[coeff_index].append((lam, complex(re_, im_)))
        elif key == "point":
            points.append(complex(*_numbers(value, 2, ln, vcol)))
        else:
            bucket = raw[section]
            if key in bucket:
                raise ProblemSemanticError(f"duplicate key {key!r}", f"{section}.{key}")
            bucket[key] = (value, ln, vcol)
    return _assemble(degree, terms, points, raw)


def _assemble(degree, terms, points, raw) -> ProblemSpec:
    st = raw["strip"]
    for k in ("lower", "upper"):
        if k not in st:
            raise ProblemSemanticError(f"missing strip bound {k!r}", f"strip.{k}")
    lower = parse_number(*st["lower"])
    upper = parse_number(*st["upper"])
    if not lower < upper:
        raise ProblemSemanticError("strip needs lower < upper", "strip")
    if not terms:
        raise ProblemSemanticError("no coefficient sections", "coeff")
    top = max(terms)
    m = top if degree is None else degree
    if top > m:
        raise ProblemSemanticError(f"coefficient index {top} exceeds degree {m}", f"coeff.{top}")
    coeffs = tuple(ExpSum(terms.get(j, [])) for j in range(m + 1))
    if coeffs[-1].is_zero:
        raise ProblemSemanticError("leading coefficient a_m is identically zero", f"coeff.{m}")
    pa = raw["path"]
    if points and ("start" in pa or "end" in pa):
        raise ProblemSemanticError("use either start/end or point lines", "path")
    if not points:
        if "start" not in pa or "end" not in pa:
            raise ProblemSemanticError("path needs start and end", "path")
        points = [complex(*_numbers(*pa["start"][:1], 2, *pa["start"][1:])),
                  complex(*_numbers(*pa["end"][:1], 2, *pa["end"][1:]))]
    if len(points) < 2:
        raise ProblemSemanticError("path needs at least two points", "path.point")
    for p in points:
        if not lower < p.imag < upper:
            raise ProblemSemanticError(f"path point {p!r} lies outside the strip", "path")
    w0 = complex(*_numbers(*pa["w0"][:1], 2, *pa["w0"][1:])) if "w0" in pa else None
    v = VerifyOptions()
    fields = {}
    for k, (txt, ln, col) in raw["verify"].items():
        x = parse_number(txt, ln, col)
        if k in ("count", "seed"):
            if x != int(x) or x < 0:
                raise ProblemSemanticError(f"{k} must be a nonnegative integer", f"verify.{k}")
            x = int(x)
        elif k not in ("sub_lower", "sub_upper") and x <= 0:
            raise ProblemSemanticError(f"{k} must be positive", f"verify.{k}")
        fields[k] = x
    v = replace(v, **fields)
    if (v.sub_lower is None) != (v.sub_upper is None):
        raise ProblemSemanticError("give both sub_lower and sub_upper", "verify.sub_lower")
    if v.sub_lower is not None and not lower < v.sub_lower < v.sub_upper < upper:
        raise ProblemSemanticError("verification substrip must sit inside the strip",
                                   "verify.sub_lower")
    return ProblemSpec(Strip(lower, upper), coeffs, tuple(points), w0, v)


def serialize_problem(spec: ProblemSpec) -> str:
    """Problem-file text that parses back to an identical spec."""
    out = [f"degree = {spec.degree}", "", "[strip]",
           f"lower = {spec.strip.lower!r}", f"upper = {spec.strip.upper!r}"]
    for j, c in enumerate(spec.coeffs):
        if c.is_zero:
            continue
        out += ["", f"[coeff {j}]"]
        out += [f"term = {lam!r}, {a.real!r}, {a.imag!r}" for lam, a in c.terms]
    out += ["", "[path]"]
    out += [f"point = {p.real!r}, {p.imag!r}" for p in spec.path]
    if spec.w0 is not None:
        out.append(f"w0 = {spec.w0.real!r}, {spec.w0.imag!r}")
    out += ["", "[verify]"]
    for k, val in vars(spec.verify).items():
        if val is not None:
            out.append(f"{k} = {val!r}")
    return "\n".join(out) + "\n"


# -- pipeline -----------------------------------------------------------------------

STAGES = ("squarefree", "discriminant", "cover", "track", "verify")


class StageError(Exception):
    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _expsum_obj(f: ExpSum):
    return f.to_json_obj()


def default_windows(spec: ProblemSpec):
    """Cover windows: outer = middle half of the strip, inner = middle half of that."""
    xs = [p.real for p in spec.path]
    sub = spec.strip.middle(0.5)
    mid = 0.5 * (sub.lower + sub.upper)
    q = 0.25 * (sub.upper - sub.lower)
    outer = Rect(min(xs) - 1.0, max(xs) + 1.0, sub.lower, sub.upper)
    inner = Rect(min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1.0, mid - q, mid + q)
    return outer, inner


def default_w0(P: APPoly, z: complex) -> complex:
    roots = Tracker(P).solve(z)
    return max(roots, key=lambda w: (round(w.real, 12), round(w.imag, 12)))


class Pipeline:
    """Runs stages in order, writing artifacts and a manifest to ``out``."""

    def __init__(self, spec: ProblemSpec, out: Path, seed: Optional[int] = None):
        self.spec = spec
        self.out = Path(out)
        self.seed = spec.verify.seed if seed is None else seed
        self.state = {}
        self.manifest = {"stages": [], "complete": False, "exit_code": None}

    def _write(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        return name

    def _finish(self, code: int, error: Optional[StageError] = None) -> int:
        self.manifest["exit_code"] = code
        self.manifest["complete"] = code in (EXIT_OK, EXIT_VERIFY) and \
            len(self.manifest["stages"]) == self._target_len
        if error is not None:
            self.manifest["failed_stage"] = error.stage
            self.manifest["error"] = f"{type(error.error).__name__}: {error.error}"
        self._write("manifest.json", _dump(self.manifest))
        return code

    def run(self, upto: str = "verify") -> int:
        stages = STAGES[: STAGES.index(upto) + 1]
        self._target_len = len(stages)
        for name in stages:
            try:
                files = getattr(self, f"stage_{name}")()
            except APError as exc:
                return self._finish(exit_code_for(exc), StageError(name, exc))
            except Exception as exc:  # noqa: BLE001 - reported as internal error
                return self._finish(EXIT_INTERNAL, StageError(name, exc))
            self.manifest["stages"].append({"name": name, "files": files})
        code = EXIT_OK
        rep = self.state.get("report")
        if rep is not None and not rep.passed:
            code = EXIT_VERIFY
        return self._finish(code)

    def stage_squarefree(self):
        P = self.spec.poly
        if P.degree < 1:
            raise InvalidInputError("the equation needs degree >= 1 in w")
        res = squarefree_reduce(P)
        self.state["P"] = res.reduced
        obj = {"input": P.to_json_obj(), "reduced": res.reduced.to_json_obj(),
               "removed_degree": res.removed_degree, "prs_depth": res.prs_depth,
               "cleared_factor": _expsum_obj(res.cleared_factor)}
        return [self._write("squarefree.json", _dump(obj))]

    def stage_discriminant(self):
        P = self.state["P"]
        D = discriminant(P) if P.degree >= 2 else ExpSum.constant(1.0)
        outer, inner = default_windows(self.spec)
        self.state.update(D=D, outer=outer, inner=inner)
        zeros, labels = [], []
        for label, f in (("a_m", P.lead), ("discriminant", D)):
            if len(f) > 1:
                zs = locate_zeros(f, outer)
                zeros += zs
                labels += [label] * len(zs)
        obj = {"discriminant": _expsum_obj(D), "lead": _expsum_obj(P.lead),
               "window": outer.to_json_obj(), "zero_count": len(zeros),
               "discriminant_identically_zero": D.is_zero}
        if D.is_zero:
            raise PreconditionError("discriminant vanishes identically after reduction")
        return [self._write("discriminant.json", _dump(obj)),
                self._write("zeros.csv", zeros_csv(zeros, labels))]

    def stage_cover(self):
        P, D = self.state["P"], self.state["D"]
        cover = build_cover(self.state["outer"], self.state["inner"], [P.lead, D],
                            self.spec.verify.r)
        self.state["cover"] = cover
        return [self._write("cover.json", cover.to_json() + "\n")]

    def stage_track(self):
        P = self.state["P"]
        z0 = self.spec.path[0]
        w0 = self.spec.w0 if self.spec.w0 is not None else default_w0(P, z0)
        branch = continue_branch(P, self.spec.path, w0, BranchOptions())
        self.state["branch"] = branch
        return [self._write("branch.csv", branch.to_csv()),
                self._write("branch.json", _dump(branch.metadata()))]

    def stage_verify(self):
        v = self.spec.verify
        rep = verify_branch_ap(self.state["branch"], self.state["P"], v.eps, v.count,
                               substrip=self.spec.substrip, tau_range=(0.0, v.tau_max),
                               tol_w=v.tol_w, seed=self.seed, grid_density=v.grid)
        self.state["report"] = rep
        return [self._write("apreport.json", rep.to_json() + "\n"),
                self._write("deviation.csv", rep.deviation_csv())]


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ProblemSyntaxError, ProblemSemanticError)):
        return EXIT_USAGE
    if isinstance(exc, VerificationError):
        return EXIT_VERIFY
    if isinstance(exc, APError):
        return EXIT_PRECONDITION
    return EXIT_INTERNAL


def run_pipeline(spec: ProblemSpec, out, seed: Optional[int] = None, upto: str = "verify") -> int:
    return Pipeline(spec, Path(out), seed).run(upto)


# -- command line -------------------------------------------------------------------

_COMMANDS = {"run": "verify", "discriminant": "discriminant", "zeros": "discriminant",
             "cover": "cover", "track": "track", "verify": "verify"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apalg",
        description="Almost periodic algebraic equations: reduce, cover, track and verify.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "full pipeline",
        "discriminant": "squarefree reduction and discriminant",
        "zeros": "zeros of a_m and the discriminant (same artifacts as discriminant)",
        "cover": "pipeline up to the rectangle cover",
        "track": "pipeline up to the tracked branch",
        "verify": "pipeline including almost-period verification",
    }
    for name in _COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--spec", required=True, type=Path, help="problem file")
        p.add_argument("--out", type=Path, default=Path("apalg-out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="random seed (overrides file)")
        p.add_argument("--grid", type=float, default=None, help="grid density (points per unit)")
        p.add_argument("--eps", type=float, default=None, help="coefficient epsilon")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        spec = parse_problem_file(args.spec.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"apalg: cannot read {args.spec}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProblemSyntaxError, ProblemSemanticError) as exc:
        print(f"apalg: {args.spec}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    changes = {}
    if args.eps is not None:
        if args.eps <= 0:
            print("apalg: --eps must be positive", file=sys.stderr)
            return EXIT_USAGE
        changes["eps"] = args.eps
    if args.grid is not None:
        if args.grid <= 0:
            print("apalg: --grid must be positive", file=sys.stderr)
            return EXIT_USAGE
        changes["grid"] = args.grid
    if changes:
        spec = replace(spec, verify=replace(spec.verify, **changes))
    pipe = Pipeline(spec, args.out, args.seed)
    code = pipe.run(_COMMANDS[args.command])
    m = pipe.manifest
    if "failed_stage" in m:
        print(f"apalg: stage {m['failed_stage']} failed: {m['error']}", file=sys.stderr)
    rep = pipe.state.get("report")
    if rep is not None:
        print(f"verdict: {rep.verdict} ({len(rep.almost_periods)} almost periods, "
              f"max deviation {max(rep.sup_deviation, default=0.0):.3g}, tol {rep.tol_w:.3g})")
    print(f"artifacts: {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
