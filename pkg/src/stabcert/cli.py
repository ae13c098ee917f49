"""Command-line entry point: check, cones, perturb, branches.

Exit codes: 0 all required verdicts hold, 1 some fail, 2 some inconclusive,
3 runtime/input error, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .cones import NotInSet, dir_limiting_normal_cone, limiting_normal_cone, regular_normal_cone, tangent_cone
from .cq import cq_report
from .geometry import Status, Verdict
from .problem import ProblemError, load_problem
from .stability import (
    GrowthAttestation,
    LayoutError,
    check_mpec_certificates,
    check_nlp_klatte_kummer,
    check_stab_via_thm2,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAILS, EXIT_INCONCLUSIVE, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 3, 64
REQUIRABLE = ("mr", "foscms", "soscms", "m_stat", "b_stat", "rsssoc", "lipschitz", "hoelder", "growth", "mpec_lipschitz", "mpec_hoelder", "nlp_kk")

log = logging.getLogger("stabcert")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# report


@dataclass
class Report:
    tool_version: str
    problem: dict
    verdicts: dict  # requirable key -> status string
    required: list
    exit_code: int
    cq: dict | None = None
    stability: dict | None = None
    specializations: dict = field(default_factory=dict)
    growth: dict | None = None
    harness: dict | None = None
    generated: str = ""

    def _body(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "problem": self.problem,
            "verdicts": self.verdicts,
            "required": self.required,
            "exit_code": self.exit_code,
            "cq": self.cq,
            "stability": self.stability,
            "specializations": self.specializations,
            "growth": self.growth,
            "harness": self.harness,
        }

    def digest(self) -> str:
        """Hash of the canonical body; the timestamp is excluded."""
        return hashlib.sha256(json.dumps(self._body(), sort_keys=True, allow_nan=True).encode()).hexdigest()

    def to_json(self) -> dict:
        d = self._body()
        d["generated"] = self.generated
        d["digest"] = self.digest()
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, d: dict) -> "Report":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        fields = {k: d[k] for k in ("tool_version", "problem", "verdicts", "required", "exit_code")}
        extra = {k: d.get(k) for k in ("cq", "stability", "growth", "harness")}
        return cls(**fields, **extra, specializations=d.get("specializations") or {}, generated=d.get("generated", ""))


def exit_code_for(statuses) -> int:
    statuses = list(statuses)
    if any(s == Status.FAILS.value for s in statuses):
        return EXIT_FAILS
    if any(s == Status.INCONCLUSIVE.value for s in statuses):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ---------------------------------------------------------------------------
# parsing helpers


def _numbers(text: str, exact: bool = False) -> list:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise UsageError(f"expected numbers, got {text!r}")
    try:
        return [Fraction(p) if exact else float(Fraction(p)) for p in parts]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad number in {text!r}") from exc


def parse_grid(spec: str, s: int) -> list:
    """geom:START:RATIO:COUNT, lin:A:B:COUNT, or explicit vectors separated by ';'.

    START, A and B may be comma-separated vectors of length s; scalars are broadcast.
    """
    spec = spec.strip()
    if not spec:
        raise UsageError("empty parameter grid")

    def vec(t):
        v = np.array(_numbers(t))
        if v.size == 1:
            v = np.repeat(v, s)
        if v.size != s:
            raise UsageError(f"parameter vectors have length {s}")
        return v

    kind, _, rest = spec.partition(":")
    if kind in ("geom", "lin"):
        fields = rest.split(":")
        if len(fields) != 3:
            raise UsageError(f"{kind} grid needs three fields")
        try:
            count = int(fields[2])
        except ValueError as exc:
            raise UsageError("grid count must be an integer") from exc
        if count <= 0:
            raise UsageError("empty parameter grid")
        if kind == "geom":
            start, ratio = vec(fields[0]), float(Fraction(fields[1]))
            return [start * ratio**j for j in range(count)]
        a, b = vec(fields[0]), vec(fields[1])
        return [a + (b - a) * t for t in np.linspace(0, 1, count)]
    items = [t for t in (rest if kind == "list" else spec).split(";") if t.strip()]
    if not items:
        raise UsageError("empty parameter grid")
    return [vec(t) for t in items]


def _tolerance() -> float:
    raw = os.environ.get("STAB_TOL")
    if raw is None:
        return 1e-9
    try:
        tol = float(raw)
    except ValueError as exc:
        raise UsageError(f"STAB_TOL must be a number, got {raw!r}") from exc
    if not tol > 0:
        raise UsageError("STAB_TOL must be positive")
    return tol


def _growth_args(text: str):
    vals = [v for v in text.split(",") if v.strip()]
    if len(vals) != 3:
        raise UsageError("--growth expects eta,radius,grid")
    try:
        return float(vals[0]), float(vals[1]), int(vals[2])
    except ValueError as exc:
        raise UsageError("--growth expects eta,radius,grid") from exc


def _status(v: Verdict) -> str:
    return v.status.value


def _fmt_verdict(name: str, v: Verdict) -> str:
    line = f"{name:<22} {v.status.value.upper():<13}"
    if v.route:
        line += f" [{v.route}]"
    if v.payload is not None and getattr(v.payload, "kind", "") == "witness":
        line += f" witness {json.dumps(v.payload.to_json()['payload'])}"
    if v.reason:
        line += f"  {v.reason}"
    return line


# ---------------------------------------------------------------------------
# commands


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    tol = _tolerance()
    required = [r.strip() for r in args.require.split(",") if r.strip()] if args.require else []
    unknown = [r for r in required if r not in REQUIRABLE]
    if unknown:
        raise UsageError(f"unknown requirement(s) {unknown}; choose from {', '.join(REQUIRABLE)}")
    if args.mpec and args.nlp:
        raise UsageError("--mpec and --nlp are exclusive")
    prob = load_problem(args.problem)
    ref = prob.ref

    growth, growth_json = None, None
    if args.growth:
        if not prob.has_expressions:
            raise ProblemError("--growth needs an [expressions] section")
        from .harness import verify_growth

        eta, radius, grid = _growth_args(args.growth)
        gv = verify_growth(prob, eta, radius, grid)
        growth_json = gv.to_json()
        if gv.is_holds:
            growth = gv.payload.payload
    elif args.assume_growth:
        growth = GrowthAttestation.user_asserted()
        growth_json = {"status": "holds", "payload": growth.to_json(), "route": "user"}

    cq = cq_report(ref, tol)
    st = check_stab_via_thm2(ref, growth=growth, cq=cq, tol=tol)
    verdicts = {
        "mr": cq.metric_regularity,
        "foscms": cq.foscms,
        "soscms": cq.soscms,
        "m_stat": st.m_stationary,
        "b_stat": st.b_stationary,
        "rsssoc": st.rsssoc,
        "lipschitz": st.lipschitz_cert,
        "hoelder": st.hoelder_cert,
    }
    specs = {}
    if args.mpec:
        mp = check_mpec_certificates(ref)
        verdicts["mpec_lipschitz"], verdicts["mpec_hoelder"] = mp["lipschitz"], mp["hoelder"]
        specs["mpec"] = {k: v.to_json() for k, v in mp.items()}
    if args.nlp:
        verdicts["nlp_kk"] = check_nlp_klatte_kummer(ref)
        specs["nlp"] = {"klatte_kummer": verdicts["nlp_kk"].to_json()}

    statuses = {k: _status(v) for k, v in verdicts.items()}
    if growth_json is not None:
        statuses["growth"] = growth_json["status"]
    if not required:
        required = ["lipschitz"] + (["mpec_lipschitz"] if args.mpec else []) + (["nlp_kk"] if args.nlp else [])
    missing = [r for r in required if r not in statuses]
    if missing:
        raise UsageError(f"requirement(s) {missing} not computed; add --mpec, --nlp or --growth")
    code = exit_code_for(statuses[r] for r in required)

    report = Report(
        tool_version=__version__,
        problem={"name": prob.name, "digest": prob.digest, "layout": prob.layout, "n": ref.n, "m": ref.m, "s": ref.s},
        verdicts=statuses,
        required=required,
        exit_code=code,
        cq=cq.to_json(),
        stability=st.to_json(),
        specializations=specs,
        growth=growth_json,
        generated=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    print(f"problem {prob.name} (digest {prob.digest})", file=out)
    names = {
        "mr": "metric regularity",
        "foscms": "FOSCMS",
        "soscms": "SOSCMS",
        "m_stat": "M-stationarity",
        "b_stat": "linearized B-stat",
        "rsssoc": "RSSOSC",
        "lipschitz": "upper Lipschitz",
        "hoelder": "upper Hoelder",
        "mpec_lipschitz": "MPEC Lipschitz",
        "mpec_hoelder": "MPEC Hoelder",
        "nlp_kk": "NLP Klatte-Kummer",
    }
    for k, v in verdicts.items():
        mark = "*" if k in required else " "
        print(mark + _fmt_verdict(names[k], v), file=out)
    if growth_json is not None:
        print(("*" if "growth" in required else " ") + f"{'growth':<22} {growth_json['status'].upper()}", file=out)
    print(f" existence: {st.existence_reason}", file=out)
    print(f"exit {code} (required: {', '.join(required)})", file=out)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(report.dumps())
    return code


def cmd_cones(args, out=None) -> int:
    out = out or sys.stdout
    prob = load_problem(args.problem)
    P = prob.P
    y = tuple(_numbers(args.point, exact=True)) if args.point else tuple(prob.ref.q)
    if len(y) != P.dim:
        raise UsageError(f"--point needs {P.dim} components")
    names = [f"y{i + 1}" for i in range(P.dim)]
    print(f"point y = ({', '.join(str(v) for v in y)})", file=out)
    T = tangent_cone(P, y)
    print("tangent cone T(y):", file=out)
    print(T.describe(names), file=out)
    print("regular normal cone:", file=out)
    print("  " + regular_normal_cone(P, y).describe(names), file=out)
    print("limiting normal cone:", file=out)
    print(limiting_normal_cone(P, y).describe(names), file=out)
    if args.dir:
        d = tuple(_numbers(args.dir, exact=True))
        if len(d) != P.dim:
            raise UsageError(f"--dir needs {P.dim} components")
        print(f"directional limiting normal cone, d = ({', '.join(str(v) for v in d)}):", file=out)
        N = dir_limiting_normal_cone(P, y, d)
        print(N.describe(names) if N.pieces else "  empty (d is not tangent)", file=out)
    return EXIT_OK


def cmd_branches(args, out=None) -> int:
    out = out or sys.stdout
    from .harness import enumerate_branches

    prob = load_problem(args.problem)
    branches = enumerate_branches(prob.P)
    print(f"{len(branches)} branch(es) of {' x '.join(b.label() for b in prob.P.blocks)}", file=out)
    for br in branches:
        print(f"branch {br.index} (pieces {','.join(str(i) for i in br.selection)}): {br.describe()}", file=out)
    return EXIT_OK


def cmd_perturb(args, out=None) -> int:
    out = out or sys.stdout
    from .harness import SearchConfig, run_perturbation_study, write_csv, write_points_json

    prob = load_problem(args.problem)
    if not prob.has_expressions:
        raise ProblemError(f"{args.problem}: perturbation studies need an [expressions] section with f and q")
    grid = parse_grid(args.grid, prob.ref.s)
    cfg = SearchConfig(radius=args.radius, min_radius=args.min_radius, seed=args.seed)
    certified = None
    if args.check:
        st = check_stab_via_thm2(prob.ref, tol=_tolerance())
        certified = (st.lipschitz_cert if args.order == 1 else st.hoelder_cert).is_holds
    samples, est = run_perturbation_study(prob, grid, args.order, cfg, args.locality, certified, args.workers)
    if args.out:
        write_csv(samples, args.out)
        write_points_json(samples, _points_path(args.out))
    kind = "Lipschitz" if args.order == 1 else "Hoelder"
    if est.n_used == 0:
        print(f"no sample with tau{args.order} > 0 and a stationary point within the locality radius", file=out)
    else:
        print(
            f"sup dist/tau{args.order} = {est.sup:.4g} at omega={list(est.argmax_omega)} over {est.n_used} sample(s); "
            f"log-log slope {est.slope:.3g}",
            file=out,
        )
        if not est.bounded:
            print(f"warning: ratio grows as tau{args.order} -> 0; no upper {kind} bound at this order", file=out)
    if certified is not None:
        print(f"certified upper {kind}: {certified}; consistent with data: {est.consistent}", file=out)
    if args.json:
        body = {
            "schema": SCHEMA_VERSION,
            "tool_version": __version__,
            "problem": {"name": prob.name, "digest": prob.digest},
            "estimate": est.to_json(),
            "samples": [s.to_json() for s in samples],
        }
        with open(args.json, "w") as fh:
            json.dump(body, fh, indent=1, allow_nan=True)
    return EXIT_OK if (certified is None or est.consistent) else EXIT_FAILS


def _points_path(csv_path: str) -> str:
    root, ext = os.path.splitext(csv_path)
    return root + ".points.json"


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stabcert", description="Stability certificates for parametric disjunctive programs.")
    p.add_argument("--version", action="version", version=f"stabcert {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="constraint qualifications, stationarity and stability certificates")
    c.add_argument("problem")
    c.add_argument("--mpec", action="store_true", help="also run the MPEC specialization")
    c.add_argument("--nlp", action="store_true", help="also run the NLP (Klatte-Kummer) specialization")
    c.add_argument("--growth", metavar="ETA,R,N", help="verify the quadratic growth condition on an N^n grid")
    c.add_argument("--assume-growth", action="store_true", help="attest the growth condition without checking")
    c.add_argument("--require", metavar="KEYS", help=f"comma list from: {', '.join(REQUIRABLE)}")
    c.add_argument("--json", metavar="PATH")
    c.set_defaults(func=cmd_check)

    k = sub.add_parser("cones", help="print tangent and normal cones at a point of P")
    k.add_argument("problem")
    k.add_argument("--point", help="point y of P (default: q at the reference point)")
    k.add_argument("--dir", help="direction d for the directional limiting normal cone")
    k.set_defaults(func=cmd_cones)

    r = sub.add_parser("perturb", help="perturbation study: stationary points and dist/tau ratios")
    r.add_argument("problem")
    r.add_argument("--grid", required=True, help="geom:START:RATIO:COUNT | lin:A:B:COUNT | v1;v2;...")
    r.add_argument("--order", type=int, choices=(1, 2), default=1)
    r.add_argument("--out", metavar="CSV")
    r.add_argument("--json", metavar="PATH")
    r.add_argument("--locality", type=float, default=0.5)
    r.add_argument("--radius", type=float, default=1.0, help="search box half-width")
    r.add_argument("--min-radius", type=float, default=0.0, help="resolution cutoff around the reference point")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--check", action="store_true", help="compare with the certified verdict")
    r.set_defaults(func=cmd_perturb)

    b = sub.add_parser("branches", help="list the polyhedral branches of P")
    b.add_argument("problem")
    b.set_defaults(func=cmd_branches)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stabcert: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"stabcert: {exc.filename or exc}: no such file", file=sys.stderr)
        return EXIT_ERROR
    except (ProblemError, LayoutError, NotInSet) as exc:
        print(f"stabcert: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"stabcert: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
