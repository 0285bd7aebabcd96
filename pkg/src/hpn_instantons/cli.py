"""Command-line front end producing deterministic JSON reports.

Exit status: 0 when the verdict is pass, 1 when it is fail, 2 on errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .adhm import AdhmData, core_from_adhm, load_adhm, one_instanton, validate
from .curvature import curvature_components, curvature_from_core, curvature_from_potential, relation_residuals
from .diff import DiffEngine
from .errors import InstantonError
from .geometry import (
    H_GEN,
    ConePoint,
    HarmonicPoint,
    TangentDirection,
    expm2,
    random_harmonic_point,
    verify_bracket_table,
)
from .harmonic_gauge import (
    CELL_HALF_WIDTH,
    analytic_gauge,
    check_characterising,
    check_curvature_relation,
    forbidden_derivative_residual,
    homogeneity_residuals,
    prepotential_plus,
    vanishing_residuals,
)

SCHEMA_VERSION = 1
COMMANDS = ("validate", "check-instanton", "curvature-xcheck", "analytic-gauge", "brackets", "gen-example")
DEFAULT_TOL = {"validate": 1e-10, "analytic-gauge": 1e-5}


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    output: Optional[str] = None
    samples: int = 100
    seed: int = 0
    fd_step: float = 1e-4
    tol: Optional[float] = None
    n: Optional[int] = None
    box: float = 1.0
    reference: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.tol is None:
            self.tol = DEFAULT_TOL.get(self.command, 1e-6)
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 1e-10 < self.fd_step < 1e-1:
            raise ValueError("fd-step must lie in (1e-10, 1e-1)")
        if not self.box > 0:
            raise ValueError("box must be positive")


@dataclass
class Report:
    command: str
    config: dict
    records: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    verdict: str = "pass"
    version: str = __version__
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _aggregate(records: list, keys: list) -> dict:
    out = {}
    for k in keys:
        vals = [r[k] for r in records if k in r]
        if vals:
            out[k] = {"max": float(max(vals)), "mean": float(np.mean(vals))}
    return out


def sample_points(rng: np.random.Generator, n: int, count: int, box: float) -> list[HarmonicPoint]:
    return [random_harmonic_point(rng, n, box) for _ in range(count)]


def _need_input(cfg: RunConfig) -> AdhmData:
    if not cfg.input:
        raise InstantonError(f"command {cfg.command} needs --input")
    return load_adhm(cfg.input)


def _load_reference(cfg: RunConfig, n: int) -> HarmonicPoint:
    if cfg.reference is None:
        zeta = np.zeros(2 * n + 2, dtype=complex)
        zeta[0] = 1.0
        return HarmonicPoint(ConePoint(n, zeta))
    text = cfg.reference
    if Path(text).exists():
        text = Path(text).read_text()
    hp = HarmonicPoint.from_json(json.loads(text))
    if hp.n != n:
        raise InstantonError(f"reference point has n={hp.n}, data has n={n}")
    return hp


def run_validate(cfg: RunConfig, report: Report) -> None:
    data = _need_input(cfg)
    vr = validate(data, cfg.tol, seed=cfg.seed)
    report.records.append(vr.to_json())
    report.aggregate = {"max_residual": vr.max_residual, "realness_residual": vr.realness_residual}
    report.verdict = "pass" if vr.valid else "fail"


def run_check_instanton(cfg: RunConfig, report: Report) -> None:
    data = _need_input(cfg)
    core = core_from_adhm(data)
    rng = np.random.default_rng(cfg.seed)
    for i, hp in enumerate(sample_points(rng, data.n, cfg.samples, cfg.box)):
        s = curvature_components(core, hp)
        r1, r2, r3 = relation_residuals(s)
        report.records.append(
            {"index": i, "F_norm": s.F_norm, "F2_norm": s.F2_norm, "residual": s.residual,
             "relation_pp": r1, "relation_mm": r2, "relation_pm": r3}
        )
    keys = ["residual", "relation_pp", "relation_mm", "relation_pm"]
    report.aggregate = _aggregate(report.records, keys + ["F_norm"])
    ok = all(report.aggregate[k]["max"] < cfg.tol for k in keys)
    report.verdict = "pass" if ok else "fail"


def run_curvature_xcheck(cfg: RunConfig, report: Report) -> None:
    data = _need_input(cfg)
    core = core_from_adhm(data)
    rng = np.random.default_rng(cfg.seed)
    engine = DiffEngine(step=cfg.fd_step)
    size = 4 * data.n + 4
    for i, hp in enumerate(sample_points(rng, data.n, cfg.samples, cfg.box)):
        X = TangentDirection(rng.normal(size=size) + 1j * rng.normal(size=size))
        Y = TangentDirection(rng.normal(size=size) + 1j * rng.normal(size=size))
        fp = curvature_from_potential(core, hp, X, Y, engine)
        fc = curvature_from_core(core, hp, X, Y)
        denom = float(np.linalg.norm(fc))
        rel = float(np.linalg.norm(fp - fc)) / denom if denom > 0 else float(np.linalg.norm(fp))
        report.records.append({"index": i, "relative_error": rel, "F_norm": denom})
    report.aggregate = _aggregate(report.records, ["relative_error", "F_norm"])
    report.verdict = "pass" if report.aggregate["relative_error"]["max"] < cfg.tol else "fail"


def cell_points(rng: np.random.Generator, ref: HarmonicPoint, count: int, mask: np.ndarray) -> list[HarmonicPoint]:
    pts = []
    x0 = ref.base.real_coords()
    for _ in range(count):
        x = x0 + np.where(mask, rng.uniform(-0.8, 0.8, size=x0.shape) * CELL_HALF_WIDTH, 0.0)
        u = ref.u @ expm2(rng.uniform(-0.5, 0.5) * H_GEN["H0"])
        pts.append(HarmonicPoint(ConePoint.from_real(x), u))
    return pts


def run_analytic_gauge(cfg: RunConfig, report: Report) -> None:
    data = _need_input(cfg)
    core = core_from_adhm(data)
    ref = _load_reference(cfg, data.n)
    ag = analytic_gauge(core, ref, tol=cfg.tol)
    rng = np.random.default_rng(cfg.seed)
    pts = cell_points(rng, ref, cfg.samples, core.mask)
    agg = {}
    agg["vanishing"] = max(vanishing_residuals(ag, pts).values())
    hom = homogeneity_residuals(ag, pts)
    agg["homogeneity_Amm"], agg["homogeneity_App"] = hom["A--"], hom["A++"]
    agg["forbidden_derivatives"] = forbidden_derivative_residual(ag, pts)
    agg["characterising"] = check_characterising(ag, pts)
    # the stacked checks are run on a few points only
    few = pts[: min(len(pts), 3)]
    agg["A_pa_two_ways"] = max(prepotential_plus(ag, hp).residuals["A_pa_two_ways"] for hp in few)
    agg["curvature_relation"] = check_curvature_relation(ag, few)
    report.records = [{"index": i, "point": hp.to_json()} for i, hp in enumerate(pts)]
    report.aggregate = agg
    gated = {k: v for k, v in agg.items() if k != "curvature_relation"}
    ok = all(v < cfg.tol for v in gated.values()) and agg["curvature_relation"] < 10 * cfg.tol
    report.verdict = "pass" if ok else "fail"


def run_brackets(cfg: RunConfig, report: Report) -> None:
    ns = (cfg.n,) if cfg.n else (1, 2)
    br = verify_bracket_table(cfg.tol, cfg.samples, cfg.seed, ns, t=cfg.fd_step)
    report.records = br.to_json()["entries"]
    report.aggregate = {"G0_Hmm_sign": br.ambiguous_sign, "G0_Hmm_residual": br.ambiguous_residual,
                        "failures": [f"[{e.left},{e.right}]" for e in br.failures()]}
    report.verdict = "pass" if br.passed else "fail"


def run_gen_example(cfg: RunConfig, report: Report) -> None:
    data = one_instanton(cfg.n or 1)
    report.records = [data.to_json()]
    report.verdict = "pass"


RUNNERS = {
    "validate": run_validate,
    "check-instanton": run_check_instanton,
    "curvature-xcheck": run_curvature_xcheck,
    "analytic-gauge": run_analytic_gauge,
    "brackets": run_brackets,
    "gen-example": run_gen_example,
}


def run(cfg: RunConfig) -> Report:
    config = {k: v for k, v in asdict(cfg).items() if k not in ("output",)}
    report = Report(cfg.command, config)
    try:
        RUNNERS[cfg.command](cfg, report)
    except (InstantonError, OSError, ValueError) as exc:
        report.verdict = "error"
        report.records.append({"error": type(exc).__name__, "message": str(exc)})
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hpn-instantons", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--input", help="ADHM data JSON file")
    p.add_argument("--output", help="where to write the report (gen-example: the data file)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fd-step", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=None, help="default depends on the command")
    p.add_argument("--n", type=int, default=None, help="quaternionic dimension for gen-example and brackets")
    p.add_argument("--box", type=float, default=1.0, help="half-width of the sampling box in chart coordinates")
    p.add_argument("--reference", help="reference harmonic point (JSON file or string) for analytic-gauge")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command, input=args.input, output=args.output, samples=args.samples, seed=args.seed,
            fd_step=args.fd_step, tol=args.tol, n=args.n, box=args.box, reference=args.reference,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg)
    if cfg.command == "gen-example" and report.verdict == "pass":
        text = json.dumps(report.records[0], indent=2) + "\n"
        if cfg.output:
            Path(cfg.output).write_text(text)
            print(f"gen-example: wrote {cfg.output}")
        else:
            sys.stdout.write(text)
        return 0
    body = report.to_json()
    if cfg.output:
        Path(cfg.output).write_text(body)
    print(f"{cfg.command}: {report.verdict} {json.dumps(report.aggregate, sort_keys=True)}")
    return {"pass": 0, "fail": 1}.get(report.verdict, 2)


if __name__ == "__main__":
    sys.exit(main())
