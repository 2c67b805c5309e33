"""Command-line experiment runner.

    fracflow <command> [--config FILE] [--out FILE] [--override key=value ...]

Exit status: 0 success, 2 configuration error, 3 solver error, 4 property violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adaptive, caputo, estimate, flow
from .config import ExperimentConfig
from .energy import Circle, Entropy, PowerP, Quadratic
from .errors import ConfigError, FracFlowError
from .partition import random_partition, uniform_partition
from .quadform_bench import QuadFormProblem, eigen_reference
from .special import mittag_leffler

log = logging.getLogger("fracflow")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROPERTY = 0, 2, 3, 4


def fmt(x: float) -> str:
    """Six significant digits in scientific notation; empty for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.5e}"


def _reference(cfg: ExperimentConfig):
    """Exact trajectory ``t -> u(t)`` when one is available, else ``None``."""
    kind = cfg.reference
    lin = cfg.perturbation is None and cfg.forcing["kind"] == "zero"
    e = cfg.energy["kind"]
    if kind == "none":
        return None
    if kind == "auto":
        if lin and e == "quadratic" and cfg.dim() == 1:
            kind = "mittag_leffler"
        elif lin and e in ("quadratic", "quadratic_form"):
            kind = "eigen"
        else:
            return None
    if not lin:
        raise ConfigError(f"reference {kind!r} needs zero forcing and no perturbation")
    alpha = cfg.alpha
    if kind == "mittag_leffler":
        if e != "quadratic":
            raise ConfigError("mittag_leffler reference needs a quadratic energy")
        lam = float(cfg.energy.get("lam", 1.0))
        u0 = cfg.build_u0()

        def ref(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return np.outer(mittag_leffler(alpha, -lam * t**alpha), u0)

        return ref
    if e == "quadratic":
        A = float(cfg.energy.get("lam", 1.0)) * np.eye(cfg.dim())
    elif e == "quadratic_form":
        A = np.asarray(cfg.energy["A"], dtype=float)
    else:
        raise ConfigError("eigen reference needs a quadratic energy")
    return eigen_reference(QuadFormProblem(A, cfg.build_u0()), alpha)


def _final_state(cfg: ExperimentConfig, N: int) -> np.ndarray:
    res = flow.solve_flow(cfg.build_problem(), uniform_partition(cfg.T, N), cfg.build_prox(), cfg.sampling["q"])
    return res.final


@dataclass
class ConvergenceTable:
    tau: list[float]
    err: list[float]
    rate: list[float]
    exact: bool
    finals: list[np.ndarray] = field(default_factory=list)

    def rows(self):
        return list(zip(self.tau, self.err, self.rate))


def run_convergence(cfg: ExperimentConfig) -> ConvergenceTable:
    """Errors at ``T`` against the exact solution, or successive differences when none exists."""
    ladder = cfg.ladder()
    if len(ladder) < 3:
        raise ConfigError("a convergence ladder needs at least three levels")
    cfg.build_problem()  # surface configuration errors before any work
    Ns = [N for _, N in ladder]
    finals: list[np.ndarray] = []
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futs = [pool.submit(_final_state, cfg, N) for N in Ns]
            for k, fu in enumerate(futs):
                try:
                    finals.append(fu.result())
                except FracFlowError:
                    log.error("solver failed at ladder level %d (N=%d)", k, Ns[k])
                    raise
    else:
        for k, N in enumerate(Ns):
            try:
                finals.append(_final_state(cfg, N))
            except FracFlowError:
                log.error("solver failed at ladder level %d (N=%d)", k, N)
                raise
    taus = [t for t, _ in ladder]
    ref = _reference(cfg)
    if ref is not None:
        uT = ref(np.array([cfg.T]))[0]
        err = [float(np.linalg.norm(uT - U)) for U in finals]
        rate = [math.nan] + [
            math.log(err[k - 1] / err[k]) / math.log(taus[k - 1] / taus[k]) if err[k] > 0 and err[k - 1] > 0 else math.nan
            for k in range(1, len(err))
        ]
        return ConvergenceTable(taus, err, rate, True, finals)
    err = [math.nan] + [float(np.linalg.norm(finals[k] - finals[k - 1])) for k in range(1, len(finals))]
    rate = [math.nan, math.nan] + [
        math.log2(err[k - 1]) - math.log2(err[k]) if err[k] > 0 and err[k - 1] > 0 else math.nan
        for k in range(2, len(err))
    ]
    return ConvergenceTable(taus, err, rate, False, finals)


@dataclass
class AdaptiveSummary:
    N: int
    tau_min: float
    tau_max: float
    rejections: int
    error: float | None
    wall_time: float


def run_adaptive(cfg: ExperimentConfig):
    pb = cfg.build_problem()
    try:
        acfg = cfg.build_adaptive()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res, hist = adaptive.adaptive_solve(pb, cfg.T, acfg, cfg.build_prox(), cfg.sampling["q"])
    ref = _reference(cfg)
    err = None
    if ref is not None:
        err, _ = estimate.error_vs_reference(res, ref, samples=cfg.sampling["samples"])
    tau = res.partition.tau
    summary = AdaptiveSummary(
        N=res.N,
        tau_min=float(tau.min()),
        tau_max=float(tau.max()),
        rejections=sum(h.rejections for h in hist),
        error=err,
        wall_time=res.wall_time,
    )
    return summary, hist, res


def run_solve(cfg: ExperimentConfig):
    pb = cfg.build_problem()
    P = cfg.build_partition()
    res = flow.solve_flow(pb, P, cfg.build_prox(), cfg.sampling["q"])
    trace = estimate.aposteriori_bound(res, m=cfg.sampling["m"], q=cfg.sampling["q"])
    ref = _reference(cfg)
    err = None
    if ref is not None:
        err, _ = estimate.error_vs_reference(res, ref, samples=cfg.sampling["samples"])
    return res, trace, err


# property suite ------------------------------------------------------------


@dataclass
class PropertyReport:
    checks: dict[str, int] = field(default_factory=dict)  # name -> violation count
    details: list[str] = field(default_factory=list)
    max_unity_residual: float = 0.0
    min_basis: float = math.inf
    min_tilde: float = math.inf
    min_pointwise: float = math.inf
    cases: int = 0

    @property
    def ok(self) -> bool:
        return not any(self.checks.values())

    def add(self, name: str, count: int, detail: str | None = None):
        self.checks[name] = self.checks.get(name, 0) + int(count)
        if count and detail and len(self.details) < 50:
            self.details.append(detail)


_SIGN_ENERGIES = [
    (Quadratic(1.0), 1.0),
    (PowerP(1.0, 1.5), 0.5),
    (Entropy(1.0), 0.5),
    (Circle(1.0), 0.2),
]


def run_properties(cfg: ExperimentConfig) -> PropertyReport:
    """Kernel sign/monotonicity, basis positivity and unity, estimator signs on seeded partitions."""
    pc = cfg.properties
    rng = np.random.default_rng(cfg.seed)
    rep = PropertyReport()
    for name in ("kernel", "basis >= -1e-12", "partition of unity <= 1e-12", "tilde >= -1e-12", "pointwise >= -1e-12"):
        rep.checks[name] = 0
    for k in range(pc["partitions"]):
        N = int(rng.integers(2, pc["max_N"] + 1))
        P = random_partition(rng, N, T=float(rng.uniform(0.5, 2.0)), spread=100.0)
        ts = rng.uniform(0.0, P.T, size=pc["unity_samples"])
        for alpha in pc["alphas"]:
            rep.cases += 1
            K = caputo.caputo_kernel(P, alpha)
            if pc["corrupt"]:
                Kinv = K.Kinv.copy()
                Kinv[1, 0] = abs(Kinv[1, 0])
                K = caputo.CaputoKernel(alpha, P, K.K, Kinv, -Kinv.sum(axis=1))
            kr = caputo.check_kernel_properties(K)
            rep.add("kernel", len(kr.violations), f"partition {k}, alpha {alpha}: {kr}")
            B = caputo.basis_matrix(K, ts)
            bmin = float(B.min())
            resid = float(np.abs(B.sum(axis=1) - 1.0).max())
            rep.min_basis = min(rep.min_basis, bmin)
            rep.max_unity_residual = max(rep.max_unity_residual, resid)
            rep.add("basis >= -1e-12", int(np.sum(B < -1e-12)), f"partition {k}, alpha {alpha}: min basis {bmin:.3e}")
            rep.add("partition of unity <= 1e-12", int(resid > 1e-12), f"partition {k}, alpha {alpha}: residual {resid:.3e}")
            E, u0 = _SIGN_ENERGIES[(k + int(10 * alpha)) % len(_SIGN_ENERGIES)]
            res = flow.solve_flow(flow.FlowProblem(alpha, E, u0), P)
            til = estimate.estimator_tilde(res)
            pts = ts[ts > 0]
            pw = estimate.estimator_pointwise(res, pts)
            rep.min_tilde = min(rep.min_tilde, float(til.min()))
            rep.min_pointwise = min(rep.min_pointwise, float(pw.min()))
            rep.add("tilde >= -1e-12", int(np.sum(til < -1e-12)), f"partition {k}, alpha {alpha}: {type(E).__name__}")
            rep.add("pointwise >= -1e-12", int(np.sum(pw < -1e-12)), f"partition {k}, alpha {alpha}: {type(E).__name__}")
    return rep


# output ----------------------------------------------------------------------


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _cmd_convergence(cfg: ExperimentConfig, out: str | None) -> int:
    tab = run_convergence(cfg)
    text = _csv(["tau", "err", "rate"], [[fmt(t), fmt(e), fmt(r)] for t, e, r in tab.rows()])
    _emit(text, out)
    label = "|u(T) - U_N|" if tab.exact else "|U(N_k) - U(N_k-1)|"
    print(f"{'tau':>12}  {label:>20}  {'rate':>12}")
    for t, e, r in tab.rows():
        print(f"{fmt(t):>12}  {fmt(e) or '---':>20}  {fmt(r) or '---':>12}")
    return EXIT_OK


def _cmd_adaptive(cfg: ExperimentConfig, out: str | None) -> int:
    s, hist, _ = run_adaptive(cfg)
    rows = [[fmt(h.t), fmt(h.tau), fmt(h.estimator), h.rejections] for h in hist]
    _emit(_csv(["t", "tau", "estimator", "rejections"], rows), out)
    print(f"accepted intervals : {s.N}")
    print(f"rejected trials    : {s.rejections}")
    print(f"min / max step     : {fmt(s.tau_min)} / {fmt(s.tau_max)}")
    if s.error is not None:
        print(f"sup-norm error     : {fmt(s.error)}")
    print(f"wall time [s]      : {s.wall_time:.3f}")
    return EXIT_OK


def _cmd_solve(cfg: ExperimentConfig, out: str | None) -> int:
    res, trace, err = run_solve(cfg)
    d = res.U.shape[1]
    ucols = ["u"] if d == 1 else [f"u{j + 1}" for j in range(d)]
    tilde = np.concatenate([[math.nan], trace.tilde])
    resid = np.concatenate([[math.nan], res.residuals])
    rows = [
        [fmt(t)] + [fmt(x) for x in res.U[n]] + [fmt(res.phi[n]), fmt(tilde[n]), fmt(resid[n])]
        for n, t in enumerate(res.partition.nodes)
    ]
    _emit(_csv(["t", *ucols, "phi", "estimator", "residual"], rows), out)
    print(f"intervals          : {res.N}")
    print(f"U_N                : {' '.join(fmt(x) for x in res.final)}")
    print(f"a posteriori bound : {fmt(trace.bound)}")
    if err is not None:
        print(f"sup-norm error     : {fmt(err)}")
    print(f"max prox residual  : {fmt(float(res.residuals.max()))}")
    return EXIT_OK


def _cmd_properties(cfg: ExperimentConfig, out: str | None) -> int:
    rep = run_properties(cfg)
    rows = [[name, count, "pass" if count == 0 else "FAIL"] for name, count in rep.checks.items()]
    _emit(_csv(["check", "violations", "status"], rows), out)
    for name, count, status in rows:
        print(f"{status:4}  {name:32} violations={count}")
    print(f"cases={rep.cases} min basis={rep.min_basis:.3e} max unity residual={rep.max_unity_residual:.3e}")
    print(f"min tilde={rep.min_tilde:.3e} min pointwise={rep.min_pointwise:.3e}")
    for line in rep.details[:10]:
        print("  " + line)
    return EXIT_OK if rep.ok else EXIT_PROPERTY


_COMMANDS = {
    "solve": _cmd_solve,
    "convergence": _cmd_convergence,
    "adaptive": _cmd_adaptive,
    "properties": _cmd_properties,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracflow", description="Time-fractional gradient flow experiments.")
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", help="CSV output path (overrides the config's output)")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="dotted-key override, repeatable")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config, [*args.override, f"command={args.command}"])
        return _COMMANDS[cfg.command](cfg, args.out or cfg.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FracFlowError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
