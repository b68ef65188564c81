"""Order loop: minimize, take a generic point of the optimal level set, extract.

At each order ``k`` the relaxation is minimized to get ``v_k``; the
level-constrained relaxation ``<sigma, X^gamma (f - v_k)> = 0`` is then solved
for an analytic-center point, whose moments are decomposed into an atomic
measure. A successful decomposition ends the loop.

When the plain relaxation has no finite optimum (its dual has no SoS
certificate at this order), ``v_k`` is instead the smallest level whose
level-constrained relaxation is feasible, found by bracketing and bisection
on the phase-1 shift.
"""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass, field, replace
from math import ceil

import numpy as np
from scipy import optimize

from .errors import CapExceeded
from .extract import ExtractedMeasure, ExtractionFailure, extract_measure
from .moments import MomentVector, apply
from .polar import PolarCaps, PolarMode, polar_generators
from .polyparse import VariableTable, parse_polynomial
from .relaxation import Mode, POPInstance, SDPProblem, add_level_constraint, build_mom_relaxation
from .sdpsolve import SolveResult, SolverOptions, Status, generic_point, phase1, solve

RANK_TOL_LADDER = (None, 1e-6, 1e-4, 1e-3, 1e-2)
OCCAM_FACTOR = 10.0   # fewer atoms win if their residual is within this factor
BISECTION_RTOL = 1e-9
MAX_BRACKET_STEPS = 40
LEVEL_SHIFT_TOL = 1e-7  # phase-1 shifts below this count as feasible (solver noise ~1e-8)


class RunStatus(enum.Enum):
    EXACT = "Exact"
    OPTIMAL = "Optimal"
    MAX_ORDER = "MaxOrderReached"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class RunConfig:
    initial_order: int | None = None
    max_order: int | None = None
    mode: Mode = Mode.QUADRATIC_MODULE
    residual_tol: float = 1e-2
    rank_tol: float | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 42
    feasibility_tol: float = 1e-6   # for the self-check on extracted points

    def orders(self, pop: POPInstance) -> range:
        k_min = ceil(pop.degree / 2)
        k0 = self.initial_order if self.initial_order is not None else max(1, k_min)
        if k0 < k_min:
            raise ValueError(f"initial order {k0} is below ceil(deg/2) = {k_min}")
        kmax = self.max_order if self.max_order is not None else k0 + 4
        if kmax < k0:
            raise ValueError(f"max order {kmax} is below initial order {k0}")
        return range(k0, kmax + 1)


@dataclass
class OrderTrace:
    order: int
    v_mom: float | None = None
    v_sos: float | None = None
    gap: float | None = None
    solver_status: str = ""
    value_source: str = "solve"        # or "level-bisection"
    level_status: str | None = None
    extraction: dict = field(default_factory=dict)
    seconds: float = 0.0
    branch: tuple | None = None

    def to_dict(self) -> dict:
        d = {"order": self.order, "v_mom": self.v_mom, "v_sos": self.v_sos, "gap": self.gap,
             "solver_status": self.solver_status, "value_source": self.value_source,
             "level_status": self.level_status, "extraction": self.extraction,
             "seconds": self.seconds}
        if self.branch is not None:
            d["branch"] = list(self.branch)
        return d


@dataclass
class RunReport:
    status: RunStatus
    f_star: float | None = None
    minimizers: ExtractedMeasure | None = None
    trace: list[OrderTrace] = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)
    message: str = ""
    vars: VariableTable | None = None
    sigma: MomentVector | None = None

    @property
    def residual(self) -> float | None:
        return None if self.minimizers is None else float(self.minimizers.residual)

    def to_dict(self) -> dict:
        mins = self.minimizers.to_list() if self.minimizers is not None else []
        return {
            "status": self.status.value,
            "f_star": self.f_star,
            "v_by_order": [{"order": t.order, "v_mom": t.v_mom, "v_sos": t.v_sos, "gap": t.gap}
                           for t in self.trace],
            "minimizers": mins,
            "residual": self.residual,
            "timings_ms": self.timings_ms,
        }


@dataclass(frozen=True)
class MinimizeResult:
    status: Status
    v: float | None
    v_sos: float | None
    gap: float | None
    sigma: MomentVector | None
    problem: SDPProblem
    result: SolveResult | None
    source: str = "solve"


# ---------------------------------------------------------------- minimize

def _local_upper_bound(pop: POPInstance, seed: int, starts: int = 8) -> float | None:
    """``min f(x)`` over feasible points found by local search, if any."""
    if len(pop.eqs) > pop.n:
        return None   # SLSQP needs at most n equality constraints
    rng = np.random.default_rng(seed)
    n = pop.n
    fun = pop.f.evaluate
    cons = [{"type": "ineq", "fun": g.evaluate} for g in pop.ineqs]
    cons += [{"type": "eq", "fun": h.evaluate} for h in pop.eqs]
    best = None
    x0s = [np.zeros(n)] + [rng.uniform(-1.5, 1.5, n) for _ in range(starts - 1)]
    for x0 in x0s:
        method = "SLSQP" if cons else "BFGS"
        try:
            res = optimize.minimize(fun, x0, method=method, constraints=cons or (),
                                    options={"maxiter": 200})
            x = res.x
        except (ValueError, FloatingPointError, OverflowError):
            continue
        if not np.all(np.isfinite(x)) or not pop.is_feasible_point(x, 1e-8):
            continue
        val = float(fun(x))
        if math.isfinite(val) and (best is None or val < best):
            best = val
    return best


def level_feasibility_bound(problem: SDPProblem, f, opts: SolverOptions,
                            upper: float | None = None) -> float | None:
    """Smallest ``v`` with a feasible level-constrained relaxation, or ``None``.

    A level counts as feasible when its phase-1 shift is at most
    ``LEVEL_SHIFT_TOL``; the shift grows roughly linearly below the true
    threshold, so this moves the answer down by about the same amount.
    ``upper`` seeds the bracket.
    """
    def feasible(v: float) -> bool:
        return phase1(add_level_constraint(problem, f, v), opts).t <= LEVEL_SHIFT_TOL

    hi = 0.0 if upper is None else float(upper)
    step = 1e-3 * (1.0 + abs(hi))
    if not feasible(hi):
        for _ in range(MAX_BRACKET_STEPS):
            hi += step
            step *= 4.0
            if feasible(hi):
                break
        else:
            return None
    step = 1e-3 * (1.0 + abs(hi))
    lo = hi - step
    for _ in range(MAX_BRACKET_STEPS):
        if not feasible(lo):
            break
        hi = lo
        step *= 4.0
        lo = hi - step
    else:
        return None
    while hi - lo > BISECTION_RTOL * (1.0 + abs(hi)):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def minimize(pop: POPInstance, order: int, cfg: RunConfig = RunConfig()) -> MinimizeResult:
    """``f*_MoM`` at ``order`` with the dual bound and duality gap."""
    problem = build_mom_relaxation(pop, order, cfg.mode)
    res = solve(problem, cfg.solver)
    if res.status is Status.OPTIMAL:
        return MinimizeResult(res.status, res.objective, res.dual_objective, res.gap,
                              res.moments(), problem, res)
    if res.status is Status.INFEASIBLE:
        return MinimizeResult(res.status, None, None, None, None, problem, res)
    upper = _local_upper_bound(pop, cfg.seed)
    v = level_feasibility_bound(problem, pop.f, cfg.solver, upper)
    if v is not None:
        return MinimizeResult(res.status, v, None, None, None, problem, res, "level-bisection")
    if _near_optimal(res):
        # primal iterate is feasible and the gap small, but the dual diverged
        return MinimizeResult(res.status, res.objective, None, None, res.moments(),
                              problem, res, "inaccurate")
    return MinimizeResult(res.status, None, None, None, None, problem, res)


INACCURATE_GAP = 1e-3
INACCURATE_FEAS = 1e-6


def _near_optimal(res: SolveResult) -> bool:
    if res.y is None or not math.isfinite(res.objective):
        return False
    relgap = abs(res.objective - res.dual_objective) / (
        1.0 + abs(res.objective) + abs(res.dual_objective))
    return (relgap <= INACCURATE_GAP and res.primal_infeasibility <= INACCURATE_FEAS
            and res.min_eig >= -INACCURATE_FEAS)


# ---------------------------------------------------------------- extraction

def _self_check(pop: POPInstance, m: ExtractedMeasure, f_star: float, cfg: RunConfig) -> str | None:
    tol = cfg.feasibility_tol
    for x in m.points:
        if not pop.is_feasible_point(x, tol):
            return f"extracted point {x.tolist()} violates the constraints"
        if abs(pop.f(x) - f_star) > 10 * cfg.residual_tol:
            return f"f at extracted point {x.tolist()} is far from f_star"
    return None


def extract_with_ladder(sigma: MomentVector, cfg: RunConfig) -> tuple[ExtractedMeasure | None, dict]:
    """Decompose at each rank tolerance and pick among the successes.

    The pick is the measure with fewest atoms whose residual is within
    ``OCCAM_FACTOR`` of the best one; ties go to the smaller residual.
    """
    tols = (cfg.rank_tol,) if cfg.rank_tol is not None else RANK_TOL_LADDER
    found, attempts = [], []
    for tol in tols:
        try:
            m = extract_measure(sigma, tol, cfg.residual_tol, cfg.seed)
        except ExtractionFailure as exc:
            attempts.append({"rank_tol": tol, "failure": exc.reason,
                             "residual": exc.diagnostics.get("residual"),
                             "ranks": exc.diagnostics.get("ranks")})
            continue
        attempts.append({"rank_tol": tol, "points": len(m), "residual": m.residual,
                         "moment_degree": m.moment_degree})
        found.append(m)
    if not found:
        return None, {"attempts": attempts}
    floor = OCCAM_FACTOR * min(m.residual for m in found)
    pick = min((m for m in found if m.residual <= floor), key=lambda m: (len(m), m.residual))
    return pick, {"attempts": attempts}


# ---------------------------------------------------------------- Algorithm loop

def finite_minimizers(pop: POPInstance, cfg: RunConfig = RunConfig()) -> RunReport:
    """Raise the order until the level-set generic point decomposes."""
    t_start = time.perf_counter()
    report = RunReport(RunStatus.MAX_ORDER, vars=pop.vars)
    for k in cfg.orders(pop):
        t0 = time.perf_counter()
        tr = OrderTrace(k)
        report.trace.append(tr)
        mres = minimize(pop, k, cfg)
        tr.solver_status = mres.status.value
        tr.value_source = mres.source
        tr.v_mom, tr.v_sos, tr.gap = mres.v, mres.v_sos, mres.gap
        if mres.status is Status.INFEASIBLE:
            # an infeasible relaxation certifies that S is empty
            report.status = RunStatus.INFEASIBLE
            report.message = f"relaxation infeasible at order {k}"
            tr.seconds = time.perf_counter() - t0
            break
        if mres.v is None:
            tr.extraction = {"failure": "no finite value at this order"}
            tr.seconds = time.perf_counter() - t0
            continue
        level = add_level_constraint(mres.problem, pop.f, mres.v)
        gp = generic_point(level, cfg.solver)
        tr.level_status = gp.status.value
        if gp.status is Status.INFEASIBLE or gp.y is None:
            tr.extraction = {"failure": "level set infeasible"}
            tr.seconds = time.perf_counter() - t0
            continue
        if gp.status is Status.UNBOUNDED:
            # iterates ran off to infinity: the level set has no analytic
            # center, and its approximate points need not be attained
            tr.extraction = {"failure": "level set unbounded"}
            tr.seconds = time.perf_counter() - t0
            continue
        sigma = gp.moments()
        m, diag = extract_with_ladder(sigma, cfg)
        tr.extraction = diag
        if m is not None:
            f_star = apply(sigma, pop.f)
            problem = _self_check(pop, m, f_star, cfg)
            if problem is None:
                report.status = RunStatus.EXACT
                report.f_star = f_star
                report.minimizers = m
                report.sigma = sigma
                tr.seconds = time.perf_counter() - t0
                break
            diag["self_check"] = problem
        if report.sigma is None:
            report.sigma = sigma
        tr.seconds = time.perf_counter() - t0
    if report.status is RunStatus.MAX_ORDER:
        report.message = "no order produced a verified decomposition"
    report.timings_ms = {"total": 1e3 * (time.perf_counter() - t_start),
                         "by_order": {str(t.order): 1e3 * t.seconds for t in report.trace}}
    return report


def single_order(pop: POPInstance, order: int, cfg: RunConfig = RunConfig()) -> RunReport:
    """One relaxation solve; minimizers are reported when the optimum decomposes."""
    t_start = time.perf_counter()
    mres = minimize(pop, order, cfg)
    tr = OrderTrace(order, mres.v, mres.v_sos, mres.gap, mres.status.value, mres.source)
    report = RunReport(RunStatus.OPTIMAL, f_star=mres.v, trace=[tr], vars=pop.vars, sigma=mres.sigma)
    if mres.status is Status.INFEASIBLE:
        report.status = RunStatus.INFEASIBLE
    elif mres.v is None:
        report.status = RunStatus.MAX_ORDER
        report.message = f"relaxation has no finite value at order {order}"
    elif mres.sigma is not None:
        m, diag = extract_with_ladder(mres.sigma, cfg)
        tr.extraction = diag
        report.minimizers = m
    report.timings_ms = {"total": 1e3 * (time.perf_counter() - t_start)}
    return report


def _project(m: ExtractedMeasure, n: int, tol: float = 1e-6) -> ExtractedMeasure:
    """Drop extended coordinates and merge points that coincide in ``x``."""
    pts, ws = [], []
    for p, w in zip(m.points[:, :n], m.weights):
        for i, q in enumerate(pts):
            if np.max(np.abs(p - q)) <= tol:
                ws[i] += w
                break
        else:
            pts.append(p.copy())
            ws.append(float(w))
    return replace(m, points=np.array(pts), weights=np.array(ws), rank=len(ws))


def polar_minimize(pop: POPInstance, order: int, polar_mode: PolarMode | str | None = None,
                   cfg: RunConfig = RunConfig(), caps: PolarCaps = PolarCaps()) -> RunReport:
    """Add polar-ideal (or KKT) equalities, then run the order loop from ``order``.

    With ``polar_mode=None`` the product system is used while it fits the
    caps and the branch systems otherwise. An explicit mode raises
    ``CapExceeded`` instead of switching.
    """
    if polar_mode is None:
        try:
            system = polar_generators(pop, PolarMode.PRODUCT, caps)
            polar_mode = PolarMode.PRODUCT
        except CapExceeded:
            polar_mode = PolarMode.BRANCH
            system = polar_generators(pop, polar_mode, caps)
    else:
        polar_mode = PolarMode(polar_mode)
        system = polar_generators(pop, polar_mode, caps)
    run_cfg = replace(cfg, initial_order=order)
    if polar_mode is not PolarMode.BRANCH:
        aug = system.pop(pop.f)
        report = finite_minimizers(aug, run_cfg)
        if report.minimizers is not None and polar_mode is PolarMode.KKT:
            report.minimizers = _project(report.minimizers, pop.n)
        report.vars = pop.vars
        return report

    t_start = time.perf_counter()
    best: RunReport | None = None
    trace: list[OrderTrace] = []
    statuses = []
    for br in system.branches:
        sub = POPInstance(pop.f, pop.ineqs, br.generators, pop.vars)
        try:
            rep = finite_minimizers(sub, run_cfg)
        except ValueError as exc:   # branch generators too large for this order
            trace.append(OrderTrace(order, branch=br.active, extraction={"failure": str(exc)}))
            statuses.append(RunStatus.MAX_ORDER)
            continue
        for t in rep.trace:
            t.branch = br.active
        trace.extend(rep.trace)
        statuses.append(rep.status)
        if rep.status is RunStatus.EXACT and (best is None or rep.f_star < best.f_star):
            best = rep
    if best is not None:
        out = replace(best, trace=trace)
    elif statuses and all(s is RunStatus.INFEASIBLE for s in statuses):
        out = RunReport(RunStatus.INFEASIBLE, trace=trace, message="every branch is infeasible")
    else:
        out = RunReport(RunStatus.MAX_ORDER, trace=trace, message="no branch decomposed")
    out.vars = pop.vars
    out.timings_ms = {"total": 1e3 * (time.perf_counter() - t_start)}
    return out


# ---------------------------------------------------------------- I/O

def load_problem(path) -> POPInstance:
    """Read ``{vars, objective, inequalities, equalities}`` JSON."""
    with open(path) as fh:
        data = json.load(fh)
    return problem_from_dict(data)


def problem_from_dict(data: dict) -> POPInstance:
    missing = {"vars", "objective"} - set(data)
    if missing:
        raise ValueError(f"problem file lacks {sorted(missing)}")
    vars = VariableTable(tuple(data["vars"]))
    f = parse_polynomial(data["objective"], vars)
    g = [parse_polynomial(s, vars) for s in data.get("inequalities", [])]
    h = [parse_polynomial(s, vars) for s in data.get("equalities", [])]
    return POPInstance(f, g, h, vars)


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(_encode(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in seq) + "\n" + pad + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with every real written to 17 significant digits."""
    return _encode(obj) + "\n"
