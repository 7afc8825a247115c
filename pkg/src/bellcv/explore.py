"""CHSH scans over detector distances, optimization and misalignment scans.

Two plot axes (z1, z2) do not determine four settings, so scans take a mode:

``symmetric_pair``
    both parties use the same pair: za = zb = z1, za' = zb' = z2.
``fixed_partner``
    za = z1, zb = z2, with za' and zb' held at given constants.
``full_4tuple``
    za = z1, zb = z2, and each cell reports the best za' (from the z1 axis)
    and zb' (from the z2 axis).

All modes reduce to a table of correlations E(u, v). Every cell is then a
plain CHSH evaluation from that table, so a cell reproduces
:func:`bellcv.chsh.chsh_value` at the same settings bit for bit.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .chsh import ChshEngine, ChshResult, ChshSettings, chsh_branches
from .grids import Axis
from .propagation import OpticalConfig

MODES = ("symmetric_pair", "fixed_partner", "full_4tuple")


@dataclass(frozen=True)
class ScanSpec:
    mode: str
    z1: Axis
    z2: Axis
    za_prime: float = 0.0
    zb_prime: float = 0.0
    dx1: float = 0.0
    dx2: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("za_prime", "zb_prime", "dx1", "dx2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def settings(self, z1: float, z2: float, za_prime=None, zb_prime=None) -> ChshSettings:
        if self.mode == "symmetric_pair":
            return ChshSettings(z1, z2, z1, z2, self.dx1, self.dx2)
        if self.mode == "fixed_partner":
            return ChshSettings(z1, self.za_prime, z2, self.zb_prime, self.dx1, self.dx2)
        return ChshSettings(z1, za_prime, z2, zb_prime, self.dx1, self.dx2)


def _engine(state, optics) -> ChshEngine:
    if isinstance(state, ChshEngine):
        return state
    return ChshEngine(state, optics or OpticalConfig())


class CorrelationTable:
    """Memoized E(u, v) and its error bound at fixed thresholds."""

    def __init__(self, engine: ChshEngine, dx1: float = 0.0, dx2: float = 0.0, workers: int = 1):
        self.engine = engine
        self.dx1 = float(dx1)
        self.dx2 = float(dx2)
        self.workers = workers
        self._values: dict = {}

    def fill(self, pairs):
        todo = sorted({(float(u), float(v)) for u, v in pairs} - self._values.keys())

        def one(pair):
            return self.engine.correlation_with_error(pair[0], pair[1], self.dx1, self.dx2)

        if self.workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                results = list(pool.map(one, todo))
        else:
            results = [one(p) for p in todo]
        self._values.update(zip(todo, results))

    def __getitem__(self, pair):
        key = (float(pair[0]), float(pair[1]))
        if key not in self._values:
            self.fill([key])
        return self._values[key]

    def chsh(self, settings: ChshSettings) -> ChshResult:
        if (settings.dx1, settings.dx2) != (self.dx1, self.dx2):
            raise ValueError("settings thresholds differ from the table's")
        es, errs = zip(*(self[p] for p in settings.pairs()))
        s_minus, s_plus = chsh_branches(*es)
        return ChshResult(tuple(es), s_minus, s_plus, settings, float(sum(errs)))


@dataclass
class ScanResult:
    spec: ScanSpec
    z1: np.ndarray
    z2: np.ndarray
    s_max: np.ndarray
    s_minus: np.ndarray
    s_plus: np.ndarray
    err_bound: np.ndarray
    za_prime: np.ndarray | None = None
    zb_prime: np.ndarray | None = None

    def best(self) -> tuple:
        """(i, j) of the largest s_max, lowest flat index on ties."""
        return np.unravel_index(int(np.argmax(self.s_max)), self.s_max.shape)

    def settings_at(self, i: int, j: int) -> ChshSettings:
        if self.spec.mode == "full_4tuple":
            return self.spec.settings(self.z1[i], self.z2[j], self.za_prime[i, j], self.zb_prime[i, j])
        return self.spec.settings(self.z1[i], self.z2[j])

    def top_cells(self, count: int, *, skip_degenerate: bool = True):
        order = np.argsort(-self.s_max, axis=None, kind="stable")
        cells = []
        for flat in order:
            i, j = np.unravel_index(int(flat), self.s_max.shape)
            st = self.settings_at(i, j)
            if skip_degenerate and (st.za == st.za_prime or st.zb == st.zb_prime):
                continue
            cells.append((i, j))
            if len(cells) == count:
                break
        return cells

    def to_csv(self, stream=None, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["z1_mm", "z2_mm", "s_max", "s_minus_branch", "s_plus_branch", "err_bound"]
        extra = self.spec.mode == "full_4tuple"
        if extra:
            cols += ["za_prime_mm", "zb_prime_mm"]
        writer.writerow(cols)
        for i, a in enumerate(self.z1):
            for j, b in enumerate(self.z2):
                row = [a, b, self.s_max[i, j], self.s_minus[i, j], self.s_plus[i, j], self.err_bound[i, j]]
                if extra:
                    row += [self.za_prime[i, j], self.zb_prime[i, j]]
                writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def scan_chsh(state, spec: ScanSpec, *, optics: OpticalConfig | None = None, workers: int = 1) -> ScanResult:
    """Evaluate s_max on the (z1, z2) grid of ``spec``."""
    engine = _engine(state, optics)
    table = CorrelationTable(engine, spec.dx1, spec.dx2, workers)
    z1 = spec.z1.values()
    z2 = spec.z2.values()
    if spec.mode == "full_4tuple":
        return _scan_full(table, spec, z1, z2)
    shape = (z1.size, z2.size)
    cells = [(i, j, spec.settings(z1[i], z2[j])) for i in range(z1.size) for j in range(z2.size)]
    table.fill(p for _, _, st in cells for p in st.pairs())
    out = {name: np.empty(shape) for name in ("s_max", "s_minus", "s_plus", "err")}
    for i, j, st in cells:
        res = table.chsh(st)
        out["s_max"][i, j] = res.s_max
        out["s_minus"][i, j] = res.s_minus
        out["s_plus"][i, j] = res.s_plus
        out["err"][i, j] = res.err_bound
    return ScanResult(spec, z1, z2, out["s_max"], out["s_minus"], out["s_plus"], out["err"])


def _scan_full(table: CorrelationTable, spec: ScanSpec, z1, z2) -> ScanResult:
    table.fill((u, v) for u in z1 for v in z2)
    E = np.array([[table[u, v][0] for v in z2] for u in z1])
    err = np.array([[table[u, v][1] for v in z2] for u in z1])
    # index order: a, a', b, b'
    head = np.abs(E[:, None, :, None] - E[:, None, None, :])
    tail = E[None, :, :, None] + E[None, :, None, :]
    s_minus = head - tail
    s_plus = head + tail
    s_all = np.maximum(s_minus, s_plus)
    n1, n2 = z1.size, z2.size
    flat = s_all.transpose(0, 2, 1, 3).reshape(n1, n2, n1 * n2)
    pick = np.argmax(flat, axis=2)
    ap, bp = np.unravel_index(pick, (n1, n2))
    ia, ib = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    errs = err[ia, ib] + err[ia, bp] + err[ap, ib] + err[ap, bp]
    return ScanResult(
        spec, z1, z2,
        s_all[ia, ap, ib, bp], s_minus[ia, ap, ib, bp], s_plus[ia, ap, ib, bp], errs,
        za_prime=z1[ap], zb_prime=z2[bp],
    )


# --- optimization -----------------------------------------------------------------


@dataclass
class Optimum:
    settings: ChshSettings
    s_max: float
    branch: str
    err_bound: float
    result: ChshResult
    evaluations: int
    converged: bool
    trace: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    restarts: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "settings": self.settings.as_dict(),
            "s_max": self.s_max,
            "branch": self.branch,
            "err_bound": self.err_bound,
            "correlations": list(self.result.correlations),
            "s_minus": self.result.s_minus,
            "s_plus": self.result.s_plus,
            "converged": self.converged,
            "trace": {
                "evaluations": self.evaluations,
                "first_best": self.trace[0] if self.trace else None,
                "final_best": self.trace[-1] if self.trace else None,
                "seeds": [list(s) for s in self.seeds],
                "restarts": self.restarts,
            },
        }


DEFAULT_BOUNDS = ((-20.0, 20.0),) * 4


def default_seeds(state, *, optics=None, spec: ScanSpec | None = None, count: int = 3, workers: int = 1):
    """Best non-degenerate cells of a coarse scan (symmetric_pair by default), as 4-tuples."""
    if spec is None:
        axis = Axis(-10.0, 10.0, 0.5)
        spec = ScanSpec("symmetric_pair", axis, axis)
    scan = scan_chsh(state, spec, optics=optics, workers=workers)
    seeds = []
    for i, j in scan.top_cells(count):
        st = scan.settings_at(i, j)
        seeds.append((st.za, st.za_prime, st.zb, st.zb_prime))
    return seeds, scan


def optimize_chsh(
    state,
    bounds=DEFAULT_BOUNDS,
    seeds=None,
    *,
    optics: OpticalConfig | None = None,
    dx1: float = 0.0,
    dx2: float = 0.0,
    max_evals: int = 3000,
    restarts: int = 3,
    xatol: float = 1e-4,
    fatol: float = 1e-11,
    initial_step: float = 1.0,
) -> Optimum:
    """Nelder-Mead over (za, za', zb, zb') inside ``bounds``, restarted from each seed.

    Each run is restarted from its end point with a fresh simplex until a
    restart gains less than ``fatol`` or ``restarts`` is used up. Running
    out of ``max_evals`` returns the best point found with ``converged=False``.
    """
    engine = _engine(state, optics)
    bounds = [tuple(map(float, b)) for b in bounds]
    if len(bounds) != 4 or any(not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi) for lo, hi in bounds):
        raise ValueError("bounds must be four finite (lo, hi) pairs")
    if seeds is None:
        seeds, _ = default_seeds(engine)
    seeds = [tuple(float(np.clip(v, lo, hi)) for v, (lo, hi) in zip(s, bounds)) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    free = [i for i, (lo, hi) in enumerate(bounds) if hi > lo]
    state_ = {"best": None, "evals": 0, "trace": []}

    def full(xfree, base):
        pt = list(base)
        for i, v in zip(free, xfree):
            pt[i] = float(np.clip(v, *bounds[i]))
        return tuple(pt)

    def evaluate(point):
        res = engine.chsh(ChshSettings(*point, dx1, dx2))
        state_["evals"] += 1
        if state_["best"] is None or res.s_max > state_["best"].s_max:
            state_["best"] = res
        state_["trace"].append(state_["best"].s_max)
        return res.s_max

    class _Budget(Exception):
        pass

    def objective(xfree, base):
        if state_["evals"] >= max_evals:
            raise _Budget
        return -evaluate(full(xfree, base))

    for s in seeds:
        evaluate(s)
    converged = True
    schedule = []
    if free:
        for s in seeds:
            start = np.array([s[i] for i in free])
            prev = -math.inf
            for attempt in range(restarts + 1):
                simplex = _initial_simplex(start, [bounds[i] for i in free], initial_step / (attempt + 1))
                try:
                    res = minimize(
                        objective, start, args=(s,), method="Nelder-Mead",
                        bounds=[bounds[i] for i in free],
                        options={"initial_simplex": simplex, "xatol": xatol, "fatol": fatol,
                                 "maxfev": max_evals},
                    )
                except _Budget:
                    converged = False
                    break
                start = res.x
                value = -float(res.fun)
                schedule.append({"seed": list(s), "restart": attempt, "s_max": value, "nfev": int(res.nfev)})
                if value - prev < fatol:
                    break
                prev = value
            if not converged:
                break
    best = state_["best"]
    return Optimum(
        settings=best.settings,
        s_max=best.s_max,
        branch=best.branch,
        err_bound=best.err_bound,
        result=best,
        evaluations=state_["evals"],
        converged=converged,
        trace=state_["trace"],
        seeds=seeds,
        restarts=schedule,
    )


def _initial_simplex(x0, bounds, step):
    pts = [np.array(x0, dtype=float)]
    for i, (lo, hi) in enumerate(bounds):
        p = pts[0].copy()
        # step inward if the seed sits on an upper bound
        p[i] = p[i] + step if p[i] + step <= hi else p[i] - step
        pts.append(p)
    return np.array(pts)


# --- misalignment -----------------------------------------------------------------


@dataclass
class MisalignmentResult:
    base: ChshSettings
    dxp: np.ndarray
    dxm: np.ndarray
    s_max: np.ndarray
    err_bound: np.ndarray

    @property
    def s_minus_2(self) -> np.ndarray:
        return self.s_max - 2.0

    def argmax(self) -> tuple:
        return np.unravel_index(int(np.argmax(self.s_max)), self.s_max.shape)

    def to_csv(self, stream=None, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dxp_mm", "dxm_mm", "s_max", "s_minus_2"])
        for i, p in enumerate(self.dxp):
            for j, m in enumerate(self.dxm):
                writer.writerow([repr(float(v)) for v in (p, m, self.s_max[i, j], self.s_max[i, j] - 2.0)])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def misalignment_scan(
    state,
    base: ChshSettings,
    dxp: Axis,
    dxm: Axis,
    *,
    optics: OpticalConfig | None = None,
    workers: int = 1,
) -> MisalignmentResult:
    """s_max at the base distances with dx1 = (dxp + dxm)/2, dx2 = (dxp - dxm)/2."""
    engine = _engine(state, optics)
    ps, ms = dxp.values(), dxm.values()
    cells = [(i, j) for i in range(ps.size) for j in range(ms.size)]

    def one(cell):
        p, m = ps[cell[0]], ms[cell[1]]
        st = ChshSettings(base.za, base.za_prime, base.zb, base.zb_prime, 0.5 * (p + m), 0.5 * (p - m))
        return engine.chsh(st)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(c) for c in cells]
    s_max = np.empty((ps.size, ms.size))
    err = np.empty_like(s_max)
    for (i, j), res in zip(cells, results):
        s_max[i, j] = res.s_max
        err[i, j] = res.err_bound
    return MisalignmentResult(base, ps, ms, s_max, err)
