"""Synthetic panels from the three-block nonstationary seasonal factor model.

    x_t = L1 f1_t + L2 f2_t + L3 f3_t + eps_t

Block 1 factors are integrated nonseasonal ARIMA (d >= 1, D = 0), block 2
factors are seasonally integrated (D >= 1) and block 3 factors are stationary
ARMA.  Each factor and the idiosyncratic noise get independent random
streams spawned from one seed.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import jsonschema
import numpy as np

from ._io import atomic_write_text
from .dfm import _matrix_csv
from .exceptions import NumericalError, SpecError
from .panel import Panel, TimeIndex, panel_to_csv_text
from .sarima import SarimaSpec, is_feasible, simulate_sarima

ORTHONORMAL = "orthonormal"
GAUSSIAN_RAW = "gaussian"


@dataclass(frozen=True)
class FactorProcess:
    spec: SarimaSpec
    params: tuple = ()
    sigma2: float = 1.0


def default_process(block, S=12):
    if block == 1:
        return FactorProcess(SarimaSpec(0, 1, 0, 0, 0, 0, S))
    if block == 2:
        return FactorProcess(SarimaSpec(0, 0, 0, 0, 1, 1, S), (-0.5,))
    return FactorProcess(SarimaSpec(1, 0, 0, 0, 0, 0, S), (0.5,))


@dataclass
class SimScenario:
    n: int
    T: int
    r1: int = 0
    r2: int = 2
    r3: int = 0
    S: int = 12
    processes: Optional[List[FactorProcess]] = None  # r1 + r2 + r3 entries, block order
    loading_style: str = ORTHONORMAL
    idio_sd: Union[float, Sequence[float]] = 0.3
    missing_rate: float = 0.0
    seed: int = 0
    burn_in: Optional[int] = None
    start_year: int = 2008
    start_month: int = 1

    @property
    def r(self):
        return self.r1 + self.r2 + self.r3

    def resolved_processes(self):
        if self.processes is not None:
            return list(self.processes)
        blocks = [1] * self.r1 + [2] * self.r2 + [3] * self.r3
        return [default_process(b, self.S) for b in blocks]

    def validate(self):
        if self.n < 1 or self.T < 2:
            raise SpecError("need n >= 1 and T >= 2")
        if min(self.r1, self.r2, self.r3) < 0 or self.r < 1 or self.r > self.n:
            raise SpecError(f"factor counts ({self.r1}, {self.r2}, {self.r3}) invalid for n={self.n}")
        if self.loading_style not in (ORTHONORMAL, GAUSSIAN_RAW):
            raise SpecError(f"unknown loading_style {self.loading_style!r}")
        if not 0 <= self.missing_rate < 1:
            raise SpecError("missing_rate must be in [0, 1)")
        sd = np.broadcast_to(np.asarray(self.idio_sd, dtype=float), (self.n,)) if np.ndim(self.idio_sd) == 0 \
            else np.asarray(self.idio_sd, dtype=float)
        if sd.shape != (self.n,) or np.any(sd < 0):
            raise SpecError("idio_sd must be a nonnegative scalar or a length-n vector")
        procs = self.resolved_processes()
        if len(procs) != self.r:
            raise SpecError(f"{len(procs)} factor processes for r={self.r}")
        blocks = [1] * self.r1 + [2] * self.r2 + [3] * self.r3
        for j, (b, proc) in enumerate(zip(blocks, procs)):
            s = proc.spec
            if s.S != self.S:
                raise SpecError(f"factor {j + 1}: season {s.S} != scenario season {self.S}")
            if b == 1 and not (s.d >= 1 and s.D == 0):
                raise SpecError(f"factor {j + 1}: nonseasonal nonstationary block needs d >= 1, D = 0")
            if b == 2 and s.D < 1:
                raise SpecError(f"factor {j + 1}: seasonal block needs D >= 1")
            if b == 3 and (s.d or s.D):
                raise SpecError(f"factor {j + 1}: stationary block needs d = D = 0")
            if len(proc.params) != s.n_params or not is_feasible(s, proc.params):
                raise SpecError(f"factor {j + 1}: parameters {proc.params} infeasible for {s}")
            if proc.sigma2 <= 0:
                raise SpecError(f"factor {j + 1}: sigma2 must be positive")
        return sd


@dataclass(eq=False)
class SimOutput:
    panel: Panel
    full_panel: Panel
    true_loadings: np.ndarray
    true_factors: np.ndarray
    true_common: np.ndarray
    idiosyncratic: np.ndarray
    innovations: np.ndarray  # factor innovations over the sample window
    scenario: SimScenario = field(repr=False, default=None)

    def write(self, outdir):
        outdir = Path(outdir)
        atomic_write_text(outdir / "panel.csv", panel_to_csv_text(self.panel))
        names = [f"f{j + 1}" for j in range(self.true_loadings.shape[1])]
        ids = self.panel.ids
        time = self.panel.time
        atomic_write_text(
            outdir / "truth" / "loadings.csv", _matrix_csv(["station"], [(i,) for i in ids], names, self.true_loadings)
        )
        atomic_write_text(
            outdir / "truth" / "factors.csv",
            _matrix_csv(["date", "t"], [(lab, t + 1) for t, lab in enumerate(time.labels())], names, self.true_factors.T),
        )
        atomic_write_text(outdir / "truth" / "full_panel.csv", panel_to_csv_text(self.full_panel))


def gen_scenario(scenario):
    """Draw one synthetic panel; fully reproducible from ``scenario.seed``."""
    sd = scenario.validate()
    n, T, r = scenario.n, scenario.T, scenario.r
    root = np.random.SeedSequence(scenario.seed)
    s_load, s_idio, s_miss, *s_fac = root.spawn(3 + r)

    g = np.random.default_rng(s_load).standard_normal((n, r))
    if scenario.loading_style == ORTHONORMAL:
        loadings, _ = np.linalg.qr(g)
    else:
        loadings = g

    factors = np.empty((r, T))
    innov = np.empty((r, T))
    for j, (proc, ss) in enumerate(zip(scenario.resolved_processes(), s_fac)):
        path = simulate_sarima(
            proc.spec, proc.params, T, seed=ss, burn_in=scenario.burn_in, sigma2=proc.sigma2, return_parts=True
        )
        factors[j], innov[j] = path.series, path.innovations

    eps = sd[:, None] * np.random.default_rng(s_idio).standard_normal((n, T))
    common = loadings @ factors
    full = common + eps

    time = TimeIndex(scenario.start_year, scenario.start_month, T)
    ids = tuple(f"s{i + 1:02d}" for i in range(n))
    full_panel = Panel(ids, time, full)
    holes = np.zeros((n, T), dtype=bool)
    k = int(round(scenario.missing_rate * n * (T - 1)))
    if k:
        # cells with t >= 2 only; the first observation must stay observed
        flat = np.random.default_rng(s_miss).choice(n * (T - 1), size=k, replace=False)
        holes[flat // (T - 1), flat % (T - 1) + 1] = True
    panel = Panel(ids, time, np.where(holes, np.nan, full), holes) if k else full_panel
    return SimOutput(panel, full_panel, loadings, factors, common, eps, innov, scenario)


def principal_angle(a, b, tol=1e-6):
    """Largest principal angle in degrees between the column spans of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    k = a.shape[1]
    for m in (a, b):
        if np.max(np.abs(m.T @ m - np.eye(k))) > tol:
            raise NumericalError("inputs must have orthonormal (full-rank) columns")
    # cos from A'B, sin from the part of B outside span(A); arctan2 keeps
    # precision at both ends of [0, 90]
    cos = np.linalg.svd(a.T @ b, compute_uv=False).min()
    sin = np.linalg.svd(b - a @ (a.T @ b), compute_uv=False).max()
    return float(np.clip(np.degrees(np.arctan2(sin, cos)), 0.0, 90.0))


def orthonormal_basis(m):
    q, _ = np.linalg.qr(np.asarray(m, dtype=float))
    return q


_PROCESS_SCHEMA = {
    "type": "object",
    "properties": {
        "order": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 6, "maxItems": 6},
        "params": {"type": "array", "items": {"type": "number"}},
        "sigma2": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["order"],
    "additionalProperties": False,
}
_BLOCK_SCHEMA = {"oneOf": [_PROCESS_SCHEMA, {"type": "array", "items": _PROCESS_SCHEMA}]}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "T": {"type": "integer", "minimum": 2},
        "r1": {"type": "integer", "minimum": 0},
        "r2": {"type": "integer", "minimum": 0},
        "r3": {"type": "integer", "minimum": 0},
        "season": {"type": "integer", "minimum": 2},
        "loading_style": {"enum": [ORTHONORMAL, GAUSSIAN_RAW]},
        "idio_sd": {"oneOf": [{"type": "number", "minimum": 0},
                              {"type": "array", "items": {"type": "number", "minimum": 0}}]},
        "missing_rate": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "burn_in": {"type": "integer", "minimum": 0},
        "start": {"type": "string", "pattern": r"^\d{4}-\d{2}$"},
        "nonseasonal": _BLOCK_SCHEMA,
        "seasonal": _BLOCK_SCHEMA,
        "stationary": _BLOCK_SCHEMA,
    },
    "required": ["n", "T"],
    "additionalProperties": False,
}


def scenario_from_dict(cfg):
    """Build a SimScenario from a JSON-style dict (validated against SCENARIO_SCHEMA)."""
    try:
        jsonschema.validate(cfg, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise SpecError(f"scenario config invalid at {where}: {exc.message}") from None
    S = cfg.get("season", 12)
    counts = {"nonseasonal": cfg.get("r1", 0), "seasonal": cfg.get("r2", 2), "stationary": cfg.get("r3", 0)}
    procs = []
    for block, (key, count) in enumerate(counts.items(), start=1):
        raw = cfg.get(key)
        if raw is None:
            procs += [default_process(block, S)] * count
            continue
        items = raw if isinstance(raw, list) else [raw] * count
        if len(items) != count:
            raise SpecError(f"{key}: {len(items)} processes for {count} factors")
        for it in items:
            try:
                spec = SarimaSpec(*it["order"], S)
            except ValueError as exc:
                raise SpecError(f"{key}: {exc}") from None
            procs.append(FactorProcess(spec, tuple(it.get("params", ())), it.get("sigma2", 1.0)))
    start_year, start_month = map(int, cfg.get("start", "2008-01").split("-"))
    return SimScenario(
        n=cfg["n"], T=cfg["T"], r1=counts["nonseasonal"], r2=counts["seasonal"], r3=counts["stationary"], S=S,
        processes=procs, loading_style=cfg.get("loading_style", ORTHONORMAL), idio_sd=cfg.get("idio_sd", 0.3),
        missing_rate=cfg.get("missing_rate", 0.0), seed=cfg.get("seed", 0), burn_in=cfg.get("burn_in"),
        start_year=start_year, start_month=start_month,
    )


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: not valid JSON: {exc}") from None
    return scenario_from_dict(cfg)


def bundled_config(name="paper_shape.json"):
    return Path(__file__).with_name("data") / name
