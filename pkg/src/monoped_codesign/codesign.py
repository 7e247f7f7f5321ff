"""Stage-2 co-design: the 13-variable design/control vector, case masks, and
the rollout-based combined cost minimised by CMA-ES."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np

from . import cmaes
from .controller import ControlParams
from .fivebar import LegGeometry
from .gearbox import RATIO_GRID_MIN, RATIO_GRID_STEP, ActuatorMapEntry
from .linkmass import LinkMassModel, link_mass
from .motors import ActuatorSpec, MotorSpec
from .sim import DT, T_MAX, ContactParams, JumpResult, RobotDesign, rollout

VARIABLES = ("l1", "l2", "l3", "M_l", "M_r", "g_l", "g_r", "z0", "K", "C", "T", "l0", "alpha0")
LOWER = np.array([0.15, 0.15, 0.05, 1, 1, 4.0, 4.0, 0.0, 50, 0, 10, 0, -math.pi / 2])
UPPER = np.array([0.35, 0.35, 0.20, 6, 6, 35.0, 35.0, 0.70, 1000, 10, 50, 10, math.pi / 2])
# z0 is further clamped to l1 + l2 after decoding

DESIGN_SLICE = ("l1", "l2", "l3", "M_l", "M_r", "g_l", "g_r")
LINK_VARS = ("l1", "l2", "l3")
ACTUATOR_VARS = ("M_l", "M_r", "g_l", "g_r")
CONTROL_VARS = ("z0", "K", "C", "T", "l0", "alpha0")

DECODE_PENALTY = cmaes.FAILURE_PENALTY


class NoActuatorError(ValueError):
    """A motor has no feasible entry anywhere in its actuator map."""


@dataclass(frozen=True)
class CodesignVariables:
    l1: float
    l2: float
    l3: float
    M_l: int
    M_r: int
    g_l: float
    g_r: float
    z0: float
    K: float
    C: float
    T: float
    l0: float
    alpha0: float

    def as_vector(self) -> np.ndarray:
        return np.array([float(getattr(self, n)) for n in VARIABLES])

    @property
    def control(self) -> ControlParams:
        return ControlParams(self.K, self.C, self.T, self.l0, self.alpha0)

    @property
    def geometry(self) -> LegGeometry:
        return LegGeometry(self.l1, self.l2, self.l3)


NOMINAL = CodesignVariables(l1=0.297, l2=0.302, l3=0.125, M_l=2, M_r=2, g_l=6.0, g_r=6.0,
                            z0=0.3, K=197.4, C=7.7, T=11.0, l0=4.2, alpha0=1.5)


@dataclass(frozen=True)
class CaseSpec:
    name: str
    free: frozenset[str]
    fixed: CodesignVariables = NOMINAL

    def __post_init__(self):
        unknown = set(self.free) - set(VARIABLES)
        if unknown:
            raise ValueError(f"unknown variables: {sorted(unknown)}")

    @property
    def free_mask(self) -> np.ndarray:
        return np.array([n in self.free for n in VARIABLES])


CASES = {
    "nominal": CaseSpec("Nominal", frozenset(CONTROL_VARS)),
    "a": CaseSpec("A", frozenset(LINK_VARS + CONTROL_VARS)),
    "b": CaseSpec("B", frozenset(ACTUATOR_VARS + CONTROL_VARS)),
    "c": CaseSpec("C", frozenset(VARIABLES)),
}


def get_case(name: str) -> CaseSpec:
    try:
        return CASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; expected one of {', '.join(CASES)}") from None


@dataclass(frozen=True)
class CombinedCostWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    K_d: float = 20.0  # J/m
    failure_penalty: float = 1e3

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.K_d, self.failure_penalty) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("lambda1 and lambda2 cannot both be zero")


def combined_cost(result: JumpResult, weights: CombinedCostWeights = CombinedCostWeights()) -> float:
    distance = result.distance_x if result.completed else 0.0
    cost = weights.lambda1 * (-weights.K_d * abs(distance)) + weights.lambda2 * result.energy
    if not result.completed:
        cost += weights.failure_penalty
    return cost


@dataclass(frozen=True)
class Settings:
    link_mass: LinkMassModel = LinkMassModel()
    contact: ContactParams = ContactParams()
    base_chassis_mass: float = 1.0  # kg, frame + electronics without actuators
    weights: CombinedCostWeights = CombinedCostWeights()
    dt: float = DT
    t_max: float = T_MAX


class ActuatorTable:
    """Per-motor actuator maps indexed by grid position."""

    def __init__(self, motors: Sequence[MotorSpec], maps: Mapping[int, Sequence[ActuatorMapEntry]]):
        self.motors = {m.id: m for m in motors}
        self._index: dict[int, dict[int, ActuatorMapEntry]] = {}
        self._keys: dict[int, np.ndarray] = {}
        for mid in self.motors:
            by_key = {_grid_key(e.requested_ratio): e for e in maps.get(mid, ())}
            self._index[mid] = by_key
            self._keys[mid] = np.array(sorted(by_key), dtype=int)

    def snap(self, motor_id: int, ratio: float) -> float:
        """Nearest grid ratio with a feasible entry for the motor; ties go to the lower ratio."""
        keys = self._keys.get(motor_id)
        if keys is None or len(keys) == 0:
            raise NoActuatorError(f"motor {motor_id} has no feasible actuator")
        target = (ratio - RATIO_GRID_MIN) / RATIO_GRID_STEP
        k = keys[int(np.argmin(np.abs(keys - target)))]
        return _grid_ratio(int(k))

    def entry(self, motor_id: int, ratio: float) -> ActuatorMapEntry:
        try:
            return self._index[motor_id][_grid_key(ratio)]
        except KeyError:
            raise NoActuatorError(f"no actuator-map entry for motor {motor_id} at {ratio}:1") from None

    def actuator(self, motor_id: int, ratio: float) -> ActuatorSpec:
        ev = self.entry(motor_id, ratio).best
        return ActuatorSpec(self.motors[motor_id], ev.design, ev.gear_ratio, ev.efficiency, ev.gearbox_mass)


def _grid_key(ratio: float) -> int:
    return int(round((ratio - RATIO_GRID_MIN) / RATIO_GRID_STEP))


def _grid_ratio(key: int) -> float:
    return round(RATIO_GRID_MIN + key * RATIO_GRID_STEP, 1)


def encode(v: CodesignVariables) -> np.ndarray:
    """Unit-box coordinates of a variable set.

    Each coordinate is nudged by a few ulps where needed so that decoding
    reproduces the value bit for bit; warm starts then re-evaluate to exactly
    the cost they were found at.
    """
    span = UPPER - LOWER
    target = v.as_vector()
    u = np.clip((target - LOWER) / span, 0.0, 1.0)
    for i in range(len(u)):
        for _ in range(8):
            got = LOWER[i] + u[i] * span[i]
            if got == target[i]:
                break
            u[i] = np.nextafter(u[i], np.inf if got < target[i] else -np.inf)
        else:
            # unreachable value (a clamped z0): land just above so decode clamps back onto it
            while LOWER[i] + u[i] * span[i] < target[i] and u[i] < 1.0:
                u[i] = np.nextafter(u[i], np.inf)
    return u


def decode(y: Sequence[float], case: CaseSpec, table: ActuatorTable) -> CodesignVariables:
    """Map a full 13-entry unit-box vector to physical variables for ``case``.

    Frozen entries of ``y`` are ignored.  Motors round half up; ratios snap to
    the nearest feasible grid point of the chosen motor's map.
    """
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    if y.shape != (len(VARIABLES),):
        raise ValueError(f"expected {len(VARIABLES)} entries, got shape {y.shape}")
    raw = LOWER + y * (UPPER - LOWER)
    vals = {n: float(x) for n, x in zip(VARIABLES, raw)}
    for n in VARIABLES:
        if n not in case.free:
            vals[n] = float(getattr(case.fixed, n))
    for side in ("l", "r"):
        m = f"M_{side}"
        if m in case.free:
            vals[m] = int(min(6, max(1, math.floor(vals[m] + 0.5))))
        vals[m] = int(vals[m])
        g = f"g_{side}"
        vals[g] = table.snap(vals[m], vals[g])
    vals["z0"] = min(vals["z0"], vals["l1"] + vals["l2"])
    return CodesignVariables(**vals)


def build_design(v: CodesignVariables, table: ActuatorTable, settings: Settings = Settings()) -> RobotDesign:
    upper = link_mass(settings.link_mass, v.l1)
    lower = link_mass(settings.link_mass, v.l2)
    return RobotDesign(
        geom=v.geometry,
        act_l=table.actuator(v.M_l, v.g_l),
        act_r=table.actuator(v.M_r, v.g_r),
        base_chassis_mass=settings.base_chassis_mass,
        link_masses=(upper, upper, lower, lower),
        z0=v.z0,
    )


@dataclass
class Evaluation:
    variables: CodesignVariables
    result: JumpResult | None
    cost: float
    design: RobotDesign | None = None
    error: str = ""


def evaluate(v: CodesignVariables, table: ActuatorTable, settings: Settings = Settings(),
             record: bool = False) -> Evaluation:
    try:
        design = build_design(v, table, settings)
    except (NoActuatorError, ValueError) as exc:
        return Evaluation(v, None, DECODE_PENALTY, None, str(exc))
    result = rollout(design, v.control, dt=settings.dt, t_max=settings.t_max,
                     contact=settings.contact, record=record)
    return Evaluation(v, result, combined_cost(result, settings.weights), design)


@dataclass
class CaseRun:
    case: CaseSpec
    seed: int
    best: Evaluation
    y: np.ndarray  # full unit-box vector of the best design
    history: list[cmaes.Generation] = field(default_factory=list)
    evaluations: int = 0
    start: str = "nominal"  # where the search mean started

    @property
    def cost(self) -> float:
        return self.best.cost


def run_case(case: CaseSpec, table: ActuatorTable, settings: Settings = Settings(), *,
             seed: int = 0, generations: int = 150, population: int | None = None,
             sigma: float = 0.3, initial: CaseRun | None = None) -> CaseRun:
    """Optimise the free variables of ``case`` with CMA-ES.

    The search mean starts at the nominal design, or at the best point of
    ``initial`` (a run of a case whose free set is contained in this one).
    """
    mask = case.free_mask
    if initial is None:
        base = encode(NOMINAL)
    else:
        if not initial.case.free <= case.free:
            raise ValueError(f"cannot warm-start case {case.name} from case {initial.case.name}")
        base = np.array(initial.y, dtype=float)
    n = int(mask.sum())

    def expand(u):
        full = base.copy()
        full[mask] = u
        return full

    def cost_fn(u):
        try:
            v = decode(expand(u), case, table)
        except NoActuatorError:
            return DECODE_PENALTY
        return evaluate(v, table, settings).cost

    config = cmaes.CmaConfig(dimension=n, lower=(0.0,) * n, upper=(1.0,) * n,
                             initial_mean=tuple(base[mask]), initial_sigma=sigma,
                             population=population, max_generations=generations, seed=seed)
    res = cmaes.optimize(config, cost_fn)
    y = expand(res.best_vector)
    best = evaluate(decode(y, case, table), table, settings, record=True)
    if best.cost != res.best_cost:
        raise RuntimeError(f"best design re-evaluated to {best.cost!r}, optimizer saw {res.best_cost!r}")
    start = "nominal" if initial is None else f"{initial.case.name} seed {initial.seed}"
    return CaseRun(case, seed, best, y, res.history, res.evaluations, start)


# parent cases each case is warm-started from, in run order
NESTING = {"nominal": (), "a": ("nominal",), "b": ("nominal",), "c": ("a", "b")}


def run_nested(names: Sequence[str], table: ActuatorTable, settings: Settings = Settings(), *,
               seeds: Sequence[int] = (0, 1, 2), generations: int = 150,
               population: int | None = None, sigma: float = 0.3) -> dict[str, list[CaseRun]]:
    """Run the requested cases, plus the parents they need, one seed at a time.

    Each case starts from the lowest-cost parent run of the same seed (first
    listed parent on ties), so a larger case never starts from a worse point
    than a case it contains.
    """
    wanted: list[str] = []

    def need(n):
        for parent in NESTING[n]:
            need(parent)
        if n not in wanted:
            wanted.append(n)

    for n in names:
        if n.lower() not in NESTING:
            raise ValueError(f"unknown case {n!r}; expected one of {', '.join(NESTING)}")
        need(n.lower())
    order = [n for n in NESTING if n in wanted]
    runs: dict[str, list[CaseRun]] = {n: [] for n in order}
    for seed in seeds:
        done: dict[str, CaseRun] = {}
        for n in order:
            parents = [done[p] for p in NESTING[n]]
            start = min(parents, key=lambda r: r.cost) if parents else None
            done[n] = run_case(CASES[n], table, settings, seed=seed, generations=generations,
                               population=population, sigma=sigma, initial=start)
            runs[n].append(done[n])
    return runs


# ---------------------------------------------------------------- reports

def actuator_detail(act: ActuatorSpec) -> dict:
    return {
        "motor_id": act.motor.id,
        "motor": act.motor.name,
        "type": act.gearbox.type.value,
        "X": act.gearbox.as_vector(),
        "gear_ratio": act.gear_ratio,
        "efficiency": act.efficiency,
        "mass_kg": act.total_mass,
        "peak_output_torque_nm": act.peak_output_torque,
    }


def table_row(ev: Evaluation) -> dict:
    """Summary row: design and control parameters, distance X and energy E."""
    row = asdict(ev.variables)
    r = ev.result
    row["X"] = r.distance_x if r is not None else 0.0
    row["E"] = r.energy if r is not None else 0.0
    return row


def run_record(run: CaseRun) -> dict:
    ev = run.best
    rec = {
        "case": run.case.name,
        "seed": run.seed,
        "cost": ev.cost,
        "status": ev.result.status if ev.result is not None else "invalid",
        "row": table_row(ev),
        "evaluations": run.evaluations,
        "start": run.start,
        "y": [float(x) for x in run.y],
        "history": [{"generation": g.index, "best": g.best, "mean": g.mean, "sigma": g.sigma}
                    for g in run.history],
    }
    if ev.result is not None:
        rec["liftoff_time"] = ev.result.liftoff_time
        rec["touchdown_time"] = ev.result.touchdown_time
    if ev.design is not None:
        rec["actuators"] = {"left": actuator_detail(ev.design.act_l), "right": actuator_detail(ev.design.act_r)}
        rec["total_mass_kg"] = ev.design.total_mass
    return rec


def case_report(runs: Sequence[CaseRun]) -> dict:
    if not runs:
        raise ValueError("no runs to report")
    best = min(runs, key=lambda r: (r.cost, r.seed))
    return {"case": runs[0].case.name, "runs": [run_record(r) for r in runs], "best": run_record(best)}


ROW_COLUMNS = ("l1", "l2", "l3", "z0", "M_l", "M_r", "g_l", "g_r", "K", "C", "T", "l0", "alpha0", "X", "E")


def format_row(name: str, row: Mapping) -> str:
    cells = []
    for c in ROW_COLUMNS:
        v = row[c]
        cells.append(str(v) if isinstance(v, int) else f"{v:.3f}")
    return f"{name:<8} " + " ".join(f"{c:>7}" for c in cells)


def settings_from_dict(data: Mapping) -> Settings:
    known = {f.name for f in fields(Settings)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown stage-2 settings: {', '.join(sorted(unknown))}")
    s = Settings()
    kw = {}
    if "link_mass" in data:
        kw["link_mass"] = LinkMassModel.from_dict(data["link_mass"])
    if "contact" in data:
        kw["contact"] = ContactParams.from_dict(data["contact"])
    if "weights" in data:
        kw["weights"] = CombinedCostWeights(**{k: float(v) for k, v in data["weights"].items()})
    for k in ("base_chassis_mass", "dt", "t_max"):
        if k in data:
            kw[k] = float(data[k])
    return replace(s, **kw)
