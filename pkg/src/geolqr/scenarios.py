"""Scenario execution: resolve gains, run the closed loop or the
boundary-value solver, write the trajectory CSV, and build the run summary.

Trajectory CSV column contract, in order:

    t, r11,r12,r13,r21,r22,r23,r31,r32,r33, wx,wy,wz,
    tau_x,tau_y,tau_z, dist, lyap, value, hamiltonian

Numbers are printed with 17 significant digits; fields a command does not
define stay empty. The avoid command additionally writes an
avoidance_path.csv with dimension-appropriate columns, since the contract
has no slots for a flat configuration.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import pmp, regulators, riccati, so3
from .config import ScenarioConfig
from .dynamics import InertiaTensor, RigidBodyState, SimParams, simulate
from .errors import AngleNearPi

CSV_HEADER = ("t,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz,"
              "tau_x,tau_y,tau_z,dist,lyap,value,hamiltonian")

# Scenarios refuse initial attitudes this close to the cut locus instead of
# attempting control across it.
INITIAL_DISTANCE_GUARD = math.pi - 0.1

_FLUSH_EVERY = 1000


@dataclass
class RunSummary:
    """What a command resolved and how the run ended."""

    command: str
    gains: dict | None
    final_distance: float | None
    final_velocity_norm: float | None
    min_obstacle_clearance: float | None
    iterations: dict
    wall_clock_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        return cls(**json.loads(text))


def _fmt(x) -> str:
    return "" if x is None else f"{x:.17g}"


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        pending = 0
        for row in rows:
            f.write(row + "\n")
            pending += 1
            if pending >= _FLUSH_EVERY:
                f.flush()
                pending = 0


def _decimated(n_samples: int, decimation: int):
    idx = list(range(0, n_samples, decimation))
    if idx[-1] != n_samples - 1:
        idx.append(n_samples - 1)
    return idx


def write_trajectory_csv(path: Path, times, rotations, omegas, torques,
                         diagnostics: dict, decimation: int) -> None:
    """Emit the 20-column trajectory contract; None channels stay empty."""
    dist = diagnostics.get("dist")
    lyap = diagnostics.get("lyap")
    value = diagnostics.get("value")
    ham = diagnostics.get("hamiltonian")

    def rows():
        yield CSV_HEADER
        for i in _decimated(len(times), decimation):
            cells = [_fmt(times[i])]
            if rotations is None:
                cells += [""] * 9
            else:
                cells += [_fmt(x) for x in rotations[i].reshape(9)]
            for block in (omegas, torques):
                if block is None:
                    cells += [""] * 3
                else:
                    row = block[i]
                    cells += [_fmt(row[j]) if j < len(row) else "" for j in range(3)]
            for channel in (dist, lyap, value, ham):
                cells.append(_fmt(channel[i]) if channel is not None else "")
            yield ",".join(cells)

    _write_rows(path, rows())


def _resolve_gain_setup(cfg: ScenarioConfig):
    """ARE or DRE gains for the configured drift-matrix bookkeeping."""
    a = riccati.drift_matrix(cfg.controller.a_matrix_mode, cfg.cost.gamma)
    b = np.array([[0.0], [1.0]])
    params = riccati.CostParams(alpha=cfg.cost.alpha, gamma=cfg.cost.gamma,
                                q_weights=cfg.cost.q_weights)
    if cfg.controller.gain_source == "are":
        sol = riccati.are_solve(a, b, cfg.cost.q_weights, cfg.cost.alpha)
        gains = riccati.gains_from_K(sol, params)
        controller_cfg = regulators.ControllerConfig(
            gains, cfg.controller.feedforward_accel_term)
        summary = {"source": "are", "kP": gains.kP, "kD": gains.kD}
        return controller_cfg, sol, summary
    schedule = riccati.dre_integrate(a, b, cfg.cost.q_weights, cfg.cost.alpha,
                                     t_end=cfg.sim.t_end, h=cfg.sim.h)
    controller_cfg = regulators.ControllerConfig(
        schedule, cfg.controller.feedforward_accel_term)
    g0 = schedule.gains_at(0.0)
    summary = {"source": "dre", "kP": g0.kP, "kD": g0.kD}
    return controller_cfg, schedule.solution_at(0.0), summary


def run_gains(cfg: ScenarioConfig, out_dir: Path) -> RunSummary:
    start = time.perf_counter()
    _, _, gains = _resolve_gain_setup(cfg)
    return RunSummary(
        command="gains", gains=gains, final_distance=None,
        final_velocity_norm=None, min_obstacle_clearance=None,
        iterations={}, wall_clock_seconds=time.perf_counter() - start)


def run_regulate(cfg: ScenarioConfig, out_dir: Path) -> RunSummary:
    start = time.perf_counter()
    goal = regulators.RegulationGoal(cfg.goal.rotation)
    d0 = so3.geodesic_distance(goal.r_d, cfg.initial.rotation)
    if d0 >= INITIAL_DISTANCE_GUARD:
        raise AngleNearPi(
            f"initial attitude {d0:.4f} rad from the goal exceeds the guard "
            f"{INITIAL_DISTANCE_GUARD:.4f}")
    controller_cfg, sol, gain_summary = _resolve_gain_setup(cfg)
    inertia = InertiaTensor(cfg.inertia)

    def controller(t, s):
        return regulators.regulation_torque(s, goal, controller_cfg.gains_at(t))

    def diagnostics(t, s, tau):
        g = controller_cfg.gains_at(t)
        e = so3.log_so3(goal.r_d.T @ s.r)
        d2 = float(e @ e)
        w2 = float(s.w @ s.w)
        k = sol if not isinstance(controller_cfg.gains, riccati.GainSchedule) \
            else controller_cfg.gains.solution_at(t)
        return {
            "dist": math.sqrt(d2),
            "lyap": g.kP * 0.5 * d2 + 0.5 * w2,
            "value": k.k1 * 0.5 * d2 + 0.5 * k.k2 * w2 + k.k3 * float(e @ s.w),
        }

    log = simulate(controller, RigidBodyState(cfg.initial.rotation, cfg.initial.omega),
                   SimParams(cfg.sim.h, cfg.sim.t_end, inertia), diagnostics)
    write_trajectory_csv(out_dir / "trajectory.csv", log.times, log.rotations,
                         log.omegas, log.torques, log.diagnostics,
                         cfg.output.decimation)
    return RunSummary(
        command="regulate", gains=gain_summary,
        final_distance=float(log.diagnostics["dist"][-1]),
        final_velocity_norm=float(np.linalg.norm(log.omegas[-1])),
        min_obstacle_clearance=None, iterations={},
        wall_clock_seconds=time.perf_counter() - start)


def run_track(cfg: ScenarioConfig, out_dir: Path) -> RunSummary:
    start = time.perf_counter()
    controller_cfg, _, gain_summary = _resolve_gain_setup(cfg)
    inertia = InertiaTensor(cfg.inertia)
    ref = regulators.TrackingReference(cfg.reference.omega, cfg.reference.omega_dot,
                                       t_end=cfg.sim.t_end, h=cfg.sim.h,
                                       r0=cfg.reference.r0)
    d0 = so3.geodesic_distance(ref.rotations[0], cfg.initial.rotation)
    if d0 >= INITIAL_DISTANCE_GUARD:
        raise AngleNearPi(
            f"initial attitude {d0:.4f} rad from the reference exceeds the guard "
            f"{INITIAL_DISTANCE_GUARD:.4f}")

    def controller(t, s):
        sample = ref.sample(t)
        return (regulators.tracking_pd_torque(s, sample, controller_cfg.gains_at(t))
                + regulators.feedforward_torque(
                    s, sample, inertia, controller_cfg.feedforward_accel_term))

    def diagnostics(t, s, tau):
        sample = ref.sample(t)
        return {"dist": so3.geodesic_distance(sample.r, s.r)}

    log = simulate(controller, RigidBodyState(cfg.initial.rotation, cfg.initial.omega),
                   SimParams(cfg.sim.h, cfg.sim.t_end, inertia), diagnostics)
    write_trajectory_csv(out_dir / "trajectory.csv", log.times, log.rotations,
                         log.omegas, log.torques, log.diagnostics,
                         cfg.output.decimation)
    return RunSummary(
        command="track", gains=gain_summary,
        final_distance=float(log.diagnostics["dist"][-1]),
        final_velocity_norm=float(np.linalg.norm(log.omegas[-1])),
        min_obstacle_clearance=None, iterations={},
        wall_clock_seconds=time.perf_counter() - start)


def run_avoid(cfg: ScenarioConfig, out_dir: Path) -> RunSummary:
    start = time.perf_counter()
    spec = cfg.avoidance
    scenario = pmp.AvoidanceScenario(
        dimension=spec.dimension, alpha=cfg.cost.alpha, target=spec.target,
        horizon=spec.horizon, q0=spec.q0, v0=spec.v0,
        obstacles=tuple(pmp.SphereObstacle(o.center, o.radius)
                        for o in spec.obstacles),
    )
    solution = pmp.shooting_solve(scenario, h=cfg.sim.h)
    lagrangian = pmp.AvoidanceLagrangian(scenario)
    n = spec.dimension
    costates = pmp.costate_integrate(solution.times, solution.q, solution.v,
                                     solution.u, lagrangian,
                                     (np.zeros(n), np.zeros(n)))
    dist = np.linalg.norm(solution.q - scenario.target, axis=1)
    clearance = None
    if scenario.obstacles:
        clearance = float(min(
            min(obs.value(qq) for qq in solution.q) for obs in scenario.obstacles))

    write_trajectory_csv(out_dir / "trajectory.csv", solution.times, None,
                         solution.v, solution.u,
                         {"dist": dist, "hamiltonian": costates.hamiltonian},
                         cfg.output.decimation)

    def path_rows():
        names = [f"q{i+1}" for i in range(n)] + [f"v{i+1}" for i in range(n)] \
            + [f"u{i+1}" for i in range(n)]
        yield "t," + ",".join(names)
        for i in _decimated(len(solution.times), cfg.output.decimation):
            cells = [_fmt(solution.times[i])]
            cells += [_fmt(x) for x in solution.q[i]]
            cells += [_fmt(x) for x in solution.v[i]]
            cells += [_fmt(x) for x in solution.u[i]]
            yield ",".join(cells)

    _write_rows(out_dir / "avoidance_path.csv", path_rows())
    return RunSummary(
        command="avoid", gains=None,
        final_distance=float(dist[-1]),
        final_velocity_norm=float(np.linalg.norm(solution.v[-1])),
        min_obstacle_clearance=clearance,
        iterations={"newton": solution.iterations},
        wall_clock_seconds=time.perf_counter() - start)


def run_check(cfg: ScenarioConfig, out_dir: Path):
    """Built-in invariant suite. Returns (summary, ok, lines)."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    lines = []
    failures = 0

    def check(name, ok, detail=""):
        nonlocal failures
        if ok:
            lines.append(f"ok   {name}")
        else:
            failures += 1
            lines.append(f"FAIL {name}: {detail}")

    # Group math round trips.
    vs = rng.standard_normal((10000, 3))
    vs *= (rng.uniform(0.0, math.pi - 1e-3, 10000) /
           np.linalg.norm(vs, axis=1))[:, None]
    worst = max(np.linalg.norm(so3.log_so3(so3.exp_so3(v)) - v) for v in vs[:10000])
    check("exp-log roundtrip (1e4 draws, 1e-9)", worst <= 1e-9, f"worst {worst:.2e}")

    worst = max(so3.orthogonality_defect(so3.exp_so3(v * 10.0)) for v in vs[:500])
    check("exponential orthogonality (1e-12)", worst <= 1e-12, f"worst {worst:.2e}")

    worst = 0.0
    for v in vs[:500]:
        r = so3.exp_so3(v)
        phi = math.acos(max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0)))
        worst = max(worst, abs(phi - np.linalg.norm(v)))
    check("angle identity (1e-9)", worst <= 1e-9, f"worst {worst:.2e}")

    worst = max(np.linalg.norm(so3.vee(so3.hat(v)) - v) for v in vs[:200])
    check("vee(hat(v)) = v (exact)", worst == 0.0, f"worst {worst:.2e}")

    # Distance gradient against central differences.
    r_d = so3.exp_so3(vs[0])
    r = so3.exp_so3(vs[1])
    w = vs[2] / np.linalg.norm(vs[2])
    step = 1e-5
    dp = so3.geodesic_distance(r_d, r @ so3.exp_so3(step * w)) ** 2 / 2.0
    dm = so3.geodesic_distance(r_d, r @ so3.exp_so3(-step * w)) ** 2 / 2.0
    fd = (dp - dm) / (2.0 * step)
    inner = float(so3.log_so3(r_d.T @ r) @ w)
    check("distance gradient (1e-6)", abs(fd - inner) <= 1e-6, f"err {abs(fd - inner):.2e}")

    # Published gain tables.
    b = np.array([[0.0], [1.0]])
    q2 = np.eye(2)
    sol_r = riccati.are_solve(riccati.drift_matrix("published-regulation"), b, q2, 0.5)
    g_r = riccati.gains_from_K(sol_r, riccati.CostParams(alpha=0.5))
    ok_r = abs(g_r.kP - 1.4142) <= 1e-3 and abs(g_r.kD - 2.7671) <= 1e-3
    check("regulation gain table (1e-3)", ok_r, f"got ({g_r.kP:.5f}, {g_r.kD:.5f})")
    sol_t = riccati.are_solve(riccati.drift_matrix("published-tracking", -2.0), b, q2, 1.0)
    g_t = riccati.gains_from_K(sol_t, riccati.CostParams(alpha=1.0))
    ok_t = abs(g_t.kP - 8.7852) <= 1e-3 and abs(g_t.kD - 8.3357) <= 1e-3
    check("tracking gain table (1e-3)", ok_t, f"got ({g_t.kP:.5f}, {g_t.kD:.5f})")

    worst = 0.0
    for _ in range(10):
        gam = rng.uniform(-2.0, 2.0)
        al = rng.uniform(0.1, 10.0)
        sol = riccati.are_solve(riccati.drift_matrix("reconciled", gam), b, q2, al)
        res = riccati.scalar_residual(sol, riccati.CostParams(alpha=al, gamma=gam))
        worst = max(worst, float(np.abs(res).max()))
    check("scalar-matrix consistency (1e-9)", worst <= 1e-9, f"worst {worst:.2e}")

    sched = riccati.dre_integrate(riccati.drift_matrix("published-tracking", -2.0),
                                  b, q2, 1.0, t_end=10.0, h=1e-3)
    terminal_zero = (sched.k1[-1] == 0.0 and sched.k2[-1] == 0.0 and sched.k3[-1] == 0.0)
    k0 = sched.solution_at(0.0)
    dre_err = max(abs(k0.k1 - sol_t.k1), abs(k0.k2 - sol_t.k2), abs(k0.k3 - sol_t.k3))
    check("backward Riccati sweep (terminal 0, fixed point 1e-4)",
          terminal_zero and dre_err <= 1e-4, f"err {dre_err:.2e}")

    # Integrator group preservation and first-order drift.
    from .dynamics import lie_euler_step

    inertia = InertiaTensor.diagonal([1.0, 2.0, 3.0])
    state = RigidBodyState(np.eye(3), np.array([0.3, 1.1, -0.2]))
    worst = 0.0
    for i in range(10000):
        state = lie_euler_step(state, np.zeros(3), 1e-3, inertia)
        if i % 100 == 0:
            worst = max(worst, so3.orthogonality_defect(state.r))
    worst = max(worst, so3.orthogonality_defect(state.r))
    check("group preservation over 1e4 steps (1e-10)", worst <= 1e-10,
          f"worst {worst:.2e}")

    def energy_drift(h):
        s = RigidBodyState(np.eye(3), np.array([0.3, 1.1, -0.2]))
        e0 = 0.5 * float(s.w @ (inertia.j @ s.w))
        worst_d = 0.0
        for _ in range(int(round(5.0 / h))):
            s = lie_euler_step(s, np.zeros(3), h, inertia)
            e = 0.5 * float(s.w @ (inertia.j @ s.w))
            worst_d = max(worst_d, abs(e - e0) / e0)
        return worst_d

    d1, d2 = energy_drift(1e-3), energy_drift(5e-4)
    ratio = d2 / d1
    check("free-body energy drift halves with h (factor 1.5)",
          1.0 / 3.0 <= ratio <= 0.75, f"ratio {ratio:.3f}")

    # Feedback laws vanish where they should.
    goal = regulators.RegulationGoal(so3.exp_so3(vs[3]))
    at_goal = RigidBodyState(goal.r_d.copy(), np.zeros(3))
    tau = regulators.regulation_torque(at_goal, goal, riccati.GainPair(2.0, 3.0))
    check("regulation torque zero at goal (exact)", float(np.abs(tau).max()) == 0.0,
          f"{tau}")

    worst = 0.0
    for _ in range(100):
        r1 = so3.exp_so3(rng.standard_normal(3))
        r2 = so3.exp_so3(rng.standard_normal(3))
        wv = rng.standard_normal(3)
        worst = max(worst, abs(np.linalg.norm(so3.transport_velocity(r1, r2, wv))
                               - np.linalg.norm(wv)))
    check("velocity transport isometry (1e-12)", worst <= 1e-12, f"worst {worst:.2e}")

    summary = RunSummary(
        command="check", gains=None, final_distance=None,
        final_velocity_norm=None, min_obstacle_clearance=None,
        iterations={"checks": len(lines), "failures": failures},
        wall_clock_seconds=time.perf_counter() - start)
    return summary, failures == 0, lines


def run(cfg: ScenarioConfig, out_dir: str | None = None):
    """Dispatch a validated config. Returns (RunSummary, ok, lines)."""
    directory = Path(out_dir if out_dir is not None else cfg.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    if cfg.command == "gains":
        return run_gains(cfg, directory), True, []
    if cfg.command == "regulate":
        return run_regulate(cfg, directory), True, []
    if cfg.command == "track":
        return run_track(cfg, directory), True, []
    if cfg.command == "avoid":
        return run_avoid(cfg, directory), True, []
    return run_check(cfg, directory)
