"""Quasi-static peg-in-hole simulator driven by the staged EDA strategy.

The peg is a rigid prism whose tip pose has six decoupled coordinates
``[x, y, z, C, B, A]`` in the (true) hole frame: origin at the hole axis on
the top surface, z pointing out of the workpiece. The hole is a through-hole
of the peg's cross-section enlarged by the clearance, with a 45 degree
chamfer at the mouth and a sinusoidal ripple on its walls.

Contact is a penalty model evaluated on two peg cross-sections: the tip face
and the section crossing the rim of the hole (bottom of the chamfer). Each
section contributes one force per touched surface (a hole wall, or the top
face), applied at the penetration-weighted centroid of its penetrating
points, with half weight so that a face pressed uniformly into a wall yields
``contact_stiffness * penetration`` in total.

The inner loop is compiled with numba; all arithmetic is plain IEEE so a
trial is bit-reproducible regardless of how trials are batched.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np

from .eda import DEFAULT_INERTIA, ImpedanceParams, Pose, Wrench

SHAPES = ("triangle", "square", "hexagon", "cylinder")
_SIDES = {"triangle": 3, "square": 4, "hexagon": 6, "cylinder": 0}
DEFAULT_CLEARANCE = {"triangle": 0.20, "square": 0.14, "hexagon": 0.18, "cylinder": 0.20}

SECTION_WEIGHT = 0.5
_MAX_POINTS = 8


class SimulationDiverged(RuntimeError):
    pass


class Termination(str, enum.Enum):
    INSERTED = "inserted"
    TIMEOUT = "timeout"
    FORCE_LIMIT = "force_limit"
    NO_APPROACH = "no_approach"
    DIVERGED = "diverged"


_CODES = [Termination.INSERTED, Termination.TIMEOUT, Termination.FORCE_LIMIT,
          Termination.NO_APPROACH, Termination.DIVERGED]
_DIVERGED = 4
_NO_TRACE = np.zeros((0, 14))


@dataclass(frozen=True)
class PegSpec:
    """Peg/hole geometry. Lengths in mm; ``clearance`` is diametral."""

    shape: str = "square"
    clearance: float | None = None
    across_size: float = 30.0
    hole_depth: float = 20.0

    def __post_init__(self):
        if self.shape not in _SIDES:
            raise ValueError(f"unknown peg shape {self.shape!r}; expected one of {SHAPES}")
        if self.clearance is None:
            object.__setattr__(self, "clearance", DEFAULT_CLEARANCE[self.shape])
        if not self.clearance > 0:
            raise ValueError("clearance must be positive")
        if not self.across_size > 0 or not self.hole_depth > 0:
            raise ValueError("peg dimensions must be positive")

    @property
    def n_sides(self) -> int:
        return _SIDES[self.shape]


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings. Lengths in mm, angles in rad, times in s."""

    dt: float = 1e-3
    timeout: float = 22.0
    force_threshold: float = 15.0
    force_filter: float = 0.05  # s, low-pass time constant of the sensed force
    insertion_target: float = 20.0
    contact_stiffness: float = 1e5
    contact_damping: float = 400.0
    friction_mu: float = 0.3
    friction_velocity: float = 1e-3  # m/s, Coulomb regularisation
    ripple_amplitude: float = 0.02
    ripple_period: float = 0.5
    chamfer: float = 1.5
    peg_length: float = 60.0
    # workpiece placement error, drawn per trial: lateral (mm) and yaw (rad)
    misalign_position: float = 1.0
    misalign_angle: float = math.radians(0.2)
    # kinematic primitives of the strategy (fixed across trials)
    incline: float = 0.1
    approach_offset: float = 1.0
    approach_shift: float = 2.0
    approach_lift: float = 0.5
    approach_dip: float = 2.0
    approach_time: float = 3.0
    rotate_time: float = 2.5
    descent_distance: float = 30.0
    descent_time: float = 10.0
    oscillation_amplitude: float = 0.006
    oscillation_frequency: float = 4.5
    inertia: tuple = DEFAULT_INERTIA
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inertia", tuple(float(m) for m in self.inertia))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.timeout >= 0:
            raise ValueError("timeout must be non-negative")
        if not self.force_threshold >= 0:
            raise ValueError("force_threshold must be non-negative")
        if not self.force_filter >= 0:
            raise ValueError("force_filter must be non-negative")
        if not self.ripple_period > 0:
            raise ValueError("ripple_period must be positive")
        if len(self.inertia) != 6 or not all(m > 0 for m in self.inertia):
            raise ValueError("inertia must be six positive values")
        for name in ("approach_time", "rotate_time", "descent_time", "oscillation_frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    depth_reached: float  # mm, tip depth below the top surface
    max_wrench: Wrench
    sim_time: float
    termination: Termination

    def __post_init__(self):
        object.__setattr__(self, "termination", Termination(self.termination))


@dataclass
class SimState:
    q: np.ndarray = field(default_factory=lambda: np.zeros(6))
    v: np.ndarray = field(default_factory=lambda: np.zeros(6))
    t: float = 0.0


# -- geometry packing -------------------------------------------------------

def _geometry(peg: PegSpec, config: SimConfig) -> np.ndarray:
    n = peg.n_sides
    a_p = peg.across_size / 2.0
    r_p = a_p if n == 0 else a_p / math.cos(math.pi / n)
    mm = 1e-3
    return np.array([
        float(n),
        a_p * mm,
        r_p * mm,
        (a_p + peg.clearance / 2.0) * mm,
        config.chamfer * mm,
        peg.hole_depth * mm,
        config.peg_length * mm,
        config.ripple_amplitude * mm,
        config.ripple_period * mm,
    ])


def _tables(n_sides: int, r_p: float):
    """Hole wall normals and peg tip vertices (body frame); one wall faces -x."""
    if n_sides == 0:
        return np.zeros((1, 2)), np.zeros((1, 2))
    phi = 2.0 * np.pi * np.arange(n_sides) / n_sides + (np.pi / n_sides if n_sides % 2 else 0.0)
    normals = np.column_stack([np.cos(phi), np.sin(phi)])
    theta = np.pi / n_sides + phi
    verts = r_p * np.column_stack([np.cos(theta), np.sin(theta)])
    return normals, verts


def _contact_params(config: SimConfig) -> np.ndarray:
    return np.array([config.contact_stiffness, config.contact_damping,
                     config.friction_mu, config.friction_velocity])


# -- compiled kernels ---------------------------------------------------------

@numba.njit(cache=True)
def _rotation(C, B, A):
    cC, sC = math.cos(C), math.sin(C)
    cB, sB = math.cos(B), math.sin(B)
    cA, sA = math.cos(A), math.sin(A)
    R = np.empty((3, 3))
    R[0, 0] = cA * cB
    R[0, 1] = cA * sB * sC - sA * cC
    R[0, 2] = cA * sB * cC + sA * sC
    R[1, 0] = sA * cB
    R[1, 1] = sA * sB * sC + cA * cC
    R[1, 2] = sA * sB * cC - cA * sC
    R[2, 0] = -sB
    R[2, 1] = cB * sC
    R[2, 2] = cB * cC
    return R


@numba.njit(cache=True)
def _surface(px, py, pz, geom, normals):
    """Nearest workpiece surface of a point inside the solid.

    Returns (penetration, surface id, normal x, y, z); penetration <= 0 when
    the point is in free space. The normal points out of the solid.
    """
    n = int(geom[0])
    if pz >= 0.0 or pz <= -geom[5]:
        return 0.0, -1, 0.0, 0.0, 0.0
    if n == 0:
        rho = math.sqrt(px * px + py * py)
        if rho > 0.0:
            ex = px / rho
            ey = py / rho
        else:
            ex = 1.0
            ey = 0.0
        wall = 0
        top = 1
    else:
        rho = -1e300
        wall = 0
        for j in range(n):
            d = normals[j, 0] * px + normals[j, 1] * py
            if d > rho:
                rho = d
                wall = j
        ex = normals[wall, 0]
        ey = normals[wall, 1]
        top = n
    wc = geom[4]
    if pz > -wc:
        h = geom[3] + (pz + wc)
        dh = 1.0
    else:
        u = -wc - pz
        k = 2.0 * math.pi / geom[8]
        h = geom[3] - geom[7] * (1.0 - math.cos(k * u)) * 0.5
        dh = geom[7] * k * math.sin(k * u) * 0.5
    phi = rho - h
    if phi <= 0.0:
        return 0.0, -1, 0.0, 0.0, 0.0
    g = math.sqrt(1.0 + dh * dh)
    d_wall = phi / g
    d_top = -pz
    if d_top < d_wall:
        return d_top, top, 0.0, 0.0, 1.0
    return d_wall, wall, -ex / g, -ey / g, dh / g


@numba.njit(cache=True)
def _section_points(q, R, geom, verts, rim, pts):
    """Fill ``pts`` with tip-relative points of one cross-section; return count."""
    n = int(geom[0])
    r_p = geom[2]
    count = 0
    if n > 0:
        for i in range(n):
            rx = R[0, 0] * verts[i, 0] + R[0, 1] * verts[i, 1]
            ry = R[1, 0] * verts[i, 0] + R[1, 1] * verts[i, 1]
            rz = R[2, 0] * verts[i, 0] + R[2, 1] * verts[i, 1]
            if rim:
                s = (-geom[4] - q[2] - rz) / R[2, 2]
                if s <= 0.0 or s >= geom[6]:
                    continue
                rx += s * R[0, 2]
                ry += s * R[1, 2]
                rz += s * R[2, 2]
            pts[count, 0] = rx
            pts[count, 1] = ry
            pts[count, 2] = rz
            count += 1
        return count
    # circular section: centre offset along the axis, then extreme points
    s = 0.0
    if rim:
        s = (-geom[4] - q[2]) / R[2, 2]
        if s <= 0.0 or s >= geom[6]:
            return 0
    cx = s * R[0, 2]
    cy = s * R[1, 2]
    cz = s * R[2, 2]
    hx = q[0] + cx
    hy = q[1] + cy
    hr = math.sqrt(hx * hx + hy * hy)
    if hr > 1e-12:
        dx = hx / hr
        dy = hy / hr
    else:
        dx = 1.0
        dy = 0.0
    # outermost point (against the wall)
    a = dx * R[0, 0] + dy * R[1, 0]
    b = dx * R[0, 1] + dy * R[1, 1]
    nrm = math.sqrt(a * a + b * b)
    if nrm > 1e-12:
        a /= nrm
        b /= nrm
        pts[count, 0] = cx + r_p * (a * R[0, 0] + b * R[0, 1])
        pts[count, 1] = cy + r_p * (a * R[1, 0] + b * R[1, 1])
        pts[count, 2] = cz + r_p * (a * R[2, 0] + b * R[2, 1])
        count += 1
    if not rim:
        # lowest point of a tilted face
        a = -R[2, 0]
        b = -R[2, 1]
        nrm = math.sqrt(a * a + b * b)
        if nrm > 1e-12:
            a /= nrm
            b /= nrm
            pts[count, 0] = cx + r_p * (a * R[0, 0] + b * R[0, 1])
            pts[count, 1] = cy + r_p * (a * R[1, 0] + b * R[1, 1])
            pts[count, 2] = cz + r_p * (a * R[2, 0] + b * R[2, 1])
            count += 1
    return count


@numba.njit(cache=True)
def _contact(q, v, geom, normals, verts, cparams, wrench, details):
    """Accumulate the contact wrench about the tip into ``wrench``.

    ``details`` (k x 10) receives per-contact rows
    ``[point xyz, normal xyz, f_n, f_t xyz]`` when it has room; returns the
    number of contacts.
    """
    k_c = cparams[0]
    c_c = cparams[1]
    mu = cparams[2]
    v_eps = cparams[3]
    R = _rotation(q[3], q[4], q[5])
    n = int(geom[0])
    n_surf = 2 if n == 0 else n + 1
    pts = np.empty((_MAX_POINTS, 3))
    best = np.empty(n_surf)
    wsum = np.empty(n_surf)
    acc = np.empty((n_surf, 3))
    nrm = np.empty((n_surf, 3))
    for i in range(6):
        wrench[i] = 0.0
    n_contacts = 0
    for section in range(2):
        count = _section_points(q, R, geom, verts, section == 1, pts)
        for s in range(n_surf):
            best[s] = 0.0
            wsum[s] = 0.0
            acc[s, 0] = 0.0
            acc[s, 1] = 0.0
            acc[s, 2] = 0.0
        for i in range(count):
            delta, sid, nx, ny, nz = _surface(q[0] + pts[i, 0], q[1] + pts[i, 1],
                                              q[2] + pts[i, 2], geom, normals)
            if delta <= 0.0:
                continue
            wsum[sid] += delta
            acc[sid, 0] += delta * pts[i, 0]
            acc[sid, 1] += delta * pts[i, 1]
            acc[sid, 2] += delta * pts[i, 2]
            if delta > best[sid]:
                best[sid] = delta
                nrm[sid, 0] = nx
                nrm[sid, 1] = ny
                nrm[sid, 2] = nz
        for s in range(n_surf):
            if best[s] <= 0.0:
                continue
            rx = acc[s, 0] / wsum[s]
            ry = acc[s, 1] / wsum[s]
            rz = acc[s, 2] / wsum[s]
            nx = nrm[s, 0]
            ny = nrm[s, 1]
            nz = nrm[s, 2]
            # point velocity: v + omega x r
            vx = v[0] + v[4] * rz - v[5] * ry
            vy = v[1] + v[5] * rx - v[3] * rz
            vz = v[2] + v[3] * ry - v[4] * rx
            vn = vx * nx + vy * ny + vz * nz
            fn = SECTION_WEIGHT * (k_c * best[s] - c_c * vn)
            if fn < 0.0:
                fn = 0.0
            tx = vx - vn * nx
            ty = vy - vn * ny
            tz = vz - vn * nz
            scale = -mu * fn / math.sqrt(tx * tx + ty * ty + tz * tz + v_eps * v_eps)
            fx = fn * nx + scale * tx
            fy = fn * ny + scale * ty
            fz = fn * nz + scale * tz
            wrench[0] += fx
            wrench[1] += fy
            wrench[2] += fz
            wrench[3] += ry * fz - rz * fy
            wrench[4] += rz * fx - rx * fz
            wrench[5] += rx * fy - ry * fx
            if n_contacts < details.shape[0]:
                row = details[n_contacts]
                row[0] = rx
                row[1] = ry
                row[2] = rz
                row[3] = nx
                row[4] = ny
                row[5] = nz
                row[6] = fn
                row[7] = scale * tx
                row[8] = scale * ty
                row[9] = scale * tz
            n_contacts += 1
    return n_contacts


@numba.njit(cache=True)
def _integrate(q, v, force, inertia, dt):
    """Semi-implicit Euler: velocity first, then position. False on blow-up."""
    ok = True
    for i in range(6):
        v[i] += dt * force[i] / inertia[i]
        q[i] += dt * v[i]
        if not (math.isfinite(q[i]) and math.isfinite(v[i])):
            ok = False
    return ok


@numba.njit(cache=True)
def _progress(tau):
    if tau <= 0.0:
        return 0.0
    if tau >= 1.0:
        return 1.0
    return 30.0 * (tau ** 3 / 3.0 - tau ** 4 / 2.0 + tau ** 5 / 5.0)


@numba.njit(cache=True)
def _speed(tau):
    if tau <= 0.0 or tau >= 1.0:
        return 0.0
    return 16.0 * tau * tau * (1.0 - tau) * (1.0 - tau)


@numba.njit(cache=True)
def _simulate(stiff, damp, inertia, geom, normals, verts, cparams, strat, misalign, out, trace):
    """Run one trial of the staged strategy.

    ``strat``: dt, timeout, force_threshold, insertion_target, incline,
    approach_offset, approach_shift, approach_lift, approach_dip,
    approach_time, rotate_time, descent_distance, descent_time,
    osc_amplitude, osc_frequency, force_filter (SI units).
    ``out`` receives depth_max, sim_time, |wrench| max (6). Rows of
    ``trace`` (if any) receive ``[t, stage, q (6), wrench (6)]`` per step.
    Returns a termination code.
    """
    dt = strat[0]
    timeout = strat[1]
    threshold = strat[2]
    target = strat[3]
    incline = strat[4]
    t_app = strat[9]
    t_rot = strat[10]
    d_desc = strat[11]
    t_desc = strat[12]
    osc_a = strat[13]
    osc_w = 2.0 * math.pi * strat[14]
    alpha = dt / (strat[15] + dt)

    n = int(geom[0])
    if n == 0:
        y_low = geom[2]
    else:
        y_low = 0.0
        for i in range(n):
            if verts[i, 1] > y_low:
                y_low = verts[i, 1]
    # programmed hole centre expressed in the true hole frame
    px = -misalign[0]
    py = -misalign[1]
    yaw = -misalign[2]

    start = np.zeros(6)
    start[0] = px + strat[5]
    start[1] = py - strat[5]
    start[2] = y_low * math.sin(incline) + strat[7]
    start[3] = -incline
    start[5] = yaw
    shift = np.zeros(6)
    shift[0] = -strat[6]
    shift[1] = strat[6]
    shift[2] = -(strat[7] + strat[8])

    q = start.copy()
    v = np.zeros(6)
    q0 = start.copy()
    v0 = np.zeros(6)
    frozen = start.copy()
    wrench = np.zeros(6)
    force = np.zeros(6)
    details = np.zeros((0, 10))
    for i in range(8):
        out[i] = 0.0
    depth_max = -q[2]
    fmag = 0.0
    stage = 1
    t_stage = 0.0
    code = -1
    step = 0
    while True:
        t = step * dt
        if -q[2] >= target:
            code = 0
            break
        if t >= timeout:
            code = 1
            break
        # virtual trajectory of the current stage
        if stage == 1:
            tau = t / t_app
            if tau >= 1.0:
                for i in range(6):
                    frozen[i] = start[i] + shift[i]
                stage = 2
                t_stage = t
            else:
                p = _progress(tau)
                sp = _speed(tau) * 15.0 / (8.0 * t_app)
                for i in range(6):
                    q0[i] = start[i] + shift[i] * p
                    v0[i] = shift[i] * sp
        if stage == 2:
            tau = (t - t_stage) / t_rot
            if tau >= 1.0:
                frozen[3] = 0.0
                stage = 3
                t_stage = t
            else:
                for i in range(6):
                    q0[i] = frozen[i]
                    v0[i] = 0.0
                q0[3] = frozen[3] - frozen[3] * _progress(tau)
                v0[3] = -frozen[3] * _speed(tau) * 15.0 / (8.0 * t_rot)
        if stage == 3:
            tl = t - t_stage
            tau = tl / t_desc
            for i in range(6):
                q0[i] = frozen[i]
                v0[i] = 0.0
            q0[2] = frozen[2] - d_desc * _progress(tau)
            v0[2] = -d_desc * _speed(tau) * 15.0 / (8.0 * t_desc)
            q0[5] = frozen[5] + osc_a * math.sin(osc_w * tl)
            v0[5] = osc_a * osc_w * math.cos(osc_w * tl)

        _contact(q, v, geom, normals, verts, cparams, wrench, details)
        raw = math.sqrt(wrench[0] ** 2 + wrench[1] ** 2 + wrench[2] ** 2)
        if step == 0:
            fmag = raw
        else:
            fmag += alpha * (raw - fmag)
        if step < trace.shape[0]:
            trace[step, 0] = t
            trace[step, 1] = stage
            for i in range(6):
                trace[step, 2 + i] = q[i]
                trace[step, 8 + i] = wrench[i]
        for i in range(6):
            a = abs(wrench[i])
            if a > out[2 + i]:
                out[2 + i] = a
        if stage == 1 and not (fmag < threshold):
            if step == 0:
                code = 3
                break
            # force condition met: stop the approach where the command is
            for i in range(6):
                frozen[i] = q0[i]
            stage = 2
            t_stage = t
            continue
        if stage == 3 and not (fmag < threshold):
            code = 2
            break

        for i in range(6):
            force[i] = stiff[i] * (q0[i] - q[i]) + damp[i] * (v0[i] - v[i]) + wrench[i]
        if not _integrate(q, v, force, inertia, dt) or abs(q[0]) > 1.0 or abs(q[1]) > 1.0 \
                or abs(q[2]) > 1.0:
            code = 4
            break
        if -q[2] > depth_max:
            depth_max = -q[2]
        step += 1
    out[0] = depth_max
    out[1] = step * dt
    return code


# -- public API ---------------------------------------------------------------

def _strategy(config: SimConfig) -> np.ndarray:
    mm = 1e-3
    return np.array([
        config.dt, config.timeout, config.force_threshold, config.insertion_target * mm,
        config.incline, config.approach_offset * mm, config.approach_shift * mm,
        config.approach_lift * mm, config.approach_dip * mm, config.approach_time,
        config.rotate_time, config.descent_distance * mm, config.descent_time,
        config.oscillation_amplitude, config.oscillation_frequency, config.force_filter,
    ])


def sample_misalignment(config: SimConfig) -> np.ndarray:
    """Per-trial workpiece placement error (x, y in m; yaw in rad) from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    pos = config.misalign_position * 1e-3
    return np.array([
        rng.uniform(-pos, pos),
        rng.uniform(-pos, pos),
        rng.uniform(-config.misalign_angle, config.misalign_angle),
    ])


def run_trial(peg: PegSpec, params: ImpedanceParams, config: SimConfig = SimConfig()) -> TrialOutcome:
    """Simulate one assembly attempt.

    Raises :class:`SimulationDiverged` if the integration blows up.
    """
    geom = _geometry(peg, config)
    normals, verts = _tables(peg.n_sides, geom[2])
    inertia = np.asarray(config.inertia, dtype=float)
    stiff = params.stiffness
    damp = 2.0 * params.damping_ratios * np.sqrt(stiff * inertia)
    out = np.zeros(8)
    code = _simulate(stiff, damp, inertia, geom, normals, verts, _contact_params(config),
                     _strategy(config), sample_misalignment(config), out, _NO_TRACE)
    if code == _DIVERGED:
        raise SimulationDiverged(f"integration diverged at t={out[1]:.3f}s")
    term = _CODES[code]
    return TrialOutcome(
        success=term is Termination.INSERTED,
        depth_reached=float(out[0] * 1e3),
        max_wrench=Wrench.from_vector(out[2:8]),
        sim_time=float(out[1]),
        termination=term,
    )


def trial_trace(peg: PegSpec, params: ImpedanceParams, config: SimConfig = SimConfig()):
    """Per-step ``[t, stage, q (6), contact wrench (6)]`` rows plus the termination."""
    geom = _geometry(peg, config)
    normals, verts = _tables(peg.n_sides, geom[2])
    inertia = np.asarray(config.inertia, dtype=float)
    stiff = params.stiffness
    damp = 2.0 * params.damping_ratios * np.sqrt(stiff * inertia)
    out = np.zeros(8)
    trace = np.full((int(math.ceil(config.timeout / config.dt)) + 2, 14), np.nan)
    code = _simulate(stiff, damp, inertia, geom, normals, verts, _contact_params(config),
                     _strategy(config), sample_misalignment(config), out, trace)
    return trace[~np.isnan(trace[:, 0])], _CODES[code]


def diverged_outcome(config: SimConfig) -> TrialOutcome:
    return TrialOutcome(False, float("nan"), Wrench(), float("nan"), Termination.DIVERGED)


def _pose_arrays(pose: Pose, twist):
    q = pose.as_vector().astype(float)
    v = np.zeros(6) if twist is None else np.asarray(twist, dtype=float).copy()
    if v.shape != (6,):
        raise ValueError("twist must have six components")
    return q, v


def contact_wrench(pose: Pose, twist, peg: PegSpec, config: SimConfig = SimConfig()) -> Wrench:
    """Contact wrench on the peg about its tip; ``pose`` position in metres."""
    q, v = _pose_arrays(pose, twist)
    geom = _geometry(peg, config)
    normals, verts = _tables(peg.n_sides, geom[2])
    w = np.zeros(6)
    _contact(q, v, geom, normals, verts, _contact_params(config), w, np.zeros((0, 10)))
    return Wrench.from_vector(w)


def contact_details(pose: Pose, twist, peg: PegSpec, config: SimConfig = SimConfig()) -> np.ndarray:
    """Per-contact rows ``[r xyz, normal xyz, f_n, f_t xyz]`` for diagnostics."""
    q, v = _pose_arrays(pose, twist)
    geom = _geometry(peg, config)
    normals, verts = _tables(peg.n_sides, geom[2])
    rows = np.zeros((2 * (max(peg.n_sides, 1) + 1), 10))
    k = _contact(q, v, geom, normals, verts, _contact_params(config), np.zeros(6), rows)
    return rows[:k].copy()


def step(state: SimState, total_wrench: Wrench, inertia=DEFAULT_INERTIA,
         config: SimConfig = SimConfig()) -> SimState:
    """Advance ``m a = F`` by one semi-implicit Euler step of ``config.dt``."""
    q = np.array(state.q, dtype=float)
    v = np.array(state.v, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    if np.any(~(inertia > 0)):
        raise ValueError("inertia must be positive")
    if not _integrate(q, v, total_wrench.as_vector(), inertia, config.dt):
        raise SimulationDiverged("non-finite state after step")
    return SimState(q=q, v=v, t=state.t + config.dt)


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=int(seed))
