"""Static description of the radar/communications network.

A :class:`Scenario` holds the radar fleet, the targets, the communications
users, the subchannel grid and all budgets. Scenarios are immutable and are
read from / written to TOML files (schema in the README).

Radars are always stored in the order MIMO, phased array, mechanical scan,
which is the order the optimisation vector uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import tomli
import tomli_w

from .errors import ScenarioError

SCHEMA_VERSION = 1

# Physically calibrated defaults used by the generator (see README).
# Range variance ~ c^2 / (8 pi^2 zeta^2 SNR) for an rms bandwidth zeta.
RANGE_CONST_PHYSICAL = 299_792_458.0**2 / (8.0 * math.pi**2)
ANGLE_CONST_PHYSICAL = 1e-3
DOPPLER_CONST_PHYSICAL = 1e-17


class RadarKind(str, Enum):
    MIMO = "mimo"
    PHASED = "phased"
    MECH = "mech"


_KIND_ORDER = {RadarKind.MIMO: 0, RadarKind.PHASED: 1, RadarKind.MECH: 2}


class Tier(str, Enum):
    MACRO = "macro"
    MICRO = "micro"


@dataclass(frozen=True)
class RadarSpec:
    """One radar. ``band`` is the half-open subchannel range ``[start, stop)``.

    ``schedule`` holds one ``(initial_time, revisit_interval)`` pair per target.
    Which of the power/dwell fields are used depends on ``kind``: MIMO radars
    optimise power (dwell fixed), phased arrays optimise dwell (power fixed),
    mechanical scanners have both fixed.
    """

    id: int
    kind: RadarKind
    position: tuple[float, float]
    band: tuple[int, int]
    signal_bandwidth: float
    beamwidth: float
    noise_power: float
    schedule: tuple[tuple[float, float], ...]
    fixed_dwell: float | None = None
    fixed_power: float | None = None
    power_budget: float | None = None
    time_budget: float | None = None

    def band_selector(self, num_subchannels: int) -> np.ndarray:
        sel = np.zeros(num_subchannels)
        sel[self.band[0]:self.band[1]] = 1.0
        return sel


@dataclass(frozen=True)
class TargetSpec:
    id: int
    initial_state: tuple[float, float, float, float]
    rcs: tuple[float, ...]
    process_noise_intensity: float = 1.0


@dataclass(frozen=True)
class CommUserSpec:
    """A downlink user.

    Macro users take part in the allocation. Micro users reuse the block of
    their ``partner`` macro user at a fixed ``power`` and are only reported.
    ``throughput_threshold`` of ``None`` means "calibrate to the uniform
    allocation" (done per fusion interval).
    """

    id: int
    tier: Tier
    channel_gain: float
    noise_power: float
    radar_to_user_gains: tuple[float, ...]
    user_to_radar_gains: tuple[float, ...] = ()
    throughput_threshold: float | None = None
    cross_tier_gain: float | None = None
    partner: int | None = None
    power: float | None = None


@dataclass(frozen=True)
class Scenario:
    radars: tuple[RadarSpec, ...]
    targets: tuple[TargetSpec, ...]
    users: tuple[CommUserSpec, ...]
    fusion_period: float
    total_bandwidth: float
    subchannel_width: float
    comm_block_size: int
    comm_power_budget: float = 1.0
    range_const: float = 1.0
    angle_const: float = 1.0
    doppler_const: float = 1.0
    name: str = ""
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        validate(self)

    # -- sizes ---------------------------------------------------------
    @property
    def num_subchannels(self) -> int:
        return int(round(self.total_bandwidth / self.subchannel_width))

    @property
    def num_blocks(self) -> int:
        return self.num_subchannels // self.comm_block_size

    @property
    def num_radars(self) -> int:
        return len(self.radars)

    @property
    def num_targets(self) -> int:
        return len(self.targets)

    @cached_property
    def kind_counts(self) -> tuple[int, int, int]:
        kinds = [r.kind for r in self.radars]
        return (kinds.count(RadarKind.MIMO), kinds.count(RadarKind.PHASED),
                kinds.count(RadarKind.MECH))

    @cached_property
    def macro_users(self) -> tuple[CommUserSpec, ...]:
        return tuple(u for u in self.users if u.tier is Tier.MACRO)

    @cached_property
    def micro_users(self) -> tuple[CommUserSpec, ...]:
        return tuple(u for u in self.users if u.tier is Tier.MICRO)

    @property
    def num_macro(self) -> int:
        return len(self.macro_users)

    @property
    def num_variables(self) -> int:
        n_c, n_p, _ = self.kind_counts
        return (n_c + n_p) * self.num_targets + self.num_macro

    @property
    def normalizer(self) -> np.ndarray:
        t0 = self.fusion_period
        return np.diag([1.0, t0, 1.0, t0])

    # -- stacked arrays used by the numerical code ----------------------
    @cached_property
    def radar_positions(self) -> np.ndarray:
        return np.array([r.position for r in self.radars], dtype=float).reshape(-1, 2)

    @cached_property
    def radar_noise(self) -> np.ndarray:
        return np.array([r.noise_power for r in self.radars], dtype=float)

    @cached_property
    def band_matrix(self) -> np.ndarray:
        """N x F 0/1 matrix of radar subchannel occupancy."""
        f = self.num_subchannels
        return np.array([r.band_selector(f) for r in self.radars]).reshape(-1, f)

    @cached_property
    def block_overlap(self) -> np.ndarray:
        """N x N_f count of subchannels radar i shares with comm block n."""
        n, f = self.band_matrix.shape
        return self.band_matrix.reshape(n, self.num_blocks, self.comm_block_size).sum(axis=2)

    @cached_property
    def rcs(self) -> np.ndarray:
        """N x Q radar cross-section coefficients."""
        return np.array([t.rcs for t in self.targets], dtype=float).T.reshape(self.num_radars, -1)

    @cached_property
    def user_to_radar(self) -> np.ndarray:
        """N x J interference gains from macro user j into radar i."""
        g = np.array([u.user_to_radar_gains for u in self.macro_users], dtype=float)
        return g.T.reshape(self.num_radars, self.num_macro)

    @cached_property
    def radar_to_user(self) -> np.ndarray:
        """J x N interference gains from radar i into macro user j."""
        g = np.array([u.radar_to_user_gains for u in self.macro_users], dtype=float)
        return g.reshape(self.num_macro, self.num_radars)

    @cached_property
    def fixed_power(self) -> np.ndarray:
        """Per-radar fixed transmit power (NaN where power is optimised)."""
        return np.array([np.nan if r.fixed_power is None else r.fixed_power
                         for r in self.radars])

    @cached_property
    def fixed_dwell(self) -> np.ndarray:
        return np.array([np.nan if r.fixed_dwell is None else r.fixed_dwell
                         for r in self.radars])

    def measurement_shape(self) -> np.ndarray:
        """N x Q x 3 diagonal of the per-measurement shape matrix C."""
        zeta = np.array([r.signal_bandwidth for r in self.radars])
        beam = np.array([r.beamwidth for r in self.radars])
        base = np.stack([self.range_const / zeta**2,
                         self.angle_const * beam**2,
                         self.doppler_const * zeta**2], axis=1)
        return self.rcs[:, :, None] * base[:, None, :]

    def initial_states(self) -> np.ndarray:
        return np.array([t.initial_state for t in self.targets], dtype=float)

    def replace(self, **changes: Any) -> "Scenario":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# validation


def _check(cond: bool, field_name: str, reason: str) -> None:
    if not cond:
        raise ScenarioError(field_name, reason)


def validate(sc: Scenario) -> None:
    """Raise :class:`ScenarioError` naming the first violated invariant."""
    _check(sc.schema_version == SCHEMA_VERSION, "schema_version",
           f"unsupported version {sc.schema_version}")
    _check(sc.fusion_period > 0, "fusion_period", "must be positive")
    _check(sc.subchannel_width > 0, "subchannel_width", "must be positive")
    _check(sc.total_bandwidth > 0, "total_bandwidth", "must be positive")
    _check(isinstance(sc.comm_block_size, int) and sc.comm_block_size > 0,
           "comm_block_size", "must be a positive integer")
    f = sc.num_subchannels
    _check(f >= 1, "num_subchannels", "bandwidth grid is empty")
    _check(f % sc.comm_block_size == 0, "comm_block_size",
           f"num_subchannels={f} is not divisible by comm_block_size={sc.comm_block_size}")
    _check(sc.comm_power_budget > 0, "comm_power_budget", "must be positive")
    for name in ("range_const", "angle_const", "doppler_const"):
        _check(getattr(sc, name) > 0, name, "must be positive")
    _check(len(sc.targets) >= 1, "targets", "at least one target is required")

    n, q = len(sc.radars), len(sc.targets)
    ranks = [_KIND_ORDER[r.kind] for r in sc.radars]
    _check(ranks == sorted(ranks), "radars", "must be ordered mimo, phased, mech")
    t0 = sc.fusion_period
    for k, r in enumerate(sc.radars):
        where = f"radars[{k}]"
        _check(0 <= r.band[0] < r.band[1] <= f, f"{where}.band",
               f"[{r.band[0]}, {r.band[1]}) outside the {f}-subchannel grid")
        _check(r.signal_bandwidth > 0, f"{where}.signal_bandwidth", "must be positive")
        _check(r.beamwidth > 0, f"{where}.beamwidth", "must be positive")
        _check(r.noise_power > 0, f"{where}.noise_power", "must be positive")
        _check(len(r.schedule) == q, f"{where}.schedule", f"needs {q} (initial, revisit) pairs")
        for init, rev in r.schedule:
            _check(rev > 0, f"{where}.schedule", "revisit_interval must be positive")
            _check(0 <= init < t0, f"{where}.schedule",
                   f"initial_time {init} outside [0, {t0})")
        if r.kind is RadarKind.MIMO:
            _check(r.power_budget is not None and r.power_budget > 0,
                   f"{where}.power_budget", "mimo radar needs a positive power budget")
            _check(r.time_budget is None, f"{where}.time_budget", "not allowed for mimo")
            _check(r.fixed_dwell is not None and r.fixed_dwell > 0,
                   f"{where}.fixed_dwell", "mimo radar needs a positive fixed dwell")
        elif r.kind is RadarKind.PHASED:
            _check(r.time_budget is not None and r.time_budget > 0,
                   f"{where}.time_budget", "phased array needs a positive time budget")
            _check(r.power_budget is None, f"{where}.power_budget", "not allowed for phased")
            _check(r.fixed_power is not None and r.fixed_power > 0,
                   f"{where}.fixed_power", "phased array needs a positive fixed power")
        else:
            _check(r.power_budget is None and r.time_budget is None, f"{where}",
                   "mechanical scanner takes no budget")
            _check(r.fixed_power is not None and r.fixed_power > 0
                   and r.fixed_dwell is not None and r.fixed_dwell > 0,
                   f"{where}", "mechanical scanner needs fixed power and dwell")

    for k, t in enumerate(sc.targets):
        _check(len(t.initial_state) == 4 and all(map(math.isfinite, t.initial_state)),
               f"targets[{k}].initial_state", "must be 4 finite numbers")
        _check(len(t.rcs) == n, f"targets[{k}].rcs", f"needs one value per radar ({n})")
        _check(all(v > 0 for v in t.rcs), f"targets[{k}].rcs", "must be positive")
        _check(t.process_noise_intensity >= 0, f"targets[{k}].process_noise_intensity",
               "must be non-negative")

    macro_ids = [u.id for u in sc.users if u.tier is Tier.MACRO]
    for k, u in enumerate(sc.users):
        where = f"users[{k}]"
        _check(u.channel_gain >= 0, f"{where}.channel_gain", "must be non-negative")
        _check(u.noise_power > 0, f"{where}.noise_power", "must be positive")
        _check(len(u.radar_to_user_gains) == n and all(g >= 0 for g in u.radar_to_user_gains),
               f"{where}.radar_to_user_gains", f"needs {n} non-negative values")
        if u.tier is Tier.MACRO:
            _check(len(u.user_to_radar_gains) == n and all(g >= 0 for g in u.user_to_radar_gains),
                   f"{where}.user_to_radar_gains", f"needs {n} non-negative values")
            _check(u.throughput_threshold is None or u.throughput_threshold > 0,
                   f"{where}.throughput_threshold", "must be positive for macro users")
        else:
            _check(u.cross_tier_gain is not None and u.cross_tier_gain >= 0,
                   f"{where}.cross_tier_gain", "micro user needs a non-negative value")
            _check(u.partner in macro_ids, f"{where}.partner", "must name a macro user id")
            _check(u.power is not None and u.power >= 0, f"{where}.power",
                   "micro user needs a fixed power")
    _check(len(macro_ids) <= sc.num_blocks, "users",
           f"{len(macro_ids)} macro users exceed {sc.num_blocks} blocks")


# ---------------------------------------------------------------------------
# serialisation


def _drop_none(d: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in d.items() if v is not None}


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    out: dict[str, Any] = {
        "schema_version": sc.schema_version,
        "name": sc.name,
        "fusion_period": sc.fusion_period,
        "total_bandwidth": sc.total_bandwidth,
        "subchannel_width": sc.subchannel_width,
        "num_subchannels": sc.num_subchannels,
        "comm_block_size": sc.comm_block_size,
        "comm_power_budget": sc.comm_power_budget,
        "range_const": sc.range_const,
        "angle_const": sc.angle_const,
        "doppler_const": sc.doppler_const,
    }
    out["radars"] = [_drop_none({
        "id": r.id, "kind": r.kind.value, "position": list(r.position),
        "band": list(r.band), "signal_bandwidth": r.signal_bandwidth,
        "beamwidth": r.beamwidth, "noise_power": r.noise_power,
        "fixed_dwell": r.fixed_dwell, "fixed_power": r.fixed_power,
        "power_budget": r.power_budget, "time_budget": r.time_budget,
        "schedule": [list(p) for p in r.schedule],
    }) for r in sc.radars]
    out["targets"] = [{
        "id": t.id, "initial_state": list(t.initial_state), "rcs": list(t.rcs),
        "process_noise_intensity": t.process_noise_intensity,
    } for t in sc.targets]
    out["users"] = [_drop_none({
        "id": u.id, "tier": u.tier.value, "channel_gain": u.channel_gain,
        "noise_power": u.noise_power,
        "radar_to_user_gains": list(u.radar_to_user_gains),
        "user_to_radar_gains": list(u.user_to_radar_gains) or None,
        "throughput_threshold": u.throughput_threshold,
        "cross_tier_gain": u.cross_tier_gain, "partner": u.partner, "power": u.power,
    }) for u in sc.users]
    return out


def _band_from(entry: dict[str, Any], where: str) -> tuple[int, int]:
    if "band" in entry:
        start, stop = entry["band"]
        return int(start), int(stop)
    if "band_selector" in entry:
        sel = [int(v) for v in entry["band_selector"]]
        ones = [i for i, v in enumerate(sel) if v]
        if not ones or ones != list(range(ones[0], ones[-1] + 1)):
            raise ScenarioError(f"{where}.band_selector", "must be one contiguous run of ones")
        return ones[0], ones[-1] + 1
    raise ScenarioError(f"{where}.band", "missing")


def _opt_float(v: Any) -> float | None:
    return None if v is None else float(v)


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    try:
        radars = []
        for k, r in enumerate(data.get("radars", [])):
            radars.append(RadarSpec(
                id=int(r["id"]), kind=RadarKind(r["kind"]),
                position=(float(r["position"][0]), float(r["position"][1])),
                band=_band_from(r, f"radars[{k}]"),
                signal_bandwidth=float(r["signal_bandwidth"]),
                beamwidth=float(r["beamwidth"]), noise_power=float(r["noise_power"]),
                schedule=tuple((float(a), float(b)) for a, b in r["schedule"]),
                fixed_dwell=_opt_float(r.get("fixed_dwell")),
                fixed_power=_opt_float(r.get("fixed_power")),
                power_budget=_opt_float(r.get("power_budget")),
                time_budget=_opt_float(r.get("time_budget")),
            ))
        radars.sort(key=lambda r: _KIND_ORDER[r.kind])
        targets = tuple(TargetSpec(
            id=int(t["id"]), initial_state=tuple(float(v) for v in t["initial_state"]),
            rcs=tuple(float(v) for v in t["rcs"]),
            process_noise_intensity=float(t.get("process_noise_intensity", 1.0)),
        ) for t in data.get("targets", []))
        users = tuple(CommUserSpec(
            id=int(u["id"]), tier=Tier(u["tier"]), channel_gain=float(u["channel_gain"]),
            noise_power=float(u["noise_power"]),
            radar_to_user_gains=tuple(float(v) for v in u["radar_to_user_gains"]),
            user_to_radar_gains=tuple(float(v) for v in u.get("user_to_radar_gains", ())),
            throughput_threshold=_opt_float(u.get("throughput_threshold")),
            cross_tier_gain=_opt_float(u.get("cross_tier_gain")),
            partner=None if u.get("partner") is None else int(u["partner"]),
            power=_opt_float(u.get("power")),
        ) for u in data.get("users", []))
        sc = Scenario(
            radars=tuple(radars), targets=targets, users=users,
            fusion_period=float(data["fusion_period"]),
            total_bandwidth=float(data["total_bandwidth"]),
            subchannel_width=float(data["subchannel_width"]),
            comm_block_size=int(data["comm_block_size"]),
            comm_power_budget=float(data.get("comm_power_budget", 1.0)),
            range_const=float(data.get("range_const", 1.0)),
            angle_const=float(data.get("angle_const", 1.0)),
            doppler_const=float(data.get("doppler_const", 1.0)),
            name=str(data.get("name", "")),
            schema_version=int(data.get("schema_version", SCHEMA_VERSION)),
        )
    except KeyError as exc:
        raise ScenarioError(str(exc.args[0]), "required field missing") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("scenario", str(exc)) from exc
    declared = data.get("num_subchannels")
    if declared is not None and int(declared) != sc.num_subchannels:
        raise ScenarioError("num_subchannels",
                            f"declared {declared} but total_bandwidth/subchannel_width "
                            f"gives {sc.num_subchannels}")
    return sc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(str(path), f"parse failure: {exc}") from exc
    return scenario_from_dict(data)


def dumps_scenario(sc: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(sc))


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(sc))


def paper_scenario() -> Scenario:
    """The packaged two-target, eight-radar, six-user scenario."""
    text = resources.files("anchor_sim.data").joinpath("paper.toml").read_text()
    return scenario_from_dict(tomli.loads(text))


# ---------------------------------------------------------------------------
# random generation


def _sq_normal(rng: np.random.Generator, size: Any = None) -> np.ndarray:
    # squared standard normal, floored so every gain stays strictly positive
    return np.maximum(rng.standard_normal(size) ** 2, 1e-6)


def generate_random_scenario(
    seed: int,
    counts: Sequence[int] = (3, 3, 2, 2, 6),
    region: tuple[tuple[float, float], tuple[float, float]] = ((-6000.0, 6000.0), (-6000.0, 6000.0)),
    *,
    fusion_period: float = 10.0,
    total_bandwidth: float = 400e6,
    subchannel_width: float = 4e6,
    comm_block_size: int = 4,
    radar_band_subchannels: int = 10,
    num_micro: int = 0,
) -> Scenario:
    """Draw a scenario from ``seed``.

    ``counts`` is ``(N_c, N_p, N_m, Q, J)``. Channel gains and noise powers are
    squared standard-normal draws. Bit-identical for a given seed.
    """
    n_c, n_p, n_m, q, j = (int(c) for c in counts)
    f = int(round(total_bandwidth / subchannel_width))
    if f % comm_block_size:
        raise ScenarioError("comm_block_size",
                            f"num_subchannels={f} is not divisible by comm_block_size={comm_block_size}")
    if j > f // comm_block_size:
        raise ScenarioError("users", f"{j} macro users exceed {f // comm_block_size} blocks")
    if q < 1:
        raise ScenarioError("targets", "at least one target is required")
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = region
    n = n_c + n_p + n_m
    width = min(radar_band_subchannels, f)

    radars = []
    for i in range(n):
        kind = RadarKind.MIMO if i < n_c else RadarKind.PHASED if i < n_c + n_p else RadarKind.MECH
        pos = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
        start = int(rng.integers(0, f - width + 1))
        inits = rng.uniform(0.0, min(4.0, fusion_period), size=q).round(1)
        if kind is RadarKind.PHASED:
            revisits = rng.choice([2.0, 2.5, 3.0], size=q)
        else:
            revisits = np.full(q, rng.choice([2.0, 2.5, 3.0]))
        revisits = np.minimum(revisits, fusion_period)
        common = dict(
            id=i + 1, kind=kind, position=pos, band=(start, start + width),
            signal_bandwidth=float(width * subchannel_width),
            beamwidth=float(np.deg2rad(rng.uniform(1.0, 3.0))),
            noise_power=float(_sq_normal(rng)),
            schedule=tuple((float(a), float(b)) for a, b in zip(inits, revisits)),
        )
        if kind is RadarKind.MIMO:
            radars.append(RadarSpec(**common, fixed_dwell=0.125, power_budget=1.0))
        elif kind is RadarKind.PHASED:
            radars.append(RadarSpec(**common, fixed_power=0.125, time_budget=1.0))
        else:
            radars.append(RadarSpec(**common, fixed_power=0.125, fixed_dwell=0.125))

    targets = []
    for k in range(q):
        speed = rng.uniform(20.0, 60.0)
        heading = rng.uniform(0.0, 2 * np.pi)
        state = (float(rng.uniform(x0, x1) * 0.7), float(speed * np.cos(heading)),
                 float(rng.uniform(y0, y1) * 0.7), float(speed * np.sin(heading)))
        targets.append(TargetSpec(id=k + 1, initial_state=state,
                                  rcs=tuple(float(v) for v in rng.uniform(0.5, 1.5, size=n)),
                                  process_noise_intensity=1.0))

    users = []
    for k in range(j):
        users.append(CommUserSpec(
            id=k + 1, tier=Tier.MACRO,
            channel_gain=float(_sq_normal(rng)), noise_power=float(_sq_normal(rng)),
            radar_to_user_gains=tuple(float(v) for v in _sq_normal(rng, n)),
            user_to_radar_gains=tuple(float(v) for v in _sq_normal(rng, n)),
        ))
    for k in range(num_micro if j else 0):
        users.append(CommUserSpec(
            id=j + k + 1, tier=Tier.MICRO,
            channel_gain=float(_sq_normal(rng)), noise_power=float(_sq_normal(rng)),
            radar_to_user_gains=tuple(float(v) for v in _sq_normal(rng, n)),
            cross_tier_gain=float(_sq_normal(rng)), partner=int(rng.integers(1, j + 1)),
            power=1.0 / max(num_micro, 1),
        ))

    return Scenario(
        radars=tuple(radars), targets=tuple(targets), users=tuple(users),
        fusion_period=fusion_period, total_bandwidth=total_bandwidth,
        subchannel_width=subchannel_width, comm_block_size=comm_block_size,
        comm_power_budget=1.0, range_const=RANGE_CONST_PHYSICAL,
        angle_const=ANGLE_CONST_PHYSICAL, doppler_const=DOPPLER_CONST_PHYSICAL,
        name=f"random-{seed}",
    )


# ---------------------------------------------------------------------------
# measurement schedule


def measurement_schedule(radar: RadarSpec, target: int, interval: tuple[float, float]) -> np.ndarray:
    """Measurement times of ``radar`` on ``target`` inside ``[t_k, t_k+1)``."""
    t_lo, t_hi = interval
    init, rev = radar.schedule[target]
    eps = 1e-9 * max(1.0, abs(t_hi))
    m_lo = max(0, math.ceil((t_lo - init) / rev - 1e-9))
    m_hi = max(m_lo, math.ceil((t_hi - init) / rev + 1e-9))
    times = init + rev * np.arange(m_lo, m_hi + 1)
    return times[(times >= t_lo - eps) & (times < t_hi - eps)]


@dataclass(frozen=True)
class IntervalSchedule:
    """All measurement times of one fusion interval ``[start, start + T0)``."""

    index: int
    start: float
    end: float
    times: tuple[tuple[np.ndarray, ...], ...] = field(repr=False)

    @cached_property
    def counts(self) -> np.ndarray:
        """N x Q measurement counts M_{i,q}."""
        return np.array([[len(t) for t in row] for row in self.times], dtype=float)


def interval_schedule(sc: Scenario, k: int) -> IntervalSchedule:
    """Schedule of fusion interval ``k`` (0-based, covering ``[k T0, (k+1) T0)``)."""
    t0 = sc.fusion_period
    start, end = k * t0, (k + 1) * t0
    times = tuple(tuple(measurement_schedule(r, q, (start, end)) for q in range(sc.num_targets))
                  for r in sc.radars)
    return IntervalSchedule(index=k, start=start, end=end, times=times)


# ---------------------------------------------------------------------------
# canonical small instances


def desk_scenario(num_users: int = 2) -> Scenario:
    """Tiny instance used by the brute-force oracles.

    One radar of each kind, one target, ``num_users`` macro users, 8
    subchannels in 4 comm blocks of 2.
    """
    radars = (
        RadarSpec(1, RadarKind.MIMO, (0.0, 0.0), (0, 3), 8e6, 0.03, 0.8,
                  ((1.0, 2.0),), fixed_dwell=0.5, power_budget=1.0),
        RadarSpec(2, RadarKind.PHASED, (3000.0, 0.0), (2, 5), 8e6, 0.02, 1.2,
                  ((2.0, 3.0),), fixed_power=0.5, time_budget=1.0),
        RadarSpec(3, RadarKind.MECH, (0.0, 3000.0), (5, 7), 8e6, 0.04, 1.0,
                  ((0.5, 2.5),), fixed_power=0.25, fixed_dwell=0.25),
    )
    target = TargetSpec(1, (1500.0, 10.0, 1200.0, -5.0), (1.0, 0.8, 1.2), 1.0)
    gains = [((0.9, 1.4, 0.6), (2.0, 0.5, 1.5), 1.3, 0.2),
             ((0.4, 0.8, 1.1), (1.0, 3.0, 0.7), 0.9, 0.3),
             ((1.1, 0.3, 0.5), (0.6, 1.8, 2.2), 1.6, 0.25)]
    users = tuple(CommUserSpec(k + 1, Tier.MACRO, channel_gain=beta, noise_power=noise,
                               radar_to_user_gains=r2u, user_to_radar_gains=u2r)
                  for k, (r2u, u2r, beta, noise) in enumerate(gains[:num_users]))
    return Scenario(radars=radars, targets=(target,), users=users, fusion_period=10.0,
                    total_bandwidth=32e6, subchannel_width=4e6, comm_block_size=2,
                    comm_power_budget=1.0, range_const=RANGE_CONST_PHYSICAL,
                    angle_const=ANGLE_CONST_PHYSICAL, doppler_const=DOPPLER_CONST_PHYSICAL,
                    name="desk3")


TABLE_SCHEDULE = (
    # (initial, revisit) for target 1 and target 2, radars 1..8
    ((2.0, 2.0), (2.0, 2.0)),
    ((2.5, 2.0), (2.5, 2.0)),
    ((3.0, 2.0), (3.0, 2.0)),
    ((2.3, 3.0), (3.0, 3.0)),
    ((3.0, 2.0), (3.5, 2.0)),
    ((3.2, 2.0), (3.8, 2.0)),
    ((3.2, 2.5), (4.0, 2.5)),
    ((2.1, 2.5), (3.5, 2.5)),
)


def build_paper_scenario(seed: int = 2022, interference_scale: float = 10.0,
                         process_noise_intensity: float = 1e-4,
                         band_slots: Sequence[int] | None = tuple(range(8))) -> Scenario:
    """Two targets, 3 MIMO + 3 phased + 2 mechanical radars, six macro users.

    Geometry, gains and band slots are drawn from ``seed``. Gains and noise
    powers are squared normal draws; ``interference_scale`` multiplies the
    standard deviation of the comm-to-radar gains. ``band_slots`` places each
    radar in a 40 MHz slot (``None`` draws them). The packaged
    ``paper.toml`` is this function's output for the default arguments.
    """
    rng = np.random.default_rng(seed)
    n, q, j = 8, 2, 6
    f, width = 100, 10
    drawn = np.sort(rng.permutation(f // width)[:n])
    slots = drawn if band_slots is None else np.asarray(band_slots)
    kinds = [RadarKind.MIMO] * 3 + [RadarKind.PHASED] * 3 + [RadarKind.MECH] * 2
    radars = []
    for i, kind in enumerate(kinds):
        pos = (float(rng.uniform(-6000, 6000)), float(rng.uniform(-6000, 6000)))
        start = int(slots[i] * width)
        common = dict(id=i + 1, kind=kind, position=pos, band=(start, start + width),
                      signal_bandwidth=width * 4e6,
                      beamwidth=float(np.deg2rad(rng.uniform(1.0, 3.0))),
                      noise_power=float(_sq_normal(rng)), schedule=TABLE_SCHEDULE[i])
        if kind is RadarKind.MIMO:
            radars.append(RadarSpec(**common, fixed_dwell=0.125, power_budget=1.0))
        elif kind is RadarKind.PHASED:
            radars.append(RadarSpec(**common, fixed_power=0.125, time_budget=1.0))
        else:
            radars.append(RadarSpec(**common, fixed_power=0.125, fixed_dwell=0.125))
    starts = [(-2000.0, 50.0, -4000.0, 50.0), (4000.0, -25.0, 2000.0, -50.0)]
    targets = tuple(TargetSpec(k + 1, starts[k],
                               tuple(float(v) for v in rng.uniform(0.5, 1.5, size=n)),
                               process_noise_intensity) for k in range(q))
    users = tuple(CommUserSpec(
        k + 1, Tier.MACRO, channel_gain=float(_sq_normal(rng)), noise_power=float(_sq_normal(rng)),
        radar_to_user_gains=tuple(float(v) for v in _sq_normal(rng, n)),
        user_to_radar_gains=tuple(float(v) for v in interference_scale**2 * _sq_normal(rng, n)),
    ) for k in range(j))
    return Scenario(radars=tuple(radars), targets=targets, users=users, fusion_period=10.0,
                    total_bandwidth=400e6, subchannel_width=4e6, comm_block_size=4,
                    comm_power_budget=1.0, range_const=RANGE_CONST_PHYSICAL,
                    angle_const=ANGLE_CONST_PHYSICAL, doppler_const=DOPPLER_CONST_PHYSICAL,
                    name="paper")
