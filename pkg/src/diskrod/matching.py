"""Four-step sequential actuation matching of a target backbone curve.

Step 1 reads disk indices and rotation directions out of the target's
torsion profile; step 2 finds the tendon displacement that matches the
curvature profile with the identified disks at full deflection; step 3
searches each identified disk's angle against the shape error; step 4
fine-tunes the penultimate disk for the tip region.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_smoothing_spline

from .curves import (CrossingDirection, CTProfile, Curve3D, SignChange,
                     SmoothingParams, arc_length_parameterize, ct_profile,
                     smooth_profile, torsion_sign_changes)
from .errors import SolverNotConverged, TooFewValidSamples
from .model import (TENDON_MAX_MM, ActuationState, ManipulatorConfig, Shape,
                    WarmStartCache, forward)
from .search import (GoldenSearchSpec, SearchTrace, corresponding_centers,
                     golden_section, rmse_curvature, rmse_shape, tip_error)


class Direction(enum.Enum):
    CLOCKWISE = "clockwise"
    COUNTERCLOCKWISE = "counterclockwise"


# Simulator calibration: a positive disk angle produces a neg-to-pos torsion
# crossing, so NegToPos maps to the positive-angle direction (labelled
# clockwise here, matching the sign convention of ActuationState).  Flipping
# this table is the single switch if the geometry convention ever changes.
DIRECTION_FOR_CROSSING = {
    CrossingDirection.NEG_TO_POS: Direction.CLOCKWISE,
    CrossingDirection.POS_TO_NEG: Direction.COUNTERCLOCKWISE,
}
ANGLE_SIGN = {Direction.CLOCKWISE: 1.0, Direction.COUNTERCLOCKWISE: -1.0}


@dataclass(frozen=True)
class DiskHypothesis:
    disk_index: int
    direction: Direction
    source_sign_change: SignChange
    deferred: bool


@dataclass(frozen=True)
class MatchParams:
    # near-interpolating splines: the analysis profiles have one honest
    # sample per disk, and GCV flattens their sign-change lobes
    smoothing: SmoothingParams = SmoothingParams(lam=1e-6)
    sign_change_threshold: float | None = None  # None: 20% of max |tau|
    tendon_tol_mm: float = 1.0
    angle_quantize_deg: float = 1.0
    tip_bracket_deg: float = 20.0
    max_evals: int = 60


@dataclass(frozen=True, eq=False)
class MatchResult:
    hypotheses: list[DiskHypothesis]
    tendon_mm: float
    disk_angles_deg: tuple[float, ...]
    step2_trace: SearchTrace
    step3_traces: list[SearchTrace]
    step4_trace: SearchTrace
    shape_rmse_cm: float
    curvature_rmse_per_cm: float
    tip_error_mm: float
    attained_shape: Shape

    def to_dict(self) -> dict:
        return {
            "hypotheses": [
                {
                    "disk": h.disk_index,
                    "direction": h.direction.value,
                    "deferred": h.deferred,
                    "s_pos_mm": h.source_sign_change.s_pos,
                    "crossing": h.source_sign_change.direction.value,
                    "magnitude_per_mm": h.source_sign_change.magnitude,
                }
                for h in self.hypotheses
            ],
            "tendon_mm": self.tendon_mm,
            "disk_angles_deg": list(self.disk_angles_deg),
            "metrics": {
                "shape_rmse_cm": self.shape_rmse_cm,
                "curvature_rmse_per_cm": self.curvature_rmse_per_cm,
                "tip_error_mm": self.tip_error_mm,
            },
            "traces": {
                "step2_tendon": self.step2_trace.to_dict(),
                "step3_angles": [t.to_dict() for t in self.step3_traces],
                "step4_tip": self.step4_trace.to_dict(),
            },
        }


def analysis_profile(curve: Curve3D, config: ManipulatorConfig,
                     params: MatchParams = MatchParams(),
                     n_samples: int | None = None) -> CTProfile:
    """Smoothed curvature/torsion profile at disk-center sample density.

    The torsion analysis mirrors the measurement workflow: one sample per
    disk (the default when ``n_samples`` is None).  Denser sampling resolves
    near-inflection points of the bend where the Frenet torsion is
    ill-conditioned, which only adds spikes; pass ``n_samples=0`` to profile
    the curve's own samples (sensible for analytic curves).  A curve too
    straight to define torsion anywhere (an unactuated hanging backbone)
    degrades to a curvature-only profile with no torsion information.
    """
    if n_samples == 0:
        pts = curve.points
    else:
        count = config.n_disks if n_samples is None else n_samples
        s_values = np.linspace(0.0, curve.length, count)
        pts = np.column_stack([np.interp(s_values, curve.s, curve.points[:, k])
                               for k in range(3)])
    raw = ct_profile(arc_length_parameterize(pts))
    try:
        return smooth_profile(raw, params.smoothing)
    except TooFewValidSamples:
        grid = np.linspace(raw.s[0], raw.s[-1], params.smoothing.grid_points)
        span = raw.s[-1] - raw.s[0]
        fit = make_smoothing_spline((raw.s - raw.s[0]) / span, raw.kappa,
                                    lam=params.smoothing.lam)
        kappa = np.clip(fit((grid - raw.s[0]) / span), 0.0, None)
        return CTProfile(s=grid, kappa=kappa, tau=np.zeros_like(grid),
                         kappa_valid=np.zeros(len(grid), dtype=bool))


def _shape_profile(shape: Shape, config, params) -> CTProfile:
    return analysis_profile(shape.dense_curve, config, params)


def _relabel(step: str, exc: SolverNotConverged) -> SolverNotConverged:
    return SolverNotConverged(f"{step}: {exc}")


def step1_identify(target: Curve3D, config: ManipulatorConfig,
                   params: MatchParams = MatchParams()) -> list[DiskHypothesis]:
    """Disk-rotation hypotheses from torsion sign changes of the target.

    Crossings near the two most distal disks are deferred: the tip region is
    handled by the end-effector fine-tuning step.  An empty list is a valid
    outcome (planar target).
    """
    if target.n < 10:
        raise ValueError(f"target needs >= 10 samples, got {target.n}")
    span = target.length / config.backbone_length_mm
    if not 0.9 <= span <= 1.05:
        raise ValueError(
            f"target arc length {target.length:.1f} mm does not span the "
            f"{config.backbone_length_mm:.0f} mm backbone")
    profile = analysis_profile(target, config, params)
    crossings = torsion_sign_changes(profile, config.disk_arc_positions_mm,
                                     params.sign_change_threshold)
    deferral_cutoff = config.n_disks - 2
    return [
        DiskHypothesis(
            disk_index=c.nearest_disk,
            direction=DIRECTION_FOR_CROSSING[c.direction],
            source_sign_change=c,
            deferred=c.nearest_disk >= deferral_cutoff,
        )
        for c in crossings
    ]


def _full_deflection_angles(hyps: list[DiskHypothesis], config) -> list[float]:
    angles = [0.0] * config.n_disks
    for h in hyps:
        if not h.deferred:
            angles[h.disk_index - 1] = ANGLE_SIGN[h.direction] * 90.0
    return angles


def step2_tendon(target: Curve3D, hyps: list[DiskHypothesis],
                 config: ManipulatorConfig, params: MatchParams = MatchParams(),
                 cache: WarmStartCache | None = None) -> SearchTrace:
    """Tendon displacement minimizing the curvature-profile RMSE.

    The identified disks sit at full deflection in their hypothesized
    directions while the displacement is searched; the curvature profile is
    nearly independent of the eventual rotation magnitudes.
    """
    cache = cache if cache is not None else WarmStartCache()
    target_profile = analysis_profile(target, config, params)
    angles = _full_deflection_angles(hyps, config)

    def objective(delta: float) -> float:
        act = ActuationState(tendon_mm=delta, disk_angles_deg=tuple(angles))
        try:
            shape = forward(config, act, cache)
        except SolverNotConverged as exc:
            raise _relabel(f"step2 (tendon {delta:.2f} mm)", exc) from exc
        return rmse_curvature(target_profile, _shape_profile(shape, config, params))

    spec = GoldenSearchSpec(lo=0.0, hi=TENDON_MAX_MM, tol=params.tendon_tol_mm,
                            max_evals=params.max_evals)
    return golden_section(objective, spec, seed_points=[0.0])


def step3_angles(target: Curve3D, hyps: list[DiskHypothesis], tendon_mm: float,
                 config: ManipulatorConfig, params: MatchParams = MatchParams(),
                 cache: WarmStartCache | None = None,
                 angles_out: list[float] | None = None) -> list[SearchTrace]:
    """Per-disk rotation magnitudes, proximal to distal, against shape RMSE.

    While solving disk i the objective is restricted to disks 1..i+2 (its
    zone of influence) except for the last hypothesis, which matches the
    whole disk chain.  Later hypotheses hold full deflection until their
    turn.  Solved angles are written into ``angles_out`` when given.
    """
    cache = cache if cache is not None else WarmStartCache()
    target_centers = corresponding_centers(target, config.n_disks)
    angles = _full_deflection_angles(hyps, config)
    active = sorted((h for h in hyps if not h.deferred),
                    key=lambda h: h.source_sign_change.s_pos)
    traces: list[SearchTrace] = []
    for k, hyp in enumerate(active):
        last = k == len(active) - 1
        hi_disk = config.n_disks if last else min(hyp.disk_index + 2, config.n_disks)
        index_range = (1, hi_disk)
        sign = ANGLE_SIGN[hyp.direction]

        def objective(magnitude: float) -> float:
            trial = list(angles)
            trial[hyp.disk_index - 1] = sign * magnitude
            act = ActuationState(tendon_mm=tendon_mm, disk_angles_deg=tuple(trial))
            try:
                shape = forward(config, act, cache)
            except SolverNotConverged as exc:
                raise _relabel(f"step3 (disk {hyp.disk_index} at {magnitude:.1f} deg)",
                               exc) from exc
            return rmse_shape(target_centers, shape, index_range, config.n_disks)

        spec = GoldenSearchSpec(lo=0.0, hi=90.0, tol=params.angle_quantize_deg,
                                quantize=params.angle_quantize_deg,
                                max_evals=params.max_evals)
        trace = golden_section(objective, spec, seed_points=[abs(angles[hyp.disk_index - 1])])
        angles[hyp.disk_index - 1] = sign * trace.best_x
        traces.append(trace)
    if angles_out is not None:
        angles_out[:] = angles
    return traces


def step4_tip(target: Curve3D, state: ActuationState, config: ManipulatorConfig,
              params: MatchParams = MatchParams(),
              cache: WarmStartCache | None = None) -> SearchTrace:
    """Penultimate-disk angle minimizing shape RMSE over the tip region."""
    cache = cache if cache is not None else WarmStartCache()
    target_centers = corresponding_centers(target, config.n_disks)
    tip_disk = config.n_disks - 1
    index_range = (config.n_disks - 2, config.n_disks)

    def objective(angle: float) -> float:
        act = state.with_angle(tip_disk, angle)
        try:
            shape = forward(config, act, cache)
        except SolverNotConverged as exc:
            raise _relabel(f"step4 (disk {tip_disk} at {angle:.1f} deg)", exc) from exc
        return rmse_shape(target_centers, shape, index_range, config.n_disks)

    b = params.tip_bracket_deg
    spec = GoldenSearchSpec(lo=-b, hi=b, tol=params.angle_quantize_deg,
                            quantize=params.angle_quantize_deg,
                            max_evals=params.max_evals)
    entry = state.disk_angles_deg[tip_disk - 1]
    return golden_section(objective, spec, seed_points=[entry])


def match_shape(target: Curve3D, config: ManipulatorConfig,
                params: MatchParams = MatchParams()) -> MatchResult:
    """Run the four matching steps and assemble the recovered actuation."""
    cache = WarmStartCache()
    hyps = step1_identify(target, config, params)
    trace2 = step2_tendon(target, hyps, config, params, cache)
    tendon_mm = float(trace2.best_x)

    angles = _full_deflection_angles(hyps, config)
    traces3 = step3_angles(target, hyps, tendon_mm, config, params, cache,
                           angles_out=angles)
    state = ActuationState(tendon_mm=tendon_mm, disk_angles_deg=tuple(angles))

    trace4 = step4_tip(target, state, config, params, cache)
    tip_disk = config.n_disks - 1
    state = state.with_angle(tip_disk, float(trace4.best_x))

    try:
        attained = forward(config, state, cache)
    except SolverNotConverged as exc:
        raise _relabel("final", exc) from exc
    target_profile = analysis_profile(target, config, params)
    return MatchResult(
        hypotheses=hyps,
        tendon_mm=state.tendon_mm,
        disk_angles_deg=state.disk_angles_deg,
        step2_trace=trace2,
        step3_traces=traces3,
        step4_trace=trace4,
        shape_rmse_cm=rmse_shape(target, attained, (0, config.n_disks), config.n_disks),
        curvature_rmse_per_cm=rmse_curvature(
            target_profile, _shape_profile(attained, config, params)),
        tip_error_mm=tip_error(target, attained, config.n_disks),
        attained_shape=attained,
    )
