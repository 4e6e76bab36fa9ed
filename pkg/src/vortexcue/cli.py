"""Command-line entry point: ``vortexcue <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import accuracy, empirical, furvision, physics, planner, service, sim, targeting, waveform
from .errors import VortexCueError


def _grids(args):
    return empirical.load_grid_dir(args.grids) if args.grids else empirical.load_grids()


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, sort_keys=True, default=_jsonable))
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _pose(args) -> targeting.PoseState:
    if args.pose:
        return targeting.PoseState.from_dict(json.loads(Path(args.pose).read_text()))
    return targeting.PoseState(args.avrg_pos, args.euler, args.head_pos, args.head_vel)


def cmd_design(args):
    speakers = physics.SpeakerSpec(args.n, args.speaker_mm, args.disp_mm, args.peak_velocity or 0.0)
    if args.b is not None:
        speakers = physics.SpeakerSpec(args.n, args.speaker_mm, args.disp_mm,
                                       waveform.peak_piston_velocity(args.b))
    nozzle = physics.design_aperture(speakers, args.f)
    ring = physics.ring_momentum(speakers, nozzle, physics.AirProperties(args.air_density))
    report = physics.derivation_report(speakers, nozzle)
    payload = {
        "aperture_mm": nozzle.aperture_mm,
        "slug_length_mm": nozzle.slug_length_mm,
        "formation_number": nozzle.formation_number,
        "formation_in_range": nozzle.in_recommended_range,
        "length_ratio": report.length_ratio,
        "peak_velocity_mm_s": speakers.peak_velocity_mm_s,
        "exit_velocity_m_s": ring.exit_velocity,
        "momentum_kg_m_s": ring.momentum,
    }
    text = f"aperture {nozzle.aperture_mm:.2f} mm, slug {nozzle.slug_length_mm:.2f} mm, L/d {report.length_ratio:.3f}"
    if not nozzle.in_recommended_range:
        text += " (warning: formation number outside 3.6-4.5)"
    if speakers.peak_velocity_mm_s:
        text += f"\nexit velocity {ring.exit_velocity:.2f} m/s, momentum {ring.momentum:.3e} kg m/s"
    _emit(args, payload, text)


def cmd_waveform(args):
    train = waveform.pulse_train(args.amp, args.pulse_ms / 1000, args.count, args.interval_ms / 1000,
                                 args.sample_rate, args.lead_ms / 1000, args.tail_ms / 1000)
    w = waveform.apply_rounding(train, args.b)
    out = Path(args.out_dir) / args.out if args.out_dir else Path(args.out)
    waveform.export_pcm(w, out)
    payload = {"path": str(out), "samples": len(w.samples), "peak_v": float(np.max(w.samples)),
               "sample_rate": w.sample_rate, "b": w.roundness}
    _emit(args, payload, f"wrote {out} ({len(w.samples)} samples, peak {payload['peak_v']:.3f} V)")


def cmd_aim(args):
    res = targeting.check_alignment(_pose(args), args.tolerance)
    payload = {"off_axis_mm": res.off_axis_distance, "boresight_deg": res.boresight_angle,
               "aligned": res.aligned, "range_mm": res.range_mm}
    _emit(args, payload, f"off-axis {res.off_axis_distance:.1f} mm, angle {res.boresight_angle:.2f} deg, "
                         f"{'aligned' if res.aligned else 'NOT aligned'}")


def cmd_intercept(args):
    aim, t = targeting.solve_intercept(_pose(args), args.ring_speed)
    _emit(args, {"aim_mm": aim, "time_of_flight_s": t},
          f"time of flight {t:.3f} s, aim ({aim[0]:.1f}, {aim[1]:.1f}, {aim[2]:.1f}) mm")


def cmd_hitprob(args):
    if args.offset_mm is not None:
        model = accuracy.HitModel((args.offset_mm, 0.0), args.std_mm or 0.0, args.ring_radius)
    else:
        model = accuracy.hit_model_at(_grids(args), args.distance_mm, args.b, args.ring_radius, std=args.std_mm)
    head = accuracy.head_from_anthropometry(args.orientation)
    p = accuracy.hit_probability(model, head, args.samples, args.seed)
    _emit(args, {"probability": p, "mean_offset_mm": model.mean_offset, "std_mm": model.std},
          f"hit probability {p:.4f}")


def cmd_plan(args):
    req = planner.PlanRequest(args.distance_mm, args.min_rate, args.max_time_s, args.objective)
    res = planner.plan(_grids(args), req)
    if res.feasible:
        text = f"b = {res.chosen_b:g} (feasible: {', '.join(f'{b:g}' for b in res.feasible_set)})"
    else:
        text = "infeasible" + (f"; best-rate fallback b = {res.fallback_b:g}" if res.fallback_b else "")
    # plan always answers in JSON; the summary goes to stderr
    print(json.dumps(res.to_dict(), sort_keys=True))
    if not args.json:
        print(text, file=sys.stderr)


def cmd_simulate(args):
    events = sim.simulate(sim.load_scenario(args.scenario), _grids(args))
    text = sim.event_log_text(events)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_furscan(args):
    for rep in furvision.analyze_manifest(args.manifest):
        if args.json:
            print(json.dumps({"frame": rep.frame, "hit_px": rep.hit, "gap_mm": rep.gap_mm}))
        else:
            print(rep.line())


def cmd_serve(args):
    registry = service.load_registry(args.registry) if args.registry else {"a": service.DeviceEntry()}
    logging.basicConfig(level=logging.INFO)
    service.serve(args.port, registry, args.out_dir, args.host)


def _pose_flags(p):
    p.add_argument("--pose", help="pose JSON file")
    p.add_argument("--avrg-pos", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("X", "Y", "Z"))
    p.add_argument("--euler", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("YAW", "PITCH", "ROLL"))
    p.add_argument("--head-pos", type=float, nargs=3, default=(1000.0, 0.0, 0.0), metavar=("X", "Y", "Z"))
    p.add_argument("--head-vel", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("VX", "VY", "VZ"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--grids", help="directory with study1/sound/accuracy/direction CSVs")

    parser = argparse.ArgumentParser(prog="vortexcue", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common], help="size the aperture")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--speaker-mm", type=float, required=True)
    p.add_argument("--disp-mm", type=float, required=True)
    p.add_argument("--f", type=float, default=physics.DEFAULT_FORMATION_NUMBER)
    p.add_argument("--peak-velocity", type=float, help="peak piston velocity, mm/s")
    p.add_argument("--b", type=float, help="take the peak velocity from the calibration at this b")
    p.add_argument("--air-density", type=float, default=physics.DEFAULT_AIR_DENSITY)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("waveform", parents=[common], help="render a drive waveform to WAV")
    p.add_argument("--amp", type=float, default=waveform.DEFAULT_AMPLITUDE)
    p.add_argument("--pulse-ms", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--interval-ms", type=float, default=1000.0)
    p.add_argument("--lead-ms", type=float, default=1.0)
    p.add_argument("--tail-ms", type=float, default=1.0)
    p.add_argument("--sample-rate", type=int, default=waveform.DEFAULT_SAMPLE_RATE)
    p.add_argument("--out", default="pulse.wav")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_waveform)

    p = sub.add_parser("aim", parents=[common], help="check boresight alignment")
    _pose_flags(p)
    p.add_argument("--tolerance", type=float, default=targeting.DEFAULT_TOLERANCE_MM)
    p.set_defaults(func=cmd_aim)

    p = sub.add_parser("intercept", parents=[common], help="lead a moving head")
    _pose_flags(p)
    p.add_argument("--ring-speed", type=float, default=physics.DEFAULT_RING_SPEED, help="m/s")
    p.set_defaults(func=cmd_intercept)

    p = sub.add_parser("hitprob", parents=[common], help="probability of hitting a head")
    p.add_argument("--distance-mm", type=float, default=2000.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--offset-mm", type=float, help="explicit mean offset instead of the grid")
    p.add_argument("--std-mm", type=float)
    p.add_argument("--ring-radius", type=float, default=accuracy.DEFAULT_RING_RADIUS)
    p.add_argument("--orientation", choices=("frontal", "lateral", "top"), default="frontal")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_hitprob)

    p = sub.add_parser("plan", parents=[common], help="choose the roundness coefficient")
    p.add_argument("--distance-mm", type=float, required=True)
    p.add_argument("--min-rate", type=float, default=1.0)
    p.add_argument("--max-time-s", type=float)
    p.add_argument("--objective", choices=planner.OBJECTIVES, default="comfort")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="write the event log here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("furscan", parents=[common], help="analyse fur frames")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_furscan)

    p = sub.add_parser("serve", parents=[common], help="run the trigger service")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--registry", help="device registry JSON")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (VortexCueError, OSError, json.JSONDecodeError) as exc:
        print(f"vortexcue {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
