"""Command-line front end.

Subcommands: simulate | ring | ellipse-branch | stability | line-threshold
| stripe | classify.  Configuration comes from an INI file (sections per
module) merged with repeatable ``--set section.key=value`` overrides;
flag overrides win over file values and the effective configuration is
echoed into the output directory.  Exit codes: 0 success, 2 invalid
configuration or unreadable input, 3 runtime failure, 4 solver failure
(the error name is printed on standard error).

Sweeps: entries in the ``[sweep]`` section (key = parameter path, value =
comma-separated list) run ``simulate`` once per point of the cartesian
product.  Each point writes to its own subdirectory (values in the name
with 6-decimal formatting) and draws its seed as
``seed XOR splitmix64(point_index)``, so points are independent of their
execution order.  ``--threads`` / ``ANISOSWARM_THREADS`` set the compute
threads of the pair kernel; files are written atomically (write-temp,
rename) and never shared between points.
"""

from __future__ import annotations

import argparse
import configparser
import itertools
import json
import os
import sys
from dataclasses import dataclass

from . import discrete, equilibria, metrics, sim
from .errors import AnisoswarmError, FileError, InvalidConfig, SolverError
from .forces import ForceParams
from .tensor import (Circular, Homogeneous, PiecewiseGrid, SinusoidalAngle,
                     TensorFieldSpec)

# schema: section -> key -> (type, default); booleans are not needed so far
SCHEMA = {
    "forces": {
        "alpha": (float, 270.0), "beta": (float, 0.1), "gamma": (float, 35.0),
        "e_A": (float, 95.0), "e_R": (float, 100.0),
        "delta_A": (float, 1.0), "delta_R": (float, 1.0), "cutoff": (float, 0.5),
    },
    "tensor": {
        "chi": (float, 1.0), "direction": (str, "homogeneous"),
        "theta": (float, 0.0), "center_x": (float, 0.5), "center_y": (float, 0.5),
        "amplitude": (float, 0.5), "wave_x": (float, 1.0), "wave_y": (float, 0.0),
        "grid_path": (str, ""),
    },
    "domain": {"kind": (str, "torus")},
    "sim": {
        "n_particles": (int, 600), "dt": (float, 0.2),
        "integrator": (str, "euler"), "abs_tol": (float, 1e-6),
        "rel_tol": (float, 1e-6), "t_end": (float, 2000.0),
        "stationarity_tol": (float, 1e-9), "seed": (int, 0),
        "initial": (str, "gaussian"), "mean_x": (float, 0.5),
        "mean_y": (float, 0.5), "sigma": (float, 0.005),
        "center_x": (float, 0.5), "center_y": (float, 0.5),
        "radius": (float, 0.005), "elongation": (float, 0.0),
        "path": (str, ""), "perturbation_delta": (float, 0.0),
        "snapshot_every": (int, 0),
    },
    "quadrature": {
        "panels": (int, 64), "nodes_per_panel": (int, 8),
        "refinement_tol": (float, 1e-10),
    },
    "discrete": {
        "n_particles": (int, 600), "ansatz": (str, "line"),
        "R": (float, -1.0), "r": (float, 0.0), "chi": (float, 1.0),
        "eps_zero": (float, 1e-8), "residual_gate": (float, 1e-8),
        "tol_chi": (float, 0.01), "chi_values": (str, "0.0,0.5,1.0"),
        "branch_points": (int, 32), "branch_discrete_points": (int, 8),
    },
    "stripe": {"delta": (float, 0.05), "x1": (float, 0.01)},
    "classify": {
        "link_radius": (float, 0.02), "vertical_extent_min": (float, 0.9),
        "horizontal_std_max": (float, 0.01), "ring_eccentricity_max": (float, 0.1),
        "ring_radial_spread_max": (float, 0.1),
        "ellipse_eccentricity_min": (float, 0.1),
        "boundary_distance_max": (float, 0.1),
    },
    "output": {"dir": (str, "out")},
}
SWEEP_CAP = 10_000
_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def point_seed(base_seed: int, index: int) -> int:
    """Per-sweep-point seed: base XOR splitmix64(index)."""
    return (base_seed & _M64) ^ _splitmix64(index)


@dataclass
class RunConfig:
    values: dict          # {(section, key): value}
    sweep: list           # [(section, key, [values...])]
    out_dir: str

    def get(self, section: str, key: str):
        return self.values[(section, key)]

    def with_value(self, section: str, key: str, value) -> "RunConfig":
        vals = dict(self.values)
        vals[(section, key)] = value
        return RunConfig(values=vals, sweep=self.sweep, out_dir=self.out_dir)


def _coerce(section: str, key: str, raw: str):
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise InvalidConfig(f"unknown configuration key {section}.{key}")
    typ, _ = SCHEMA[section][key]
    try:
        return typ(raw)
    except ValueError as exc:
        raise InvalidConfig(f"{section}.{key}: cannot parse {raw!r} as {typ.__name__}") from exc


def load_config(path: str | None, sets: list[str]) -> RunConfig:
    """Defaults, then INI file, then --set overrides (which win)."""
    values = {(sec, key): default
              for sec, keys in SCHEMA.items() for key, (_, default) in keys.items()}
    sweep = []
    if path is not None:
        if not os.path.isfile(path):
            raise FileError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                if section == "sweep":
                    sweep.append(_parse_sweep_axis(key, raw))
                else:
                    values[(section, key)] = _coerce(section, key, raw)
    for item in sets:
        if "=" not in item:
            raise InvalidConfig(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        if dotted.strip() == "sweep":
            raise InvalidConfig("sweep axes can only be set in the config file")
        if "." not in dotted:
            raise InvalidConfig(f"--set expects section.key=value, got {item!r}")
        section, key = dotted.strip().split(".", 1)
        values[(section, key)] = _coerce(section, key, raw.strip())
    size = 1
    for _, _, vals in sweep:
        size *= len(vals)
    if size > SWEEP_CAP:
        raise InvalidConfig(f"sweep has {size} points, cap is {SWEEP_CAP}")
    return RunConfig(values=values, sweep=sweep, out_dir=values[("output", "dir")])


def _parse_sweep_axis(dotted: str, raw: str):
    if "." not in dotted:
        raise InvalidConfig(f"sweep key must be section.key, got {dotted!r}")
    section, key = dotted.split(".", 1)
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise InvalidConfig(f"sweep refers to unknown parameter {dotted}")
    vals = [_coerce(section, key, v.strip()) for v in raw.split(",") if v.strip()]
    if not vals:
        raise InvalidConfig(f"sweep axis {dotted} has no values")
    return section, key, vals


# ---------------------------------------------------------------------------
# config -> domain objects

def build_force_params(cfg: RunConfig) -> ForceParams:
    g = lambda k: cfg.get("forces", k)
    return ForceParams(alpha=g("alpha"), beta=g("beta"), gamma=g("gamma"),
                       e_A=g("e_A"), e_R=g("e_R"), delta_A=g("delta_A"),
                       delta_R=g("delta_R"), cutoff=g("cutoff"))


def build_field(cfg: RunConfig) -> TensorFieldSpec:
    g = lambda k: cfg.get("tensor", k)
    kind = g("direction")
    if kind == "homogeneous":
        direction = Homogeneous(theta=g("theta"))
    elif kind == "circular":
        direction = Circular(center=(g("center_x"), g("center_y")))
    elif kind == "sinusoidal":
        direction = SinusoidalAngle(amplitude=g("amplitude"),
                                    wavevector=(g("wave_x"), g("wave_y")))
    elif kind == "grid":
        direction = PiecewiseGrid.from_csv(g("grid_path"))
    else:
        raise InvalidConfig(f"unknown tensor.direction {kind!r}")
    return TensorFieldSpec(chi=g("chi"), direction=direction)


def build_domain(cfg: RunConfig) -> sim.DomainSpec:
    return sim.DomainSpec(kind=cfg.get("domain", "kind"))


def build_sim_config(cfg: RunConfig) -> sim.SimConfig:
    g = lambda k: cfg.get("sim", k)
    integ_name = g("integrator")
    if integ_name == "euler":
        integrator = sim.EulerFixed()
    elif integ_name == "dopri":
        integrator = sim.DormandPrinceAdaptive(abs_tol=g("abs_tol"),
                                               rel_tol=g("rel_tol"))
    else:
        raise InvalidConfig(f"unknown sim.integrator {integ_name!r}")
    init_name = g("initial")
    if init_name == "gaussian":
        initial = sim.Gaussian(mean=(g("mean_x"), g("mean_y")), sigma=g("sigma"))
    elif init_name == "uniform":
        initial = sim.UniformRandom()
    elif init_name == "ring":
        initial = sim.RingEquiangular(center=(g("center_x"), g("center_y")),
                                      radius=g("radius"))
    elif init_name == "ellipse":
        initial = sim.EllipseEquiangular(center=(g("center_x"), g("center_y")),
                                         radius=g("radius"),
                                         elongation=g("elongation"))
    elif init_name == "line":
        initial = sim.LineUniform(center=(g("center_x"), g("center_y")))
    elif init_name == "file":
        initial = sim.FromFile(path=g("path"))
    else:
        raise InvalidConfig(f"unknown sim.initial {init_name!r}")
    return sim.SimConfig(n_particles=g("n_particles"), dt=g("dt"),
                         integrator=integrator, t_end=g("t_end"),
                         stationarity_tol=g("stationarity_tol"), seed=g("seed"),
                         initial=initial,
                         perturbation_delta=g("perturbation_delta"),
                         snapshot_every=g("snapshot_every"))


def build_quadrature(cfg: RunConfig) -> equilibria.QuadratureSpec:
    g = lambda k: cfg.get("quadrature", k)
    return equilibria.QuadratureSpec(panels=g("panels"),
                                     nodes_per_panel=g("nodes_per_panel"),
                                     refinement_tol=g("refinement_tol"))


def build_classifier(cfg: RunConfig) -> metrics.ClassifierConfig:
    g = lambda k: cfg.get("classify", k)
    return metrics.ClassifierConfig(
        link_radius=g("link_radius"),
        vertical_extent_min=g("vertical_extent_min"),
        horizontal_std_max=g("horizontal_std_max"),
        ring_eccentricity_max=g("ring_eccentricity_max"),
        ring_radial_spread_max=g("ring_radial_spread_max"),
        ellipse_eccentricity_min=g("ellipse_eccentricity_min"),
        boundary_distance_max=g("boundary_distance_max"))


# ---------------------------------------------------------------------------
# output helpers

def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: str, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _echo_config(cfg: RunConfig, out_dir: str) -> None:
    def fmt(v):
        return format(v, ".17g") if isinstance(v, float) else str(v)

    lines = []
    for section in SCHEMA:
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {fmt(cfg.get(section, key))}" for key in SCHEMA[section])
        lines.append("")
    if cfg.sweep:
        lines.append("[sweep]")
        lines.extend(f"{s}.{k} = {','.join(fmt(v) for v in vals)}"
                     for s, k, vals in cfg.sweep)
        lines.append("")
    _atomic_write(os.path.join(out_dir, "config.resolved.ini"), "\n".join(lines))


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands

def _run_single_simulation(cfg: RunConfig, out_dir: str) -> metrics.PatternSummary:
    params = build_force_params(cfg)
    field = build_field(cfg)
    domain = build_domain(cfg)
    sim_cfg = build_sim_config(cfg)
    _ensure_out(out_dir)
    _echo_config(cfg, out_dir)
    result = sim.simulate(sim_cfg, field, params, domain)
    traj_path = os.path.join(out_dir, "trajectory.csv")
    tmp = f"{traj_path}.tmp.{os.getpid()}"
    sim.write_trajectory_csv(tmp, result.snapshots)
    os.replace(tmp, traj_path)
    summary_path = os.path.join(out_dir, "summary.json")
    tmp = f"{summary_path}.tmp.{os.getpid()}"
    sim.write_summary_json(tmp, result)
    os.replace(tmp, summary_path)
    pattern = metrics.classify(result.final.positions, domain, build_classifier(cfg))
    _write_json(os.path.join(out_dir, "pattern.json"), pattern.to_json_dict())
    return pattern


def cmd_simulate(cfg: RunConfig) -> int:
    if not cfg.sweep:
        pattern = _run_single_simulation(cfg, cfg.out_dir)
        print(f"simulate: final pattern {pattern.pattern_class} "
              f"(eccentricity={pattern.eccentricity:.4f}, "
              f"clusters={pattern.cluster_count})")
        return 0
    axes = [[(s, k, v) for v in vals] for s, k, vals in cfg.sweep]
    points = list(itertools.product(*axes))
    base_seed = cfg.get("sim", "seed")
    _ensure_out(cfg.out_dir)
    # points run one after another with the compute threads inside the pair
    # kernel; outputs are per-point directories written atomically, so the
    # points stay independent and reorderable
    for index, assignment in enumerate(points):
        point_cfg = cfg
        names = []
        for section, key, value in assignment:
            point_cfg = point_cfg.with_value(section, key, value)
            names.append(f"{section}.{key}={_fmt_sweep_value(value)}")
        point_cfg = point_cfg.with_value("sim", "seed", point_seed(base_seed, index))
        name = "_".join(names)
        pattern = _run_single_simulation(point_cfg, os.path.join(cfg.out_dir, name))
        print(f"simulate[{name}]: final pattern {pattern.pattern_class} "
              f"(eccentricity={pattern.eccentricity:.4f})")
    return 0


def _fmt_sweep_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def cmd_ring(cfg: RunConfig) -> int:
    params = build_force_params(cfg)
    quad = build_quadrature(cfg)
    n = cfg.get("discrete", "n_particles")
    continuous = equilibria.solve_ring_radius(params, quad)
    discrete_r = discrete.solve_discrete_ring(n, params)
    rel = abs(continuous - discrete_r) / discrete_r
    out = _ensure_out(cfg.out_dir)
    _echo_config(cfg, out)
    _write_json(os.path.join(out, "ring.json"),
                {"continuous_radius": continuous,
                 "discrete_radius": discrete_r,
                 "n_particles": n,
                 "relative_difference": rel})
    print(f"ring: continuous R={continuous:.6e}, discrete R_{n}={discrete_r:.6e} "
          f"(relative difference {100 * rel:.3f}%)")
    return 0


def cmd_ellipse_branch(cfg: RunConfig) -> int:
    params = build_force_params(cfg)
    quad = build_quadrature(cfg)
    out = _ensure_out(cfg.out_dir)
    _echo_config(cfg, out)
    branch = equilibria.ellipse_branch(params, cfg.get("discrete", "branch_points"), quad)
    cont_path = os.path.join(out, "branch_continuous.csv")
    tmp = f"{cont_path}.tmp.{os.getpid()}"
    equilibria.export_branch_csv(tmp, branch, params, quad)
    os.replace(tmp, cont_path)

    n = cfg.get("discrete", "n_particles")
    n_disc = cfg.get("discrete", "branch_discrete_points")
    r_bar = branch.tuples[-1].r
    fmt = lambda x: format(float(x), ".17g")
    lines = ["r,R,chi,eccentricity"]
    for i in range(n_disc):
        # the discrete branch ends below the continuous r_bar at finite N;
        # emit tuples until the root disappears
        r = 0.9 * r_bar * i / max(1, n_disc - 1)
        try:
            R, chi = discrete.solve_discrete_ellipse(n, r, params)
        except SolverError:
            break
        lines.append(",".join(fmt(v) for v in
                              (r, R, chi, equilibria.eccentricity(R, r))))
    _atomic_write(os.path.join(out, "branch_discrete.csv"), "\n".join(lines) + "\n")

    first, last = branch.tuples[0], branch.tuples[-1]
    print(f"ellipse-branch: {len(branch.tuples)} tuples from "
          f"(R={first.R:.6e}, r=0, chi={first.chi:.4f}) to "
          f"(R=0, r={last.r:.6e}, chi={last.chi:.4f})")
    return 0


def cmd_stability(cfg: RunConfig) -> int:
    params = build_force_params(cfg)
    domain = build_domain(cfg)
    g = lambda k: cfg.get("discrete", k)
    n = g("n_particles")
    kind = g("ansatz")
    center = (cfg.get("sim", "center_x"), cfg.get("sim", "center_y"))
    if kind == "line":
        spec = discrete.AnsatzSpec(kind="line", n_particles=n, center=center)
    elif kind == "ring":
        R = g("R")
        if R < 0:
            R = discrete.solve_discrete_ring(n, params)
        spec = discrete.AnsatzSpec(kind="ring", n_particles=n, center=center, R=R)
    elif kind == "ellipse":
        R, _ = discrete.solve_discrete_ellipse(n, g("r"), params)
        spec = discrete.AnsatzSpec(kind="ellipse", n_particles=n, center=center,
                                   R=R, r=g("r"))
    else:
        raise InvalidConfig(f"unknown discrete.ansatz {kind!r}")
    chis = [float(v) for v in g("chi_values").split(",") if v.strip()]
    rows = []
    for chi in chis:
        rows.append((chi, discrete.stability(spec, chi, params, domain,
                                             eps_zero=g("eps_zero"),
                                             residual_gate=g("residual_gate"))))
    out = _ensure_out(cfg.out_dir)
    _echo_config(cfg, out)
    csv_path = os.path.join(out, "stability.csv")
    tmp = f"{csv_path}.tmp.{os.getpid()}"
    discrete.export_stability_csv(tmp, rows)
    os.replace(tmp, csv_path)
    summary = ", ".join(f"chi={chi:g}:{rep.classification}" for chi, rep in rows)
    print(f"stability[{kind}, N={n}]: {summary}")
    return 0


def cmd_line_threshold(cfg: RunConfig) -> int:
    params = build_force_params(cfg)
    g = lambda k: cfg.get("discrete", k)
    n = g("n_particles")
    chi_star = discrete.line_stability_threshold(
        n, params, tol_chi=g("tol_chi"),
        center=(cfg.get("sim", "center_x"), cfg.get("sim", "center_y")),
        eps_zero=g("eps_zero"))
    out = _ensure_out(cfg.out_dir)
    _echo_config(cfg, out)
    _write_json(os.path.join(out, "threshold.json"),
                {"chi_star": chi_star, "n_particles": n, "tol_chi": g("tol_chi")})
    print(f"line-threshold: chi* = {chi_star:.4f} (N={n}, tol={g('tol_chi'):g})")
    return 0


def cmd_stripe(cfg: RunConfig) -> int:
    params = build_force_params(cfg)
    quad = build_quadrature(cfg)
    delta = cfg.get("stripe", "delta")
    x1 = cfg.get("stripe", "x1")
    chi = cfg.get("tensor", "chi")
    value = equilibria.stripe_condition(delta, x1, params, chi, quad)
    verdict = "not an equilibrium" if abs(value) > 1e-10 else "condition satisfied"
    out = _ensure_out(cfg.out_dir)
    _echo_config(cfg, out)
    _write_json(os.path.join(out, "stripe.json"),
                {"delta": delta, "x1": x1, "chi": chi,
                 "condition_value": value, "verdict": verdict})
    print(f"stripe: condition value {value:.6e} at delta={delta:g}, "
          f"x1={x1:g} -> {verdict}")
    return 0


def cmd_classify(cfg: RunConfig, input_path: str) -> int:
    positions = sim.read_positions_csv(input_path)
    domain = build_domain(cfg)
    pattern = metrics.classify(positions, domain, build_classifier(cfg))
    out = _ensure_out(cfg.out_dir)
    _write_json(os.path.join(out, "pattern.json"), pattern.to_json_dict())
    print(pattern.to_json())
    return 0


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisoswarm",
        description="Anisotropic interacting-particle simulation and "
                    "equilibrium analysis")
    parser.add_argument("command",
                        choices=["simulate", "ring", "ellipse-branch",
                                 "stability", "line-threshold", "stripe",
                                 "classify"])
    parser.add_argument("input", nargs="?",
                        help="positions CSV (classify only)")
    parser.add_argument("--config", default=None, help="INI configuration file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override section.key=value (repeatable)")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("ANISOSWARM_THREADS", "0")) or None,
                        help="worker/compute threads (default ANISOSWARM_THREADS)")
    parser.add_argument("--seed", type=int, default=None, help="override sim.seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg = cfg.with_value("sim", "seed", args.seed)
        if args.out is not None:
            cfg = RunConfig(values=cfg.values, sweep=cfg.sweep, out_dir=args.out)
        if args.threads:
            import numba
            numba.set_num_threads(max(1, args.threads))
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "ring":
            return cmd_ring(cfg)
        if args.command == "ellipse-branch":
            return cmd_ellipse_branch(cfg)
        if args.command == "stability":
            return cmd_stability(cfg)
        if args.command == "line-threshold":
            return cmd_line_threshold(cfg)
        if args.command == "stripe":
            return cmd_stripe(cfg)
        if args.command == "classify":
            if not args.input:
                raise InvalidConfig("classify needs a positions CSV argument")
            return cmd_classify(cfg, args.input)
        raise InvalidConfig(f"unknown command {args.command}")
    except (InvalidConfig, FileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 4
    except AnisoswarmError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failures
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
