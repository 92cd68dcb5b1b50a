"""Tasks shared by the command line and by config-driven runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, io
from . import nash_kuiper as nk
from . import pattern as pat
from . import surfaces as surf
from .chart import ChartMap, grid_points
from .corrugation import Submersion, corrugation_process, verify_cp_properties
from .errors import ConfigError
from .relations import immersion_loop_family, relation_margins

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class TaskResult:
    """Files written, pass/fail and a short CSV-style report."""

    outputs: list = field(default_factory=list)
    ok: bool = True
    report: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.ok else EXIT_FAIL


def _alpha_spec(spec) -> float:
    if isinstance(spec, str):
        if spec.strip() == "alpha0":
            return pat.alpha0()
        try:
            spec = float(spec)
        except ValueError:
            raise ConfigError(f"alpha must be a number or 'alpha0', got {spec!r}") from None
    if not (math.isfinite(spec) and spec >= 0.0):
        raise ConfigError("alpha must be finite and >= 0")
    return float(spec)


def pattern_task(out, alpha="alpha0", samples: int = 257) -> TaskResult:
    """CSV t,c1,c2,c3,Kc,Ks over t = i / (samples - 1)."""
    a = _alpha_spec(alpha)
    if samples < 2:
        raise ConfigError("samples must be >= 2")
    t = np.linspace(0.0, 1.0, int(samples))
    c = pat.pattern_c(a, t)
    kc, ks = pat.k_pair(np.full_like(t, a), t)
    rows = ([t[i], c[i, 0], c[i, 1], c[i, 2], kc[i], ks[i]] for i in range(t.size))
    path = io.write_csv(out, ["t", "c1", "c2", "c3", "Kc", "Ks"], rows, formatter=io.fmt17)
    return TaskResult([path])


def parse_pi(spec: str, m: int) -> Submersion:
    """'axis:j' (0-based) or comma separated coefficients of a linear form."""
    spec = spec.strip()
    try:
        if spec.startswith("axis:"):
            j = int(spec[5:])
            if not 0 <= j < m:
                raise ConfigError(f"axis {j} out of range for a {m}-dimensional chart")
            return Submersion.axis(j, m)
        coeffs = [float(v) for v in spec.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse --pi {spec!r}") from None
    if len(coeffs) != m:
        raise ConfigError(f"--pi needs {m} coefficients")
    return Submersion.linear(coeffs)


def kuiper_setup(f0: ChartMap, pi_spec: str, alpha) -> tuple[Submersion, object]:
    """Codimension-one family with constant amplitude whose average is df0(u)."""
    sub = parse_pi(pi_spec, f0.m)
    a = _alpha_spec(alpha)

    def w(X):
        return np.einsum("...nm,...m->...n", f0.jacobian(X), np.broadcast_to(sub.u(X), X.shape))

    fam = immersion_loop_family(f0, sub, w, alpha_fn=lambda X: np.full(X.shape[:-1], a))
    return sub, fam


def cp_task(input_path, pi_spec: str, alpha, N: float, out) -> TaskResult:
    f0 = io.read_grid_csv(input_path)
    sub, fam = kuiper_setup(f0, pi_spec, alpha)
    f1 = corrugation_process(f0, sub, fam, N)
    path = io.write_grid_csv(f1, out, f0.grid_res)
    return TaskResult([path])


def cp_report_task(N: float, res: int = 257, input_path=None, pi_spec="axis:1", alpha="alpha0") -> TaskResult:
    """Property report of one CP: on a grid file when given, else on the conoid family."""
    if input_path is None:
        cfg = surf.ConoidConfig(N=N)
        f0, sub, fam = surf.conoid_map(cfg), Submersion.axis(1, 2), surf.conoid_loop_family(cfg)
    else:
        f0 = io.read_grid_csv(input_path)
        sub, fam = kuiper_setup(f0, pi_spec, alpha)
    f1 = corrugation_process(f0, sub, fam, N)
    rep = verify_cp_properties(f0, f1, sub, fam, N, res=res)
    return TaskResult([], rep.ok, rep.to_csv())


def conoid_config(N: float = 5.5, theta: str = "caption", alpha: str = "caption") -> surf.ConoidConfig:
    theta_fn = {"caption": surf.caption_theta, "theta_max": lambda x: surf.theta_max(np.asarray(x)[..., 1])}
    alpha_fn = {"caption": surf.caption_alpha,
                "alpha0": lambda x: np.full(np.shape(x)[:-1], pat.alpha0()),
                "zero": lambda x: np.zeros(np.shape(x)[:-1])}
    try:
        return surf.ConoidConfig(N=N, theta_fn=theta_fn[theta], alpha_fn=alpha_fn[alpha])
    except KeyError as exc:
        raise ConfigError(f"unknown selector {exc.args[0]!r}") from None


def conoid_task(out, N: float = 5.5, res: int = 513, check_res: int = 513, theta="caption",
                alpha="caption") -> TaskResult:
    """Mesh of the corrugated conoid plus the immersion and quotient report."""
    cfg = conoid_config(N, theta, alpha)
    f1 = surf.conoid_corrugated_map(cfg)
    out = Path(out)
    mesh = io.export_obj(f1, out, res=res)
    sv = surf.min_singular_value(cfg, res=check_res)
    mob = surf.mobius_check(cfg)
    rows = [
        ("min_singular_value", sv["min_singular_value"], 0.0, sv["min_singular_value"] > 0.0),
        ("pinch_min_singular_value", float(np.min(sv["pinch_singular_values"])), 0.0,
         float(np.min(sv["pinch_singular_values"])) > 0.0),
        ("mobius_violation", mob.max_violation, mob.tol, mob.descends),
    ]
    text = io.csv_text(["property", "measured", "bound", "pass"],
                       [(p, m, b, "true" if ok else "false") for p, m, b, ok in rows])
    rep = out.with_name(out.stem + "_report.csv")
    rep.write_text(text)
    return TaskResult([mesh, rep], all(r[3] for r in rows), text)


def rp2_task(out, N: float = 5.5, res: int = 1025) -> TaskResult:
    cfg = conoid_config(N)
    out = Path(out)
    mesh = io.export_obj(surf.rp2_map(cfg), out, res=res)
    x2 = np.linspace(0.0, 1.0, 257)
    worst = 0.0
    for s in (-2.5, 2.5):
        X = np.stack([np.full_like(x2, s), x2], axis=-1)
        worst = max(worst, float(np.max(np.abs(surf.rp2_extension(X, cfg) - surf.sphere_cap(X)))))
    ok = worst <= 1e-9
    text = io.csv_text(["property", "measured", "bound", "pass"],
                       [("boundary_match", worst, 1e-9, "true" if ok else "false")])
    rep = out.with_name(out.stem + "_report.csv")
    rep.write_text(text)
    return TaskResult([mesh, rep], ok, text)


DEMO_MAPS = {
    "torus": (nk.torus_of_revolution, "euclidean", 257),
    "circle": (nk.circle_in_c, "totally_real", 4097),
    "clifford": (nk.clifford_torus, "totally_real", 257),
    "square": (nk.square_in_c2, "totally_real", 257),
}


def torus_task(out_prefix, stages: int = 3, res: int | None = None, demo: str = "torus", target: str | None = None,
               strict: bool = True, n_start: int = 8, n_cap: int = nk.N_CAP, eps_scale: float = 0.1) -> TaskResult:
    """Nash-Kuiper run: diagnostics CSV, run archive and per-stage meshes in <prefix>/."""
    if demo not in DEMO_MAPS:
        raise ConfigError(f"unknown map {demo!r}")
    make, default_target, default_res = DEMO_MAPS[demo]
    f0 = make()
    target = default_target if target is None else target
    res = default_res if res is None else res
    sched = nk.IterationSchedule(stages=stages, eps_scale=eps_scale, n_start=n_start, n_cap=n_cap, strict=strict)
    run = nk.nash_kuiper_run(f0, nk.flat_metric(f0.m, f0.lo, f0.hi), target, sched, res=res)
    out = Path(out_prefix)
    out.mkdir(parents=True, exist_ok=True)
    diag = out / "diagnostics.csv"
    diag.write_text(run.to_csv())
    outputs = [diag, io.save_run(run, out / "run.npz")]
    if f0.n == 3 and f0.m == 2:
        for k, st in enumerate(run.stages):
            outputs.append(io.export_obj(st.V, out / f"stage{k}.obj", periodic=st.periodic))
    text = f"status,{run.status}\nmessage,{run.message}\nsteps,{len(run.steps)}\n"
    return TaskResult(outputs, run.status == "ok", text)


VERIFY_MAPS = {
    "torus": nk.torus_of_revolution,
    "circle": nk.circle_in_c,
    "clifford": nk.clifford_torus,
    "square": nk.square_in_c2,
    "conoid": lambda: surf.conoid_map(),
    "conoid-corrugated": lambda: surf.conoid_corrugated_map(),
}


def relation_task(relation: str, demo: str = "torus", res: int = 65, input_path=None) -> TaskResult:
    """Slice membership counts and the smallest margin on a res^m grid; isometric means flat target."""
    f = io.read_grid_csv(input_path) if input_path is not None else VERIFY_MAPS[demo]()
    X = grid_points(f.lo, f.hi, res)
    mu = nk.flat_metric(f.m, f.lo, f.hi) if relation == "isometric" else None
    margins = relation_margins(f, relation, X, mu)
    members = int(np.sum(margins > 0.0))
    text = io.csv_text(["relation", "points", "members", "min_margin"],
                       [(relation, margins.size, members, float(np.min(margins)))])
    return TaskResult([], members == margins.size, text)


def maslov_task(run_dir, out) -> TaskResult:
    run = io.load_run(run_dir)
    trace = analysis.maslov_argument_series(run)
    pts = run.stages[0].points()
    path = io.write_csv(out, ["x1", "x2", "step", "theta", "alpha", "N", "W_partial"], trace.rows(pts))
    return TaskResult([path], not trace.flagged, f"steps,{len(trace.angles)}\nflagged,{len(trace.flagged)}\n")


def bases_task(run_dir, out=None, stride: int = 3) -> TaskResult:
    run = io.load_run(run_dir)
    rows = analysis.rotation_table(run, stride=stride)
    header = ["step", "N", "residual", "fitted_c", "det_error", "orth_error"]
    data = [(r.step, r.N, r.residual, r.fitted_c, r.det_error, r.orth_error) for r in rows]
    text = io.csv_text(header, data)
    outputs = [io.write_csv(out, header, data)] if out is not None else []
    ok = all(r.det_error <= 1e-9 and r.orth_error <= 1e-10 for r in rows)
    return TaskResult(outputs, ok, text)


def export_task(out, input_path=None, demo: str = "conoid-corrugated", res: int = 257) -> TaskResult:
    f = io.read_grid_csv(input_path) if input_path is not None else VERIFY_MAPS[demo]()
    return TaskResult([io.export_obj(f, out, res=None if input_path is not None else res)])


@dataclass
class PipelineReport:
    task: str
    exit_code: int
    outputs: list
    manifest: Path | None
    report: str = ""


def run_pipeline(config_path) -> PipelineReport:
    """Run the task named in a config file and write manifest.json next to its outputs."""
    cfg = io.load_config(config_path)
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    task = cfg["run.task"]
    res = cfg["grid.res"]
    if task == "pattern":
        r = pattern_task(out / "pattern.csv", cfg["pattern.alpha"], cfg["pattern.samples"])
    elif task == "conoid":
        r = conoid_task(out / "conoid.obj", cfg["conoid.n"], res, cfg["conoid.check_res"], cfg["conoid.theta"],
                        cfg["conoid.alpha"])
    elif task == "rp2":
        r = rp2_task(out / "rp2.obj", cfg["conoid.n"], res)
    elif task == "torus":
        r = torus_task(out / "run", cfg["nk.stages"], res if "grid.res" in cfg.explicit else None, cfg["nk.map"],
                       cfg["nk.target"] if "nk.target" in cfg.explicit else None, cfg["nk.strict"],
                       cfg["nk.n_start"], cfg["nk.n_cap"], cfg["nk.eps_scale"])
    elif task == "verify":
        r = relation_task(cfg["verify.relation"], cfg["verify.map"], res)
        (out / "verify.csv").write_text(r.report)
        r.outputs.append(out / "verify.csv")
    else:
        if not cfg["maslov.run"]:
            raise ConfigError(f"{config_path}: maslov.run is required for the maslov task")
        r = maslov_task(cfg["maslov.run"], out / "maslov.csv")
    manifest = io.write_manifest(out, cfg, r.outputs, task)
    return PipelineReport(task, r.exit_code, r.outputs, manifest, r.report)
