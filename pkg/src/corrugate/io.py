"""Run configuration, CSV and OBJ writers, grid dumps and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chart import ChartMap, grid_points
from .errors import ConfigError, ShapeError

Array = np.ndarray
TOOL_VERSION = "0.1.0"


def fmt(x) -> str:
    """Shortest round-trip decimal."""
    return repr(float(x))


def fmt17(x) -> str:
    """Fixed 17 significant digits (byte-stable across platforms)."""
    return format(float(x) + 0.0, ".17g")


def write_csv(path, header, rows, formatter=fmt) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([formatter(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def csv_text(header, rows, formatter=fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([formatter(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# grid dumps

def write_grid_csv(f: ChartMap, path, res=None) -> Path:
    """Rows x1..xm, y1..yn in row-major grid order."""
    X = f.grid(res)
    Y = f.sample(res)
    P, V = X.reshape(-1, f.m), Y.reshape(-1, f.n)
    header = [f"x{i + 1}" for i in range(f.m)] + [f"y{i + 1}" for i in range(f.n)]
    return write_csv(path, header, (list(map(float, p)) + list(map(float, v)) for p, v in zip(P, V)))


def read_grid_csv(path, periodic=None) -> ChartMap:
    """Inverse of ``write_grid_csv``: recover the tensor grid from the x columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty grid file")
    header = rows[0]
    m = sum(1 for h in header if h.startswith("x"))
    n = len(header) - m
    if m == 0 or n == 0:
        raise ConfigError(f"{path}: header needs x and y columns")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from None
    axes = [np.unique(data[:, i]) for i in range(m)]
    shape = tuple(a.size for a in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise ConfigError(f"{path}: rows do not form a tensor grid")
    order = np.lexsort(tuple(data[:, i] for i in reversed(range(m))))
    V = data[order, m:].reshape(*shape, n)
    lo = [float(a[0]) for a in axes]
    hi = [float(a[-1]) for a in axes]
    Xs = data[order, :m].reshape(*shape, m)
    if np.max(np.abs(Xs - grid_points(lo, hi, shape))) > 1e-9 * max(1.0, max(map(abs, lo + hi))):
        raise ConfigError(f"{path}: grid is not uniform")
    return ChartMap.from_grid(V, lo, hi, periodic=periodic, name=Path(path).stem)


# OBJ

def obj_text(values: Array, periodic=(False, False)) -> str:
    """OBJ text of a (r1, r2, 3) grid of vertices.

    A periodic axis whose last row repeats the first is closed by identifying
    the two rows, so that row is not written.
    """
    V = np.asarray(values, dtype=float)
    if V.ndim != 3 or V.shape[-1] != 3:
        raise ShapeError("OBJ export needs a 2D grid of points in R^3")
    if min(V.shape[:2]) < 2:
        raise ShapeError("OBJ export needs at least a 2 x 2 grid")
    per = [bool(p) for p in (tuple(periodic) + (False, False))[:2]]
    for ax in range(2):
        if per[ax]:
            first = np.take(V, 0, axis=ax)
            last = np.take(V, -1, axis=ax)
            if np.max(np.abs(first - last)) <= 1e-9 * max(1.0, float(np.max(np.abs(V)))):
                V = np.delete(V, -1, axis=ax)
            if V.shape[ax] < 3:
                per[ax] = False
    r1, r2 = V.shape[:2]
    lines = [f"v {fmt17(x)} {fmt17(y)} {fmt17(z)}" for x, y, z in V.reshape(-1, 3)]
    n1 = r1 if per[0] else r1 - 1
    n2 = r2 if per[1] else r2 - 1

    def idx(i, j):
        return (i % r1) * r2 + (j % r2) + 1

    for i in range(n1):
        for j in range(n2):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def export_obj(f, path, res=None, periodic=None) -> Path:
    """Write an OBJ mesh of a ChartMap sampled at ``res`` (or of a value grid)."""
    if isinstance(f, ChartMap):
        if f.n != 3 or f.m != 2:
            raise ShapeError("OBJ export needs a surface in R^3")
        V = f.sample(res)
        periodic = f.periodic if periodic is None else periodic
    else:
        V = np.asarray(f, dtype=float)
        periodic = (False, False) if periodic is None else periodic
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = obj_text(V, periodic)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def read_obj(path) -> tuple[Array, Array]:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p) for p in parts[1:4]])
    return np.array(verts), np.array(faces, dtype=int)


# configuration

def _as_int(lo=None, hi=None):
    def conv(s):
        v = int(s)
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ValueError(f"must lie in [{lo}, {hi}]")
        return v
    return conv


def _as_float(lo=None, hi=None, open_lo=False):
    def conv(s):
        v = float(s)
        if not np.isfinite(v):
            raise ValueError("must be finite")
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ValueError(f"must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}")
        return v
    return conv


def _as_bool(s):
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*names):
    def conv(s):
        if s not in names:
            raise ValueError(f"unknown selector {s!r}; choose from {', '.join(names)}")
        return s
    return conv


def _alpha_value(s):
    if s == "alpha0":
        return s
    return _as_float(0.0)(s)


TASKS = ("pattern", "conoid", "rp2", "torus", "verify", "maslov")

SCHEMA = {
    "run.task": (_choice(*TASKS), None),
    "output.dir": (str, None),
    "pattern.alpha": (_alpha_value, "alpha0"),
    "pattern.samples": (_as_int(2, 10**6), 257),
    "grid.res": (_as_int(2, 8193), 257),
    "conoid.n": (_as_float(0.0, open_lo=True), 5.5),
    "conoid.theta": (_choice("caption", "theta_max"), "caption"),
    "conoid.alpha": (_choice("caption", "alpha0", "zero"), "caption"),
    "conoid.beta": (_choice("caption"), "caption"),
    "conoid.check_res": (_as_int(3, 4097), 513),
    "nk.map": (_choice("torus", "circle", "clifford", "square"), "torus"),
    "nk.target": (_choice("euclidean", "totally_real"), "euclidean"),
    "nk.stages": (_as_int(0, 12), 3),
    "nk.delta_rule": (_choice("quarter"), "quarter"),
    "nk.eps_scale": (_as_float(0.0, open_lo=True), 0.1),
    "nk.n_start": (_as_int(1, 1 << 20), 8),
    "nk.n_cap": (_as_int(1, 1 << 20), 1 << 20),
    "nk.strict": (_as_bool, True),
    "verify.relation": (_choice("immersion", "totally-real", "isometric"), "immersion"),
    "verify.map": (_choice("torus", "circle", "clifford", "square", "conoid", "conoid-corrugated"), "torus"),
    "maslov.run": (str, ""),
}


@dataclass
class RunConfig:
    """Validated ``section.key = value`` settings."""

    values: dict
    text: str = ""
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def echo(self) -> dict:
        return {k: self.values[k] for k in sorted(self.values)}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate; errors carry the file, line number and key."""
    values, lines_of = {}, {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'section.key = value'")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if key not in SCHEMA:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"{source}:{lineno}: duplicate key {key!r} (first on line {lines_of[key]})")
            continue
        conv, _ = SCHEMA[key]
        try:
            values[key] = conv(val)
        except ValueError as exc:
            errors.append(f"{source}:{lineno}: {key}: {exc}")
            continue
        lines_of[key] = lineno
    missing = [k for k, (_, d) in SCHEMA.items() if d is None and k not in values]
    if missing:
        errors.append(f"{source}: missing required keys: {', '.join(missing)}")
    if errors:
        raise ConfigError("\n".join(errors))
    if values.get("nk.n_cap", SCHEMA["nk.n_cap"][1]) < values.get("nk.n_start", SCHEMA["nk.n_start"][1]):
        raise ConfigError(f"{source}:{lines_of.get('nk.n_cap', 0)}: nk.n_cap must be >= nk.n_start")
    explicit = set(values)
    for k, (_, d) in SCHEMA.items():
        values.setdefault(k, d)
    return RunConfig(values, text, explicit)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


# manifests

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config: RunConfig | dict, outputs, task: str) -> Path:
    """manifest.json with the config echo, tool version and sha256 of every output."""
    out_dir = Path(out_dir)
    echo = config.echo() if isinstance(config, RunConfig) else {k: config[k] for k in sorted(config)}
    files = {}
    for p in sorted(Path(o) for o in outputs):
        files[os.path.relpath(p, out_dir)] = sha256_file(p)
    doc = {"tool": "corrugate", "version": TOOL_VERSION, "task": task, "config": echo, "outputs": files}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def verify_manifest(path) -> dict[str, bool]:
    path = Path(path)
    doc = json.loads(path.read_text())
    return {name: sha256_file(path.parent / name) == digest for name, digest in doc["outputs"].items()}


# saved Nash-Kuiper runs

def save_run(result, path) -> Path:
    """Store stage and step grids plus the per-step series of a run in one .npz file."""
    from .nash_kuiper import NKResult  # noqa: F401  (documents the expected type)

    st0 = result.stages[0]
    arrays = {
        "lo": st0.lo, "hi": st0.hi, "periodic": np.asarray(st0.periodic, dtype=bool),
        "target": np.array(result.target), "deltas": np.asarray(result.deltas),
        "scalars": np.array([result.delta_norm, result.initial_defect]),
        "status": np.array(result.status), "message": np.array(result.message),
        "shortness": np.asarray(result.shortness, dtype=float),
        "steps": np.array([[s.stage, s.form, s.N, s.defect, s.step_error, s.eps, s.drift, s.drift_bound,
                            s.min_kappa, s.min_sv] for s in result.steps], dtype=float).reshape(-1, 10),
        "step_status": np.array([s.status for s in result.steps], dtype=str),
        "forms": np.array([[f[0], f[1], f[2], *f[3]] for f in result.step_forms], dtype=float).reshape(
            len(result.step_forms), 3 + st0.m),
    }
    for k, st in enumerate(result.stages):
        arrays[f"stage_V_{k}"], arrays[f"stage_D_{k}"] = st.V, st.D
    for s, st in enumerate(result.step_states):
        arrays[f"step_V_{s}"], arrays[f"step_D_{s}"] = st.V, st.D
        arrays[f"step_alpha_{s}"] = result.step_alphas[s]
        arrays[f"step_phase_{s}"] = result.step_phases[s]
    for s, th in enumerate(result.step_angles):
        arrays[f"step_angle_{s}"] = th
    if result.reference is not None:
        arrays["reference"] = result.reference
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, **arrays)
    return path


def load_run(path):
    """Inverse of ``save_run``."""
    from .nash_kuiper import GridState, NKResult, StepRecord

    path = Path(path)
    if path.is_dir():
        path = path / "run.npz"
    if not path.exists():
        raise ConfigError(f"{path}: no saved run")
    z = np.load(path, allow_pickle=False)
    lo, hi, per = z["lo"], z["hi"], tuple(bool(p) for p in z["periodic"])
    names = set(z.files)

    def states(prefix):
        out, k = [], 0
        while f"{prefix}_V_{k}" in names:
            out.append(GridState(lo, hi, per, z[f"{prefix}_V_{k}"], z[f"{prefix}_D_{k}"]))
            k += 1
        return out

    steps = [StepRecord(int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]), float(r[6]),
                        float(r[7]), float(r[8]), float(r[9]), str(st))
             for r, st in zip(z["steps"], z["step_status"])]
    forms = [(int(f[0]), int(f[1]), float(f[2]), np.asarray(f[3:], dtype=float)) for f in z["forms"]]
    res = NKResult(str(z["target"]), z["deltas"], float(z["scalars"][0]), float(z["scalars"][1]), states("stage"),
                   steps, list(z["shortness"]), str(z["status"]), str(z["message"]))
    res.step_states = states("step")
    n = len(res.step_states)
    res.step_alphas = [z[f"step_alpha_{s}"] for s in range(n)]
    res.step_phases = [z[f"step_phase_{s}"] for s in range(n)]
    res.step_angles = [z[f"step_angle_{s}"] for s in range(n) if f"step_angle_{s}" in names]
    res.step_forms = forms
    res.reference = z["reference"] if "reference" in names else None
    return res
