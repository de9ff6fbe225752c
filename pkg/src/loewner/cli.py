"""Command-line entry point.

    loewner <validate|evolve|chain|beta|classify|semigroup|verify|plot> --config run.toml [--out PATH] [--format csv|json]

Exit codes: 0 pass, 1 configuration error, 2 validation failure, 3 computation failure.
The configuration format is documented in the README.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import drivers as D
from . import expr as _expr
from .chain import NotConverged, StandardChain, beta_limit, classify, frame_at, DecompositionFrame
from .engine import EvolutionConfig, evolve_grid, trajectory
from .integrate import IntegrationError

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_COMPUTE = 0, 1, 2, 3
COMMANDS = ("validate", "evolve", "chain", "beta", "classify", "semigroup", "verify", "plot")
CURVE_SAMPLES = 512
FRAME_HEADER = ("t", "re_a", "im_a", "re_b", "im_b", "beta")


class ConfigError(ValueError):
    pass


class ComputeError(RuntimeError):
    def __init__(self, report):
        self.report = report
        super().__init__(report.get("error", "computation failed"))


# --------------------------------------------------------------------------- formatting


def fmt(x) -> str:
    """17 significant digits; the decimal string round-trips bit-exactly."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: insertion order kept, floats at 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, complex):
        return to_json({"re": obj.real, "im": obj.imag}, indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    return json.dumps(str(obj))


def to_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_text(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    _atomic_write(path, text)


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------- configuration


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(cfg) - {"driver", "tolerances", "grids", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level table(s): {', '.join(sorted(unknown))}")
    return cfg


def _complex(v, what):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{what} must be a number or a [re, im] pair, got {v!r}")


def _path_value(block, key, real=True):
    """A time function: number, expression string, or {times, values} table."""
    if key not in block:
        return 0.0
    v = block[key]
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            node = _expr.parse(v)
        except _expr.ExprSyntaxError as exc:
            raise ConfigError(f"driver.{key}: {exc}") from exc
        if "z" in _expr.free_variables(node):
            raise ConfigError(f"driver.{key} may depend on t only")
        return node
    if isinstance(v, dict):
        times = v.get("times")
        if real:
            values = v.get("values")
        else:
            values = [complex(a, b) for a, b in zip(v.get("re", []), v.get("im", []))]
        try:
            return D.PiecewiseLinear(times, values)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"driver.{key}: {exc}") from exc
    raise ConfigError(f"driver.{key}: unsupported value {v!r}")


def build_driver(block: dict) -> D.HerglotzDriver:
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("[driver] table with a 'kind' key is required")
    kind = block["kind"]
    try:
        if kind == "constant":
            c = complex(block.get("c_re", 1.0), block.get("c_im", 0.0))
            tau = complex(block.get("tau_re", 0.0), block.get("tau_im", 0.0))
            return D.constant(c, tau)
        if kind == "radial":
            return D.radial(_path_value(block, "theta"))
        if kind == "chordal":
            return D.chordal(_path_value(block, "xi"))
        if kind == "bp":
            if "p" not in block:
                raise ConfigError("driver.p is required for kind = 'bp'")
            if isinstance(block.get("tau"), list):
                tau = _complex(block["tau"], "driver.tau")
            elif "tau" in block:
                tau = _path_value(block, "tau", real=False)
                if isinstance(tau, float):
                    tau = complex(tau)
            else:
                tau = complex(block.get("tau_re", 0.0), block.get("tau_im", 0.0))
            return D.bp(block["p"], tau=tau, breakpoints=tuple(block.get("breakpoints", ())))
        if kind == "sampled":
            return D.sampled_path(block.get("times"), block.get("values"), block.get("path", "radial"))
        if kind == "catalog":
            cat = D.oracle_catalog()
            if block.get("name") not in cat:
                raise ConfigError(f"driver.name must be one of {sorted(cat)}")
            return cat[block["name"]]
        if kind == "piecewise":
            pieces = block.get("pieces")
            if not pieces:
                raise ConfigError("driver.pieces must be a non-empty array of tables")
            return D.PiecewiseDriver([(p.get("start", 0.0), build_driver(p)) for p in pieces])
    except _expr.ExprSyntaxError as exc:
        raise ConfigError(f"driver expression: {exc}") from exc
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"driver: {exc}") from exc
    raise ConfigError(f"unknown driver kind {kind!r}")


def _positive(block, key, default):
    v = block.get(key, default)
    if not isinstance(v, (int, float)) or not v > 0:
        raise ConfigError(f"tolerances.{key} must be a positive number")
    return float(v)


def engine_config(cfg: dict) -> EvolutionConfig:
    tol = cfg.get("tolerances", {})
    try:
        return EvolutionConfig(
            rel_tol=_positive(tol, "rel_tol", 1e-10),
            abs_tol=_positive(tol, "abs_tol", 1e-12),
            max_step=_positive(tol, "max_step", 0.1),
            boundary_guard=_positive(tol, "boundary_guard", 1e-9),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"tolerances: {exc}") from exc


TOLERANCE_KEYS = ("rel_tol", "abs_tol", "max_step", "boundary_guard", "chain_tol", "t_max", "classify_tol",
                  "beta_t_max", "dw_tol", "check_tol", "ef_tol")


def check_tolerances(cfg: dict):
    """Every tolerance must be a positive number, whichever command reads it."""
    tol = cfg.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ConfigError("[tolerances] must be a table")
    unknown = sorted(set(tol) - set(TOLERANCE_KEYS))
    if unknown:
        raise ConfigError(f"unknown tolerance key(s): {', '.join(unknown)}")
    for key in tol:
        _positive(tol, key, None)
    engine_config(cfg)


def grid_points(grids: dict) -> list:
    """Explicit ``points`` ([re, im] pairs) or the polar grid radii x angles."""
    if "points" in grids:
        pts = [_complex(p, "grids.points entry") for p in grids["points"]]
    else:
        radii = grids.get("radii", [0.0, 0.35, 0.7])
        n = int(grids.get("angles", 8))
        pts = []
        for r in radii:
            if r == 0:
                pts.append(0j)
            else:
                pts += [r * complex(math.cos(2 * math.pi * k / n), math.sin(2 * math.pi * k / n)) for k in range(n)]
    if not pts:
        raise ConfigError("grids: no points")
    for z in pts:
        if not abs(z) < 1:
            raise ConfigError(f"grids: point {z} is outside the unit disk")
    return pts


def _list(grids, key, default):
    v = grids.get(key, default)
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"grids.{key} must be a non-empty array of numbers")
    return [float(x) for x in v]


# --------------------------------------------------------------------------- frame cache


def cache_path(cfg: dict) -> Optional[str]:
    root = os.environ.get("LOEWNER_CACHE_DIR")
    if not root:
        return None
    key = {"driver": cfg.get("driver"), "tolerances": cfg.get("tolerances", {})}
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]
    return os.path.join(root, f"frames-{digest}.csv")


def read_frames(path: str) -> dict:
    frames = {}
    if path is None or not os.path.exists(path):
        return frames
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != FRAME_HEADER:
            return frames
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 6:
                continue
            t, ra, ia, rb, ib, beta = (float(x) for x in parts)
            frames[t] = DecompositionFrame(t, complex(ra, ia), complex(rb, ib), beta)
    return frames


def write_frames(path: str, frames: dict):
    rows = [frames[t].as_row() for t in sorted(frames)]
    _atomic_write(path, to_csv(FRAME_HEADER, rows))


def frames_with_cache(d, times, ecfg, cfg) -> list:
    """Frames at ``times``; each is an independent integration from 0, so cached and fresh agree."""
    path = cache_path(cfg)
    cached = read_frames(path)
    out, fresh = [], False
    for t in times:
        fr = cached.get(t)
        if fr is None:
            fr = frame_at(d, t, ecfg)
            cached[t] = fr
            fresh = True
        out.append(fr)
    if path is not None and fresh:
        write_frames(path, cached)
    return out


# --------------------------------------------------------------------------- commands


def _error_report(exc) -> dict:
    return {"error": f"{type(exc).__name__}: {exc}"}


def cmd_validate(cfg, fmt_):
    d = build_driver(cfg.get("driver"))
    rep = D.validate(d)
    code = EXIT_OK if rep.passed else EXIT_INVALID
    return to_json(rep.as_dict()) + "\n", code


def cmd_evolve(cfg, fmt_):
    d = build_driver(cfg.get("driver"))
    ecfg = engine_config(cfg)
    grids = cfg.get("grids", {})
    pts = grid_points(grids)
    s_list = _list(grids, "s", [0.0])
    times = _list(grids, "times", [1.0])
    rows, errors = [], []
    for s in s_list:
        for t in times:
            if t < s:
                continue
            for z, r in zip(pts, evolve_grid(d, pts, s, t, ecfg, derivative=True)):
                if isinstance(r, Exception):
                    errors.append({"s": s, "t": t, "z_re": z.real, "z_im": z.imag, "error": f"{type(r).__name__}: {r}"})
                    continue
                rows.append((s, t, z.real, z.imag, r.w.real, r.w.imag, r.v.real, r.v.imag))
    header = ("s", "t", "z_re", "z_im", "w_re", "w_im", "dw_re", "dw_im")
    if fmt_ == "json":
        text = to_json({"rows": [dict(zip(header, row)) for row in rows], "errors": errors}) + "\n"
    else:
        text = to_csv(header, rows)
    if errors:
        raise ComputeError({"error": f"{len(errors)} point(s) failed", "failures": errors, "partial": text})
    return text, EXIT_OK


def cmd_chain(cfg, fmt_):
    d = build_driver(cfg.get("driver"))
    ecfg = engine_config(cfg)
    tol = cfg.get("tolerances", {})
    grids = cfg.get("grids", {})
    chain = StandardChain(d, tol=_positive(tol, "chain_tol", 1e-10), cfg=ecfg, t_max=_positive(tol, "t_max", 2.0**10))
    pts = grid_points(grids)
    rows = []
    for s in _list(grids, "s", [0.0]):
        for z in pts:
            try:
                v = chain.value(s, z)
            except (NotConverged, IntegrationError, ArithmeticError) as exc:
                raise ComputeError({"error": f"{type(exc).__name__}: {exc}", "s": s, "z_re": z.real, "z_im": z.imag})
            rows.append((s, z.real, z.imag, v.f.real, v.f.imag, v.horizon, v.tail_estimate))
    header = ("s", "z_re", "z_im", "f_re", "f_im", "horizon", "tail_est")
    if fmt_ == "json":
        return to_json([dict(zip(header, r)) for r in rows]) + "\n", EXIT_OK
    return to_csv(header, rows), EXIT_OK


def cmd_beta(cfg, fmt_):
    d = build_driver(cfg.get("driver"))
    ecfg = engine_config(cfg)
    grids = cfg.get("grids", {})
    tol = cfg.get("tolerances", {})
    times = _list(grids, "times", [0.0, 0.5, 1.0, 2.0, 4.0])
    frames = frames_with_cache(d, times, ecfg, cfg)
    if fmt_ == "json":
        b, ok = beta_limit(d, _positive(tol, "classify_tol", 1e-6), _positive(tol, "beta_t_max", 2.0**12), ecfg)
        return to_json({
            "frames": [dict(zip(FRAME_HEADER, fr.as_row())) for fr in frames],
            "beta_limit": b,
            "converged": ok,
        }) + "\n", EXIT_OK
    return to_csv(FRAME_HEADER, [fr.as_row() for fr in frames]), EXIT_OK


def cmd_classify(cfg, fmt_):
    d = build_driver(cfg.get("driver"))
    tol = cfg.get("tolerances", {})
    cls = classify(d, _positive(tol, "classify_tol", 1e-6), _positive(tol, "beta_t_max", 2.0**12), engine_config(cfg))
    out = cls.as_dict()
    code = EXIT_OK if cls.verdict != "Unknown" else EXIT_COMPUTE
    if fmt_ == "csv":
        keys = ("verdict", "beta_limit", "omega", "omega_radius", "automorphism_threshold", "converged")
        return ",".join(keys) + "\n" + ",".join(
            out[k] if isinstance(out[k], str) else fmt(out[k]) for k in keys) + "\n", code
    return to_json(out) + "\n", code


def cmd_semigroup(cfg, fmt_):
    from .semigroup import (SemigroupModel, classify_dw, hyperbolic_step, koenigs_boundary,
                            koenigs_elliptic, conjugate_to_origin)

    block = cfg.get("driver")
    d = build_driver(block)
    if not isinstance(d, D.BerksonPortaDriver) or not d.autonomous:
        raise ConfigError("semigroup needs an autonomous Berkson-Porta driver (kind = 'constant' or 'bp' without t)")
    model = SemigroupModel.from_driver(d)
    grids = cfg.get("grids", {})
    tol = cfg.get("tolerances", {})
    pts = grid_points(grids)
    report = {"tau": model.tau}
    try:
        dw = classify_dw(model, float(tol.get("dw_tol", 1e-3)))
        report["denjoy_wolff"] = dw.as_dict()
        z0 = _complex(grids.get("z0", [0.3, 0.0]), "grids.z0")
        step = hyperbolic_step(model, z0, float(grids.get("t0", 1.0)), int(grids.get("n", 64)),
                               int(grids.get("max_n", 16384)))
        report["hyperbolic_step"] = {"verdict": step.verdict, "iterates": step.n,
                                     "last_distance": float(step.distances[-1])}
        ktol = _positive(tol, "chain_tol", 1e-10)
        if dw.kind == "Elliptic":
            m0, m = conjugate_to_origin(model) if model.tau != 0 else (model, lambda z: z)
            c, h = koenigs_elliptic(m0, ktol)
            vals = h(np.asarray([m(z) for z in pts]))
            report["koenigs"] = {"type": "elliptic", "c": c,
                                 "values": [{"z_re": z.real, "z_im": z.imag, "h_re": v.real, "h_im": v.imag}
                                            for z, v in zip(pts, vals)]}
        else:
            h = koenigs_boundary(model, ktol)
            vals = h(np.asarray(pts))
            report["koenigs"] = {"type": "boundary", "method": h.method,
                                 "values": [{"z_re": z.real, "z_im": z.imag, "h_re": v.real, "h_im": v.imag}
                                            for z, v in zip(pts, vals)]}
    except (NotConverged, IntegrationError, ArithmeticError, RuntimeError) as exc:
        report.update(_error_report(exc))
        raise ComputeError(report)
    return to_json(report) + "\n", EXIT_OK


def cmd_verify(cfg, fmt_):
    from . import verify as V

    ecfg = engine_config(cfg)
    tol = cfg.get("tolerances", {})
    check_tol = float(tol.get("check_tol", 1e-6))
    grids = cfg.get("grids", {})
    if "driver" in cfg:
        d = build_driver(cfg["driver"])
        pts = np.asarray(grid_points(grids))
        times = _list(grids, "times", [0.0, 0.5, 1.0, 2.0])
        chain = StandardChain(d, tol=min(check_tol, 1e-10), cfg=ecfg)
        s_pde = [s for s in _list(grids, "s", [0.5, 1.5]) if not d.breakpoints_in(s - 1e-4, s + 1e-4) and s >= 1e-4]
        reports = [
            V.check_ef_axioms(d, times, pts, float(tol.get("ef_tol", 1e-8)), ecfg),
            V.check_chain_equation(d, chain, times, pts, check_tol, ecfg),
            V.check_lk_pde(d, chain, s_pde, pts[np.abs(pts) <= 0.5], 10 * check_tol),
            V.check_beta_monotone(d, np.linspace(0, max(times), 9), pts[:5], 1e-9, ecfg),
            V.check_growth_bound(d, chain, [s for s in times][:2], (0.3, 0.6, 0.9), check_tol, cfg=ecfg),
            V.check_univalence(lambda z: chain(max(times), z), 0.9, 256, label=f"f_{max(times):g}"),
        ]
    else:
        reports = V.catalog_suite(check_tol, cfg=ecfg)
    ok = V.suite_passed(reports)
    out = {"pass": ok, "checks": [r.as_dict() for r in reports]}
    return to_json(out) + "\n", EXIT_OK if ok else EXIT_INVALID


def svg_document(curves, width: int = 512, height: int = 512) -> str:
    """SVG 1.1 with one polyline per curve (lists of complex numbers), y axis pointing up."""
    pts = [np.asarray(c, dtype=complex) for c in curves if len(c)]
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" ')
    if not pts:
        return head + f'width="{width}" height="{height}" viewBox="-1 -1 2 2">\n</svg>\n'
    allp = np.concatenate(pts)
    x0, x1 = float(np.min(allp.real)), float(np.max(allp.real))
    y0, y1 = float(np.min(-allp.imag)), float(np.max(-allp.imag))
    span = max(x1 - x0, y1 - y0, 1e-9)
    pad = 0.05 * span
    vb = f"{x0 - pad:.9g} {y0 - pad:.9g} {x1 - x0 + 2 * pad:.9g} {y1 - y0 + 2 * pad:.9g}"
    stroke = 0.004 * (span + 2 * pad)
    lines = [head + f'width="{width}" height="{height}" viewBox="{vb}">']
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    for k, c in enumerate(curves):
        if not len(c):
            continue
        coords = " ".join(f"{z.real + 0.0:.9g},{-z.imag + 0.0:.9g}" for z in np.asarray(c, dtype=complex))
        lines.append(f'  <polyline fill="none" stroke="{palette[k % len(palette)]}" stroke-width="{stroke:.6g}" '
                     f'points="{coords}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def plot_curves(cfg) -> list:
    d = build_driver(cfg.get("driver"))
    ecfg = engine_config(cfg)
    grids = cfg.get("grids", {})
    curves = []
    image_s = grids.get("image_s", [])
    if image_s:
        chain = StandardChain(d, tol=float(cfg.get("tolerances", {}).get("chain_tol", 1e-10)), cfg=ecfg)
        r = float(grids.get("image_r", 0.9))
        theta = 2 * np.pi * np.arange(CURVE_SAMPLES) / (CURVE_SAMPLES - 1)
        circle = r * np.exp(1j * theta)
        circle[-1] = circle[0]
        for s in image_s:
            curves.append(np.asarray(chain(float(s), circle)))
    t_end = float(grids.get("trajectory_t", 2.0))
    for p in grids.get("trajectory_points", []):
        z = _complex(p, "grids.trajectory_points entry")
        curves.append([w for _, w in trajectory(d, z, 0.0, t_end, CURVE_SAMPLES, ecfg)])
    return curves


def cmd_plot(cfg, fmt_):
    return svg_document(plot_curves(cfg)), EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "evolve": cmd_evolve,
    "chain": cmd_chain,
    "beta": cmd_beta,
    "classify": cmd_classify,
    "semigroup": cmd_semigroup,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loewner", description="Numerical Loewner theory in the unit disk.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--out", default=None, help="output path (default: [output].path or stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_block = cfg.get("output", {})
        fmt_ = args.format or out_block.get("format", "csv")
        if fmt_ not in ("csv", "json"):
            raise ConfigError("output.format must be 'csv' or 'json'")
        check_tolerances(cfg)
        out = args.out or (out_block.get("plot") if args.command == "plot" else out_block.get("path"))
        text, code = HANDLERS[args.command](cfg, fmt_)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputeError as exc:
        report = dict(exc.report)
        report.pop("partial", None)
        print(to_json(report), file=sys.stderr)
        return EXIT_COMPUTE
    except (NotConverged, IntegrationError, ArithmeticError, _expr.DomainError) as exc:
        print(to_json(_error_report(exc)), file=sys.stderr)
        return EXIT_COMPUTE
    write_text(text, out)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
