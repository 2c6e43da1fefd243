"""Command-line front door: deterministic tables, optional figures, manifests.

Every subcommand resolves a RunConfig (defaults, then --config file, then
flags), computes one primary table (CSV) or document (JSON), writes it
atomically, and drops a manifest.json with the resolved config, package
version, output names and wall time beside it. CSV cells carry 15
significant digits with LF endings; JSON is UTF-8 with sorted keys, so
reruns with identical inputs are byte-identical (the manifest holds the only
timing). Figures are optional renderings of the primary table: PNG via
--figures, SVG via --svg, both with pinned hash salts / stripped dates.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, impurity, singleexc
from . import freespace as fsp
from .core import (DomainError, LatticeSpec, Momentum2, RunConfig,
                   UsageError, parse_pi)
from .dynamics import (EigenDecomposition, correlator, default_time_grid,
                       evolve, initial_pair_state)
from .kernels import CouplingKernel
from .twoexc import pair_spectrum

__all__ = ["main", "parse_point"]

_POINTS = {
    "gamma": Momentum2.gamma,
    "g": Momentum2.gamma,
    "x": Momentum2.x_point,
    "m": Momentum2.m,
}


def parse_point(text: str) -> Momentum2:
    """Momentum from a label (gamma|g|x|m) or a 'kx,ky' pair (pi-suffixed)."""
    s = str(text).strip().lower()
    if s in _POINTS:
        return _POINTS[s]()
    parts = s.split(",")
    if len(parts) != 2:
        raise UsageError(
            f"cannot parse momentum point {text!r}: use gamma|x|m or 'kx,ky'")
    return Momentum2(parse_pi(parts[0]), parse_pi(parts[1]))


def _kernel(cfg: RunConfig) -> CouplingKernel:
    try:
        return CouplingKernel(cfg.kernel)
    except ValueError:
        raise UsageError(
            f"unknown kernel {cfg.kernel!r} (use 'waveguide' or 'freespace')"
        ) from None


# --------------------------------------------------------------------------
# deterministic output
# --------------------------------------------------------------------------

def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if np.iscomplexobj(value):
        raise TypeError(f"complex CSV cell {value!r}: take .real or .decay")
    v = float(value)
    if math.isnan(v):
        return ""
    return f"{v:.15g}"


def _write_bytes(path: str, data: bytes) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt_cell(c) for c in row) for row in rows]
    _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _write_json(path: str, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
    _write_bytes(path, (text + "\n").encode("utf-8"))


def _render(cfg: RunConfig, outdir: str, name: str, draw, outputs: list) -> None:
    """Draw the figure once, save requested formats atomically."""
    if not (cfg.figures or cfg.svg):
        return
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "wqed2d"
    fig = plt.figure(figsize=(6.4, 4.2), dpi=130)
    try:
        draw(fig)
        fig.tight_layout()
        targets = []
        if cfg.figures:
            targets.append(("png", {"Software": None}))
        if cfg.svg:
            targets.append(("svg", {"Date": None}))
        for ext, meta in targets:
            path = os.path.join(outdir, f"{name}.{ext}")
            fd, tmp = tempfile.mkstemp(dir=outdir, prefix=".tmp-",
                                       suffix="." + ext)
            os.close(fd)
            try:
                fig.savefig(tmp, format=ext, metadata=meta)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            outputs.append(os.path.basename(path))
    finally:
        plt.close(fig)


# --------------------------------------------------------------------------
# config plumbing
# --------------------------------------------------------------------------

def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config {path!r}: {exc}") from None
        cfg = RunConfig.from_json(text)
    over = {}
    for name in RunConfig.field_names():
        if not hasattr(args, name):
            continue
        value = getattr(args, name)
        if value is None:
            continue
        if name in ("figures", "svg") and value is False:
            continue
        over[name] = value
    return cfg.replace(**over)


def _resolve_threads(cfg: RunConfig) -> int:
    if cfg.threads is not None:
        n = cfg.threads
    else:
        raw = os.environ.get("WQED2D_THREADS", "").strip()
        if raw:
            try:
                n = int(raw)
            except ValueError:
                raise UsageError(
                    f"WQED2D_THREADS must be an integer, got {raw!r}"
                ) from None
        else:
            n = 1
    if int(n) < 1:
        raise UsageError(f"threads must be >= 1, got {n}")
    return int(n)


def _k0d_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.k0d_list:
        ks = np.asarray(cfg.k0d_list, dtype=float)
    else:
        if cfg.k0d_min is None or cfg.k0d_max is None:
            raise UsageError(
                "sweep needs --k0d-list or both --k0d-min and --k0d-max")
        if int(cfg.steps) < 1:
            raise UsageError(f"steps must be >= 1, got {cfg.steps}")
        if not cfg.k0d_min <= cfg.k0d_max:
            raise UsageError("k0d-min must not exceed k0d-max")
        ks = np.linspace(float(cfg.k0d_min), float(cfg.k0d_max),
                         int(cfg.steps))
    if ks.size == 0 or np.any(ks <= 0):
        raise UsageError("k0d values must be positive and nonempty")
    return ks


def _sweep_map(fn, values, threads: int) -> list:
    """Map preserving input order regardless of worker count."""
    if threads <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, values))


def _require(cfg: RunConfig, field: str, flag: str):
    value = getattr(cfg, field)
    if value is None:
        raise UsageError(f"this command requires {flag}")
    return value


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_bands(cfg: RunConfig, outdir: str, *, name: str = "bands",
               kernel: CouplingKernel | None = None) -> list:
    k0d = _require(cfg, "k0d", "--k0d")
    kern = kernel if kernel is not None else _kernel(cfg)
    samples = singleexc.band_path(k0d, n_per_segment=cfg.n_path,
                                  l_sum=cfg.l_sum, kernel=kern)
    rows = [(b.s, b.k.kx, b.k.ky, b.energy, b.decay, b.near_divergence)
            for b in samples]
    csv = os.path.join(outdir, f"{name}.csv")
    _write_csv(csv, ("s", "kx", "ky", "energy", "decay", "near_divergence"),
               rows)
    outputs = [os.path.basename(csv)]

    def draw(fig):
        s = [r[0] for r in rows]
        ax1, ax2 = fig.subplots(2, 1, sharex=True)
        ax1.plot(s, [r[3] for r in rows], lw=1.2)
        ax1.set_ylabel("Re E")
        ax2.semilogy(s, np.maximum([r[4] for r in rows], 1e-18), lw=1.2)
        ax2.set_ylabel("decay")
        ax2.set_xlabel("path coordinate")

    _render(cfg, outdir, name, draw, outputs)
    return outputs


def _cmd_freespace_bands(cfg: RunConfig, outdir: str) -> list:
    return _cmd_bands(cfg, outdir, name="freespace_bands",
                      kernel=CouplingKernel.FREE_SPACE_ZZ)


def _cmd_gap_scan(cfg: RunConfig, outdir: str) -> list:
    kern = _kernel(cfg)
    ks = _k0d_grid(cfg)

    def one(k0d: float) -> float:
        if kern is CouplingKernel.FREE_SPACE_ZZ:
            return fsp.freespace_band_gap(
                k0d, grid_n=cfg.bz_grid_n, l_sum=cfg.l_sum,
                annulus_cells=cfg.annulus_cells, floor=cfg.gap_floor,
                zero_window=cfg.zero_window)
        return singleexc.band_gap(
            k0d, grid_n=cfg.bz_grid_n, l_sum=cfg.l_sum, kernel=kern,
            annulus_cells=cfg.annulus_cells, floor=cfg.gap_floor,
            zero_window=cfg.zero_window)

    gaps = _sweep_map(one, ks, _resolve_threads(cfg))
    rows = list(zip(ks, gaps))
    csv = os.path.join(outdir, "gap_scan.csv")
    _write_csv(csv, ("k0d", "gap"), rows)
    outputs = [os.path.basename(csv)]

    def draw(fig):
        ax = fig.subplots()
        ax.plot(ks / np.pi, gaps, marker="o", ms=3, lw=1.2)
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_xlabel("k0d / pi")
        ax.set_ylabel("gap width")

    _render(cfg, outdir, "gap_scan", draw, outputs)
    return outputs


def _cmd_twobody_spectrum(cfg: RunConfig, outdir: str) -> list:
    K = parse_point(_require(cfg, "point", "--K"))
    kern = _kernel(cfg)
    ks = _k0d_grid(cfg)

    def one(k0d: float):
        pd = impurity.pair_dispersion(
            K, k0d, q_grid_n=cfg.q_grid_n, l_sum=cfg.l_sum, kernel=kern,
            annulus_cells=cfg.annulus_cells)
        band_min = float(pd.sorted_energies[0])
        band_max = float(pd.sorted_energies[-1])
        if kern is CouplingKernel.FREE_SPACE_ZZ:
            gap = fsp.freespace_two_exc_gap(
                K, k0d, q_grid_n=cfg.q_grid_n, l_sum=cfg.l_sum,
                annulus_cells=cfg.annulus_cells,
                floor=cfg.two_exc_gap_floor,
                zero_window=cfg.two_exc_zero_window)
            e_bs = None
        else:
            gap = impurity.two_exc_gap(
                K, k0d, q_grid_n=cfg.q_grid_n, l_sum=cfg.l_sum, kernel=kern,
                annulus_cells=cfg.annulus_cells,
                floor=cfg.two_exc_gap_floor,
                zero_window=cfg.two_exc_zero_window)
            e_bs = impurity.bound_state_energy(
                K, k0d, q_grid_n=cfg.q_grid_n, l_sum=cfg.l_sum, kernel=kern,
                annulus_cells=cfg.annulus_cells,
                floor=cfg.two_exc_gap_floor,
                zero_window=cfg.two_exc_zero_window)
        lo, hi = gap if gap is not None else (None, None)
        return (k0d, band_min, band_max, lo, hi, e_bs)

    rows = _sweep_map(one, ks, _resolve_threads(cfg))
    csv = os.path.join(outdir, "twobody_spectrum.csv")
    _write_csv(csv, ("k0d", "band_min", "band_max", "gap_lo", "gap_hi",
                     "bound_energy"), rows)
    outputs = [os.path.basename(csv)]

    def draw(fig):
        ax = fig.subplots()
        x = ks / np.pi
        ax.fill_between(x, [r[1] for r in rows], [r[2] for r in rows],
                        alpha=0.25, lw=0, label="continuum")
        e = [(r[0] / np.pi, r[5]) for r in rows if r[5] is not None]
        if e:
            ax.plot([p[0] for p in e], [p[1] for p in e], "o-", ms=3,
                    lw=1.2, label="bound state")
        ax.set_xlabel("k0d / pi")
        ax.set_ylabel("energy")
        ax.legend(loc="best")

    _render(cfg, outdir, "twobody_spectrum", draw, outputs)
    return outputs


def _cmd_boundstate(cfg: RunConfig, outdir: str) -> list:
    K = parse_point(_require(cfg, "point", "--K"))
    k0d = _require(cfg, "k0d", "--k0d")
    kern = _kernel(cfg)
    doc = {"point": [K.kx, K.ky], "k0d": float(k0d), "kernel": kern.value,
           "bound_state": None}
    sol = None
    if kern is CouplingKernel.FREE_SPACE_ZZ:
        chk = fsp.freespace_no_bs_check(K, k0d, q_grid_n=cfg.q_grid_n,
                                        l_sum=cfg.l_sum,
                                        annulus_cells=cfg.annulus_cells)
        doc["gap"] = list(chk.gap) if chk.gap is not None else None
    else:
        sol = impurity.bound_state(
            K, k0d, r_max=cfg.r_max, q_grid_n=cfg.q_grid_n, l_sum=cfg.l_sum,
            kernel=kern, annulus_cells=cfg.annulus_cells,
            floor=cfg.two_exc_gap_floor, zero_window=cfg.two_exc_zero_window)
        if sol is not None:
            doc["gap"] = list(sol.gap)
            doc["bound_state"] = {
                "energy": float(sol.energy),
                "mean_separation": float(sol.mean_separation),
                "r_max": int(cfg.r_max),
            }
        else:
            doc["gap"] = None
    path = os.path.join(outdir, "boundstate.json")
    _write_json(path, doc)
    outputs = [os.path.basename(path)]

    if sol is not None:
        n = 2 * int(cfg.r_max) + 1

        def draw(fig):
            ax = fig.subplots()
            img = np.asarray(sol.p, dtype=float).reshape(n, n)
            half = cfg.r_max + 0.5
            im = ax.imshow(img, origin="lower",
                           extent=(-half, half, -half, half))
            ax.set_xlabel("r_x")
            ax.set_ylabel("r_y")
            fig.colorbar(im, ax=ax, label="p(r)")

        _render(cfg, outdir, "boundstate", draw, outputs)
    return outputs


def _cmd_bs_scan(cfg: RunConfig, outdir: str) -> list:
    K = parse_point(_require(cfg, "point", "--K"))
    ks = _k0d_grid(cfg)
    scan = impurity.mean_separation_scan(
        K, [float(v) for v in ks], r_max=cfg.r_max, q_grid_n=cfg.q_grid_n,
        l_sum=cfg.l_sum, kernel=_kernel(cfg),
        annulus_cells=cfg.annulus_cells, floor=cfg.two_exc_gap_floor,
        zero_window=cfg.two_exc_zero_window)
    rows = list(zip(scan.k0d, scan.present, scan.energy, scan.gap_width,
                    scan.mean_separation))
    csv = os.path.join(outdir, "bs_scan.csv")
    _write_csv(csv, ("k0d", "present", "energy", "gap_width",
                     "mean_separation"), rows)
    outputs = [os.path.basename(csv)]

    def draw(fig):
        ax = fig.subplots()
        x = np.asarray(scan.k0d) / np.pi
        sep = np.where(scan.present, scan.mean_separation, np.nan)
        ax.plot(x, sep, "o-", ms=3, lw=1.2)
        ax.set_xlabel("k0d / pi")
        ax.set_ylabel("mean separation")

    _render(cfg, outdir, "bs_scan", draw, outputs)
    return outputs


def _cmd_finite_size(cfg: RunConfig, outdir: str) -> list:
    l = _require(cfg, "l", "--l")
    k0d = _require(cfg, "k0d", "--k0d")
    modes = singleexc.finite_modes(LatticeSpec(int(l), float(k0d)),
                                   kernel=_kernel(cfg),
                                   max_sites=cfg.max_sites)
    rows = [(i, m.energy.re, m.energy.decay, m.quasimomentum.kx,
             m.quasimomentum.ky, m.overlap) for i, m in enumerate(modes)]
    csv = os.path.join(outdir, "finite_size.csv")
    _write_csv(csv, ("index", "energy", "decay", "qx", "qy", "overlap"),
               rows)
    outputs = [os.path.basename(csv)]

    def draw(fig):
        ax = fig.subplots()
        ax.semilogy([r[1] for r in rows],
                    np.maximum([r[2] for r in rows], 1e-18),
                    ".", ms=4)
        ax.set_xlabel("Re E")
        ax.set_ylabel("decay")

    _render(cfg, outdir, "finite_size", draw, outputs)
    return outputs


def _cmd_scaling(cfg: RunConfig, outdir: str) -> list:
    point = parse_point(_require(cfg, "point", "--K"))
    k0d = _require(cfg, "k0d", "--k0d")
    sizes = _require(cfg, "sizes", "--sizes")
    res = singleexc.single_exc_scaling(point, float(k0d),
                                       [int(s) for s in sizes],
                                       kernel=_kernel(cfg),
                                       max_sites=cfg.max_sites)
    rows = list(zip(res.sizes, res.atom_numbers, res.decays, res.overlaps))
    csv = os.path.join(outdir, "scaling.csv")
    _write_csv(csv, ("l", "n_atoms", "decay", "overlap"), rows)
    fit_doc = {"exponent": res.fit.exponent, "stderr": res.fit.stderr,
               "r_squared": res.fit.r_squared,
               "amplitude": res.fit.amplitude}
    fit_path = os.path.join(outdir, "scaling_fit.json")
    _write_json(fit_path, fit_doc)
    outputs = [os.path.basename(csv), os.path.basename(fit_path)]

    def draw(fig):
        ax = fig.subplots()
        n = np.asarray(res.atom_numbers, dtype=float)
        ax.loglog(n, res.decays, "o", ms=5)
        ax.loglog(n, res.fit.amplitude * n ** res.fit.exponent, "-", lw=1.0,
                  label=f"exponent {res.fit.exponent:.2f}")
        ax.set_xlabel("atom number N")
        ax.set_ylabel("decay")
        ax.legend(loc="best")

    _render(cfg, outdir, "scaling", draw, outputs)
    return outputs


def _cmd_dynamics(cfg: RunConfig, outdir: str) -> list:
    l = _require(cfg, "l", "--l")
    k0d = _require(cfg, "k0d", "--k0d")
    lat = LatticeSpec(int(l), float(k0d))
    basis, states = pair_spectrum(lat, _kernel(cfg),
                                  max_pair_dim=cfg.max_pair_dim)
    dec = EigenDecomposition.from_spectrum(states)
    psi0 = initial_pair_state(basis, int(cfg.ell), site=cfg.site)
    times = default_time_grid(float(cfg.t_max), int(cfg.n_times))
    traj = evolve(dec, psi0, times)
    corr = [correlator(traj.states[i], basis, int(cfg.ell))
            for i in range(len(times))]
    rows = list(zip(traj.times, corr, traj.norms))
    csv = os.path.join(outdir, "dynamics.csv")
    _write_csv(csv, ("t", "correlator", "norm"), rows)
    outputs = [os.path.basename(csv)]

    def draw(fig):
        ax = fig.subplots()
        ax.plot(traj.times, corr, lw=1.2, label="correlator")
        ax.plot(traj.times, traj.norms, lw=1.2, ls="--", label="norm")
        ax.set_xlabel("t (1/gamma)")
        ax.legend(loc="best")

    _render(cfg, outdir, "dynamics", draw, outputs)
    return outputs


def _cmd_freespace_sr_scan(cfg: RunConfig, outdir: str) -> list:
    point = parse_point(_require(cfg, "point", "--K"))
    l = _require(cfg, "l", "--l")
    ks = _k0d_grid(cfg)
    res = fsp.freespace_sr_scan(point, [float(v) for v in ks], int(l),
                                max_pair_dim=cfg.max_pair_dim)
    rows = list(zip(res.k0ds, res.decays, np.real(res.energies), res.iprs))
    csv = os.path.join(outdir, "freespace_sr_scan.csv")
    _write_csv(csv, ("k0d", "decay", "energy", "ipr"), rows)
    summary = {"point": [point.kx, point.ky], "l": int(l),
               "minimum_k0d": float(res.minimum_k0d),
               "minimum_decay": float(res.minimum_decay)}
    sp = os.path.join(outdir, "freespace_sr_summary.json")
    _write_json(sp, summary)
    outputs = [os.path.basename(csv), os.path.basename(sp)]

    def draw(fig):
        ax = fig.subplots()
        ax.semilogy(res.k0ds / np.pi, res.decays, "o-", ms=3, lw=1.2)
        ax.axvline(res.minimum_k0d / np.pi, color="0.6", lw=0.8)
        ax.set_xlabel("k0d / pi")
        ax.set_ylabel("resonance decay")

    _render(cfg, outdir, "freespace_sr_scan", draw, outputs)
    return outputs


_COMMANDS = {
    "bands": _cmd_bands,
    "gap-scan": _cmd_gap_scan,
    "twobody-spectrum": _cmd_twobody_spectrum,
    "boundstate": _cmd_boundstate,
    "bs-scan": _cmd_bs_scan,
    "finite-size": _cmd_finite_size,
    "scaling": _cmd_scaling,
    "dynamics": _cmd_dynamics,
    "freespace-sr-scan": _cmd_freespace_sr_scan,
    "freespace-bands": _cmd_freespace_bands,
}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _int_list(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}") from None


def _pi_list(text: str) -> tuple:
    try:
        return tuple(parse_pi(part) for part in text.split(",")
                     if part.strip())
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pi_value(text: str) -> float:
    try:
        return parse_pi(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output directory (default: cwd)")
    common.add_argument("--config", help="JSON config file with defaults")
    common.add_argument("--threads", type=int,
                        help="worker pool size for sweeps "
                             "(fallback: WQED2D_THREADS)")
    common.add_argument("--figures", action="store_true",
                        help="render PNG figures beside the tables")
    common.add_argument("--svg", action="store_true",
                        help="render SVG figures beside the tables")
    common.add_argument("--kernel", choices=("waveguide", "freespace"))
    common.add_argument("--l-sum", dest="l_sum", type=int)

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--k0d-min", dest="k0d_min", type=_pi_value)
    sweep.add_argument("--k0d-max", dest="k0d_max", type=_pi_value)
    sweep.add_argument("--steps", type=int)
    sweep.add_argument("--k0d-list", dest="k0d_list", type=_pi_list)

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--K", "--point", dest="point",
                       help="momentum: gamma|x|m or 'kx,ky'")

    p = argparse.ArgumentParser(
        prog="wqed2d",
        description="Spectra, bound states and dynamics of 2D atomic "
                    "arrays coupled to a 2D reservoir.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("bands", parents=[common],
                       help="dispersion along the high-symmetry path")
    q.add_argument("--k0d", type=_pi_value)
    q.add_argument("--n-path", dest="n_path", type=int)

    q = sub.add_parser("gap-scan", parents=[common, sweep],
                       help="single-excitation gap width versus spacing")
    q.add_argument("--bz-grid-n", dest="bz_grid_n", type=int)

    q = sub.add_parser("twobody-spectrum", parents=[common, sweep, point],
                       help="pair continuum edges, gap and bound energy")
    q.add_argument("--q-grid-n", dest="q_grid_n", type=int)

    q = sub.add_parser("boundstate", parents=[common, point],
                       help="two-excitation bound state at one (K, k0d)")
    q.add_argument("--k0d", type=_pi_value)
    q.add_argument("--r-max", dest="r_max", type=int)
    q.add_argument("--q-grid-n", dest="q_grid_n", type=int)

    q = sub.add_parser("bs-scan", parents=[common, sweep, point],
                       help="bound-state extent versus spacing")
    q.add_argument("--r-max", dest="r_max", type=int)
    q.add_argument("--q-grid-n", dest="q_grid_n", type=int)

    q = sub.add_parser("finite-size", parents=[common],
                       help="collective modes of one finite lattice")
    q.add_argument("--l", type=int)
    q.add_argument("--k0d", type=_pi_value)

    q = sub.add_parser("scaling", parents=[common, point],
                       help="decay-versus-N scaling of one mode family")
    q.add_argument("--k0d", type=_pi_value)
    q.add_argument("--sizes", type=_int_list)

    q = sub.add_parser("dynamics", parents=[common],
                       help="non-Hermitian evolution of a seeded pair")
    q.add_argument("--l", type=int)
    q.add_argument("--k0d", type=_pi_value)
    q.add_argument("--ell", type=int)
    q.add_argument("--site", type=int)
    q.add_argument("--t-max", dest="t_max", type=float)
    q.add_argument("--n-times", dest="n_times", type=int)

    q = sub.add_parser("freespace-sr-scan", parents=[common, sweep, point],
                       help="free-space resonance decay versus spacing")
    q.add_argument("--l", type=int)

    q = sub.add_parser("freespace-bands", parents=[common],
                       help="free-space dispersion along the path")
    q.add_argument("--k0d", type=_pi_value)
    q.add_argument("--n-path", dest="n_path", type=int)

    return p


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (None, 0) else int(exc.code)
    t0 = time.monotonic()
    try:
        cfg = _resolve_config(args)
        cfg = cfg.replace(threads=_resolve_threads(cfg))
        outdir = cfg.output or "."
        os.makedirs(outdir, exist_ok=True)
        cfg = cfg.replace(output=outdir)
        outputs = _COMMANDS[args.command](cfg, outdir)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "command": args.command,
        "config": cfg.to_dict(),
        "outputs": outputs,
        "version": __version__,
        "wall_time_s": time.monotonic() - t0,
    }
    _write_json(os.path.join(outdir, "manifest.json"), manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
