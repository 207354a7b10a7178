"""Trace files, summaries and plots.

A run produces one CSV trace whose first line is a comment carrying the
scenario metadata (name, grid, seed, gains, noise and generator identity).
Summary numbers are recomputed from the written file, never from in-memory
state, so anyone can check them against the trace.
"""

from __future__ import annotations

import os

import numpy as np

from .car import car_output_error, car_state_error
from .ins import (InsEnvironment, InsGains, attitude_error_angle,
                  ins_block_spectrum, ins_linearized_blocks, ins_state_error,
                  velocity_error_norm)
from .reactor import reactor_lyapunov, reactor_state_error
from .sim import SimResult

RNG_NAME = "numpy-pcg64"            # np.random.default_rng(seed)

_COLUMNS = {
    "car": ("t", "x", "y", "theta", "xhat", "yhat", "thetahat",
            "eta_x", "eta_y", "eta_theta", "E_x", "E_y"),
    "reactor": ("t", "Xin", "X", "T", "Xinhat", "Xhat", "That",
                "Ztilde", "xitilde", "Ttilde", "V"),
    "ins": ("t", "q0", "q1", "q2", "q3", "v1", "v2", "v3",
            "qhat0", "qhat1", "qhat2", "qhat3", "vhat1", "vhat2", "vhat3",
            "att_err_rad", "vel_err_norm",
            "Ev1", "Ev2", "Ev3", "Eb1", "Eb2", "Eb3"),
}


def _fmt_vec(v) -> str:
    return ";".join(f"{float(x):.17g}" for x in np.atleast_1d(v))


def trace_metadata(cfg, gains, noise) -> dict:
    """Key-value header entries; everything a summary needs to recompute."""
    meta = {
        "scenario": cfg.label,
        "system": cfg.system,
        "t_end": f"{cfg.t_end:.17g}",
        "dt": f"{cfg.dt:.17g}",
        "seed": str(cfg.seed),
        "rng": RNG_NAME,
    }
    gd = {k: getattr(gains, k) for k in gains.__dataclass_fields__}
    meta["gains"] = ";".join(f"{k}:{v:.17g}" for k, v in gd.items())
    if cfg.system == "ins":
        env = InsEnvironment()
        meta["a_grav"] = f"{env.a_grav:.17g}"
        meta["B"] = _fmt_vec(env.B)
    if noise is None:
        meta["noise"] = "off"
    else:
        meta["noise"] = (
            f"accel_bias:{_fmt_vec(noise.accel_bias)}"
            f"|gyro_bias:{_fmt_vec(noise.gyro_bias)}"
            f"|vel_bias:{_fmt_vec(noise.vel_bias)}"
            f"|mag_bias:{_fmt_vec(noise.mag_bias)}"
            f"|accel_sigma:{noise.accel_sigma:.17g}"
            f"|gyro_sigma:{noise.gyro_sigma:.17g}"
            f"|vel_sigma:{noise.vel_sigma:.17g}"
            f"|mag_sigma:{noise.mag_sigma:.17g}")
    return meta


def assemble_rows(system: str, result: SimResult, input_signal=None,
                  gains=None) -> np.ndarray:
    """Trace matrix in the column order of ``_COLUMNS[system]``."""
    t, x, xh = result.t, result.truth, result.estimate
    n = t.size
    if system == "car":
        rows = np.empty((n, 12))
        rows[:, 0] = t
        rows[:, 1:4] = x
        rows[:, 4:7] = xh
        for k in range(n):
            u = input_signal(t[k])
            rows[k, 7:10] = car_state_error(x[k], xh[k])
            rows[k, 10:12] = car_output_error(xh[k], u, x[k, 0:2])
        return rows
    if system == "reactor":
        rows = np.empty((n, 11))
        rows[:, 0] = t
        rows[:, 1:4] = x
        rows[:, 4:7] = xh
        err = reactor_state_error(x.T, xh.T).T
        rows[:, 7:10] = err
        rows[:, 10] = reactor_lyapunov(err[:, 0], err[:, 2], gains.beta)
        return rows
    if system == "ins":
        rows = np.empty((n, 23))
        rows[:, 0] = t
        rows[:, 1:8] = x
        rows[:, 8:15] = xh
        for k in range(n):
            eta = ins_state_error(x[k], xh[k])
            rows[k, 15] = attitude_error_angle(eta)
            rows[k, 16] = velocity_error_norm(eta)
        rows[:, 17:23] = result.aux["E"]
        return rows
    raise ValueError(f"unknown system {system!r}")


def write_trace(path: str, meta: dict, system: str, rows: np.ndarray) -> None:
    cols = _COLUMNS[system]
    if rows.shape[1] != len(cols):
        raise ValueError("row width does not match the column layout")
    lines = ["# " + " ".join(f"{k}={v}" for k, v in meta.items())]
    lines.append(",".join(cols))
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path: str):
    """(meta dict, column names, data matrix) from a trace file."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise ValueError(f"{path} has no metadata line")
        meta = dict(tok.split("=", 1) for tok in header[2:].split())
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(cols):
        raise ValueError(f"{path}: column count mismatch")
    return meta, cols, data


def _col(cols, data, name):
    return data[:, cols.index(name)]


def _settle_time(t, values, threshold):
    """First grid time from which the signal stays below threshold, or None."""
    below = values < threshold
    if not below[-1]:
        return None
    k = len(below) - 1
    while k > 0 and below[k - 1]:
        k -= 1
    return float(t[k])


def summarize_trace(path: str) -> dict:
    """Scalar report recomputed from the trace file alone."""
    meta, cols, data = read_trace(path)
    system = meta["system"]
    t = _col(cols, data, "t")
    out: dict = {"scenario": meta["scenario"], "system": system,
                 "t_end": float(meta["t_end"]), "dt": float(meta["dt"]),
                 "seed": int(meta["seed"]), "noise": meta["noise"] != "off"}
    gains = {k: float(v) for k, v in
             (item.split(":") for item in meta["gains"].split(";"))}
    out["gains"] = gains
    if system == "car":
        eta = np.stack([_col(cols, data, c) for c in
                        ("eta_x", "eta_y", "eta_theta")])
        norms = np.linalg.norm(eta, axis=0)
        out["final_error_norm"] = float(norms[-1])
        out["settle_time_1e-3"] = _settle_time(t, norms, 1e-3)
    elif system == "reactor":
        err = np.stack([_col(cols, data, c) for c in
                        ("Ztilde", "xitilde", "Ttilde")])
        norms = np.linalg.norm(err, axis=0)
        out["final_error_norm"] = float(norms[-1])
        out["settle_time_1e-3"] = _settle_time(t, norms, 1e-3)
        v = _col(cols, data, "V")
        settled = np.abs(err[1]) < 1e-6
        idx = np.where(settled)[0]
        if idx.size > 1:
            dv = np.diff(v[idx])
            out["lyapunov_monotone"] = bool(np.all(dv <= 1e-12))
            out["lyapunov_max_increase"] = float(dv.max())
        else:
            out["lyapunov_monotone"] = None
    else:
        att = _col(cols, data, "att_err_rad")
        vel = _col(cols, data, "vel_err_norm")
        out["final_attitude_error_rad"] = float(att[-1])
        out["final_velocity_error"] = float(vel[-1])
        out["attitude_settle_time_0.01rad"] = _settle_time(t, att, 0.01)
        out["velocity_settle_time_0.01"] = _settle_time(t, vel, 0.01)
        env = InsEnvironment(
            A_grav=(0.0, 0.0, float(meta["a_grav"])),
            B=tuple(float(v) for v in meta["B"].split(";")))
        spec = ins_block_spectrum(ins_linearized_blocks(InsGains(**gains), env))
        out["error_poles"] = [complex(z) for z in spec]
    return out


def format_summary(summary: dict) -> str:
    lines = []
    for key, val in summary.items():
        if key == "error_poles":
            val = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in val)
        elif key == "gains":
            val = " ".join(f"{k}={v:g}" for k, v in val.items())
        elif isinstance(val, float):
            val = f"{val:.6g}"
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def render_plots(trace_path: str, out_dir: str) -> list[str]:
    """Two vector-graphic time-series files rendered from the trace file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    meta, cols, data = read_trace(trace_path)
    system = meta["system"]
    label = meta["scenario"]
    t = _col(cols, data, "t")
    paths = []

    def save(fig, suffix):
        path = os.path.join(out_dir, f"{label}_{suffix}.svg")
        fig.savefig(path, format="svg")
        plt.close(fig)
        paths.append(path)

    if system == "car":
        fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
        for ax, name in zip(axes, ("x", "y", "theta")):
            ax.plot(t, _col(cols, data, name), label=name)
            ax.plot(t, _col(cols, data, name + "hat"), "--",
                    label=name + " estimate")
            ax.set_ylabel(name)
            ax.legend(loc="best", fontsize=8)
        axes[-1].set_xlabel("t [s]")
        fig.suptitle("planar vehicle: truth and estimate")
        save(fig, "states")
        err_cols = ("eta_x", "eta_y", "eta_theta")
    elif system == "reactor":
        fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
        for ax, (name, hat) in zip(axes, (("Xin", "Xinhat"), ("X", "Xhat"),
                                          ("T", "That"))):
            ax.plot(t, _col(cols, data, name), label=name)
            ax.plot(t, _col(cols, data, hat), "--", label=hat)
            ax.set_ylabel(name)
            if name != "T":
                ax.set_yscale("log")
            ax.legend(loc="best", fontsize=8)
        axes[-1].set_xlabel("t [s]")
        fig.suptitle("reactor: truth and estimate")
        save(fig, "states")
        err_cols = ("Ztilde", "xitilde", "Ttilde", "V")
    else:
        fig, axes = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
        for i in range(4):
            axes[0].plot(t, _col(cols, data, f"q{i}"), f"C{i}", label=f"q{i}")
            axes[0].plot(t, _col(cols, data, f"qhat{i}"), f"C{i}--")
        axes[0].set_ylabel("attitude quaternion")
        axes[0].legend(loc="best", fontsize=8, ncol=4)
        for i in (1, 2, 3):
            axes[1].plot(t, _col(cols, data, f"v{i}"), f"C{i}", label=f"v{i}")
            axes[1].plot(t, _col(cols, data, f"vhat{i}"), f"C{i}--")
        axes[1].set_ylabel("body velocity [m/s]")
        axes[1].set_xlabel("t [s]")
        axes[1].legend(loc="best", fontsize=8, ncol=3)
        fig.suptitle("navigation: truth (solid) and estimate (dashed)")
        save(fig, "states")
        err_cols = ("att_err_rad", "vel_err_norm")

    fig, ax = plt.subplots(figsize=(7, 4))
    for name in err_cols:
        ax.plot(t, np.abs(_col(cols, data, name)), label=name)
    ax.set_yscale("log")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("error magnitude")
    ax.legend(loc="best", fontsize=8)
    fig.suptitle(f"{label}: estimation errors")
    save(fig, "errors")
    return paths
