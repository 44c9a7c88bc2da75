"""Static SVG figures: error lanes over time and recovered end states."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "crank_nicolson": "Crank-Nicolson",
    "lifted_exact": "lifted (exact)",
    "projected_exact": "projected (exact pencil)",
    "projected_sampled": "projected (sampled pencil)",
    "reference": "spectral low-pass",
}
STYLE = {
    "crank_nicolson": dict(color="#b2182b", ls="-", marker="o"),
    "lifted_exact": dict(color="#2166ac", ls="--", marker="s"),
    "projected_exact": dict(color="#1b7837", ls="-.", marker="^"),
    "projected_sampled": dict(color="#762a83", ls=":", marker="D"),
    "reference": dict(color="black", ls="-", marker=""),
}
RC = {"svg.hashsalt": "liftrom", "svg.fonttype": "none", "font.size": 9, "axes.spines.top": False, "axes.spines.right": False}


def _svg(fig) -> bytes:
    buf = io.BytesIO()
    # no date stamp so identical runs give identical files
    fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def error_lanes_svg(report) -> bytes:
    led = report.ledger
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for name in report.methods:
            ax.plot(led.times, 100 * led.relative_errors[name], label=LABELS.get(name, name), ms=3.5, lw=1.3, **STYLE.get(name, {}))
        ax.set_xlabel("t")
        ax.set_ylabel("relative L2 error vs low-pass (%)")
        ax.legend(frameon=False, fontsize=8)
        ax.grid(alpha=0.3, lw=0.5)
        return _svg(fig)


def end_state_svg(report) -> bytes:
    states = report.end_states
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        x = states["x"]
        for name in ("reference", *report.methods):
            if name in states:
                ax.plot(x, states[name], label=LABELS.get(name, name), ms=3.5, lw=1.3, **STYLE.get(name, {}))
        ax.set_xlabel("x")
        ax.set_ylabel(f"u(x, T={report.ledger.times[-1]:g})")
        ax.legend(frameon=False, fontsize=8)
        ax.grid(alpha=0.3, lw=0.5)
        return _svg(fig)
