"""Optional SVG charts of summarized metrics."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def emit_plot(series, path, xlabel="K", ylabel="MSE", title=None):
    """Write an SVG with one line per series and a shaded 95% band.

    Parameters
    ----------
    series : dict
        ``{label: (xs, means, half_widths)}``; ``half_widths`` may be None.
    path : str
    """
    fig, ax = plt.subplots(figsize=(5, 3.5))
    try:
        for label, (xs, means, half) in series.items():
            line, = ax.plot(xs, means, marker="o", label=label)
            if half is not None:
                lo = [m - h for m, h in zip(means, half)]
                hi = [m + h for m, h in zip(means, half)]
                ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        # A fixed hash salt and no date keep the SVG reproducible.
        with matplotlib.rc_context({"svg.hashsalt": "paramshare"}):
            try:
                fig.savefig(path, format="svg", metadata={"Date": None})
            except OSError as exc:
                raise OSError(f"cannot write plot {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
