import argparse
from pathlib import Path

import matplotlib.pyplot as plt

from pairvb.engines.evaluation import read_report


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Plot mean held-out rank per activity bucket"
    )

    parser.add_argument("file_path", type=Path)
    parser.add_argument(
        "--output",
        type=Path,
        default=None,
        help="Save the figure here instead of showing it",
    )

    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)

    df = read_report(args.file_path)

    fig, (ax, ax2) = plt.subplots(1, 2, figsize=[10, 5], layout="constrained")

    ax.set_xlabel("Activity c_i")
    ax.set_ylabel("Mean held-out rank")
    ax2.set_xlabel("Activity c_i")
    ax2.set_ylabel("Mean acceptance probability of held-out item")

    # buckets are labelled "1", "2", "3-4", ...; order them by upper edge
    upper = df["bucket"].map(lambda b: int(b.split("-")[-1]))
    labels = dict(sorted(zip(upper, df["bucket"])))
    position = {u: n for n, u in enumerate(labels)}

    for n, (section, block) in enumerate(df.groupby("section", sort=False)):
        x = upper[block.index].map(position).to_numpy()
        ax.plot(x, block["mean_rank"], marker="o", label=section, c=f"C{n}")

        if block["mean_sigma"].notna().any():
            ax2.plot(x, block["mean_sigma"], marker="o", label=section, c=f"C{n}")
            ax2.fill_between(
                x,
                block["sigma_q10"],
                block["sigma_q90"],
                color=f"C{n}",
                alpha=0.2,
            )

    for a in (ax, ax2):
        a.set_xticks(range(len(labels)), list(labels.values()), rotation=45)
        a.legend(title="Section", title_fontsize="small", fontsize="small")

    if args.output is None:
        plt.show()
    else:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(args.output, dpi=150)

    return 0


if __name__ == "__main__":
    raise SystemExit(main())
