#!/usr/bin/env python3
"""Quick look at latticediff CSV outputs.

    python3 docs/plot.py spectrum.csv      # p vs Re f_rw and gap
    python3 docs/plot.py psi.csv           # t vs Re, Im psi
    python3 docs/plot.py paths.csv         # x_t of dumped trajectories
"""
import sys

import matplotlib.pyplot as plt
import pandas as pd


def main(path):
    df = pd.read_csv(path, comment="#")
    cols = list(df.columns)
    fig, ax = plt.subplots()
    if cols[:2] == ["p", "re_f"]:
        ax.plot(df.p, df.re_f, label="Re f_rw")
        ax.plot(df.p, -df.gap, "--", label="-gap")
        ax.set_xlabel("|p|")
    elif cols == ["t", "re", "im"]:
        ax.plot(df.t, df.re, label="Re psi")
        ax.plot(df.t, df.im, label="Im psi")
        ax.set_xlabel("t")
    elif cols[:3] == ["traj", "t", "level"]:
        for tid, g in df.groupby("traj"):
            ax.step(g.t, g[cols[3]], where="post", label=f"traj {tid}")
        ax.set_xlabel("t")
        ax.set_ylabel(cols[3])
    else:
        sys.exit(f"unrecognised columns {cols}")
    ax.legend()
    plt.show()


if __name__ == "__main__":
    main(sys.argv[1])
