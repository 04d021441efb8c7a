"""Plot the output of configs/g2_lr.toml or configs/g2_markov.toml.

    waveqed configs/g2_markov.toml && python docs/plot_g2.py g2_markov.csv
"""
import sys

import matplotlib.pyplot as plt
import pandas as pd

df = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else "g2_lr.csv")
for col in ["g2_ll", "g2_lr", "g2_ll_markov", "g2_lr_markov"]:
    if col in df:
        plt.plot(df["tau"], df[col], label=col.removeprefix("g2_"), ls="--" if "markov" in col else "-")
plt.xlabel("τ")
plt.ylabel("g²(τ)")
plt.legend()
plt.tight_layout()
plt.savefig("g2.png", dpi=150)
