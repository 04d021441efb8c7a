"""Plot the output of configs/density_lr.toml.

    waveqed configs/density_lr.toml && python docs/plot_density.py density_lr.csv
"""
import sys

import matplotlib.pyplot as plt
import pandas as pd

df = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else "density_lr.csv")
x = df["delta_out"] / 2
plt.plot(x, df["p_ll"], label="LL")
plt.plot(x, df["p_opposite"], label="LR")
plt.xlabel("Δ'/2")
plt.ylabel("P(Δ') (arb. units)")
plt.legend()
plt.tight_layout()
plt.savefig("density.png", dpi=150)
