"""
A backdoor round by round: FedAvg against Fedward
=================================================

Five of twenty clients hold corner-trigger poisoned data (PDR 46.875%) and
scale their updates by 5. We run 30 rounds with each aggregator and print
the attack success rate (ASR), main-task accuracy (MA) and, for Fedward,
how many selected malicious clients escaped the clustering.
"""

from fedward.attacks import AttackSpec
from fedward.defense import DefenseSpec
from fedward.harness import ExperimentConfig, run_experiment

base = ExperimentConfig(nir=0.5, attack=AttackSpec("data_poison_scale", 5.0), seed=0)

runs = {kind: run_experiment(base.replace(defense=DefenseSpec(kind)))
        for kind in ("fedavg", "median", "fedward")}

print("round | " + " | ".join(f"{k:>7} ASR  MA " for k in runs))
for t in range(0, 30, 3):
    cells = [f"{r.rounds[t].asr_round:8.3f} {r.rounds[t].ma_round:5.3f}" for r in runs.values()]
    print(f"{t + 1:5d} | " + " | ".join(cells))

# %%
# Summary: AASR averages ASR over every round; AER averages the escape rate
# over rounds where at least one malicious client was selected.
for kind, s in runs.items():
    aer = "n/a" if s.aer is None else f"{s.aer:.3f}"
    print(f"{kind:>8}: AASR {s.aasr:.3f}  AER {aer}  MA final {s.ma_final:.3f}")

fw = runs["fedward"].rounds
print("fedward clip bound per round:", ", ".join(f"{r.rho_clip:.3f}" for r in fw[:8]), "...")
