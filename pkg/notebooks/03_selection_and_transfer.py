# %% [markdown]
# # Picking a few features, and checking whether they transfer
#
# With hundreds of features and a few dozen samples, most columns are noise.
# Shuffling one column at a time and watching the forest's accuracy drop
# singles out the few that matter.

# %%
import numpy as np

from modkit import Scenario, ScenarioSpec, generate
from modkit import rank_features, select_optimal_subset, repeated_evaluation, transfer_matrix

# %%
ds, truth = generate(ScenarioSpec(Scenario.CURSE_OF_DIM, n_samples=60, n_noise_features=196,
                                  n_informative=4, seed=2))
ranking = rank_features(ds, "F", M_forests=10, n_permutations=5, master_seed=2)
for e in ranking.entries[:6]:
    print(f"{e.feature_name:10s} {e.mean_accuracy_drop:+.4f} (sd {e.std:.4f})")
chosen = select_optimal_subset(ranking, 4)
print("selected:", chosen, " truly informative:", list(truth.informative))

# %%
full = repeated_evaluation(ds, "F", M=20, master_seed=2)
small = repeated_evaluation(ds, "F", chosen, M=20, master_seed=2)
print("median F1, all 200 features:", round(full.aggregates["f1_model"]["median"], 3))
print("median F1, 4 selected      :", round(small.aggregates["f1_model"]["median"], 3))

# %% [markdown]
# ## Transfer between strata
#
# Two strata respond to F through different features.  A forest trained in one
# stratum is scored on the other; rows are the test stratum, columns the
# training stratum.

# %%
strat, _ = generate(ScenarioSpec(Scenario.STRATIFIED_TRANSFER, n_samples=300, n_informative=3,
                                 n_noise_features=6, seed=4))
tm = transfer_matrix(strat, "stratum", "F", M=10, master_seed=4, importance_forests=10,
                     n_permutations=5, subset_size=3)
print("test \\ train", tm.strata)
for label, row in zip(tm.strata, np.round(tm.values, 3)):
    print(f"{label:12s}", row)
print("subsets:", tm.subsets)
