# %% [markdown]
# # Exact information measures on small joint tables
#
# A factor F modulates a set of signals S when some subset of S shares
# information with F.  With an explicit joint pmf every quantity is exact.

# %%
import numpy as np

from modkit import JointPmf, entropy, conditional_entropy, mutual_information
from modkit import conditional_mutual_information, is_modulator, is_robust_modulator, modulator_witness

# %%
# A binary factor and a binary signal that agree 80% of the time.
p = JointPmf(["F", "S"], [[0.4, 0.1], [0.1, 0.4]])
print("H(F)   =", entropy(p, "F"))
print("H(F|S) =", conditional_entropy(p, "F", "S"))
print("I(F;S) =", mutual_information(p, "F", "S"))   # 1 - H(0.8) = 0.278072 bits

# %% [markdown]
# ## Information that only shows up jointly
#
# With S2 = F xor S1, neither signal alone says anything about F, but the pair
# determines it.  The subset search finds the pair as the witness.

# %%
probs = np.zeros((2, 2, 2))
for f in (0, 1):
    for s1 in (0, 1):
        probs[f, s1, f ^ s1] = 0.25
xor = JointPmf(["F", "S1", "S2"], probs)
print("I(F;S1)    =", mutual_information(xor, "F", "S1"))
print("I(F;S1,S2) =", mutual_information(xor, "F", ["S1", "S2"]))
print("witness    =", modulator_witness(xor, "F", ["S1", "S2"]))

# %% [markdown]
# ## A factor that acts only through another factor
#
# F1 -> F2 -> S: F1 is informative about S, but once F2 is known nothing is
# left.  F1 is a modulator, not a robust one.

# %%
flip = 0.1
f1 = np.array([0.5, 0.5])
channel = np.array([[1 - flip, flip], [flip, 1 - flip]])
emission = np.array([[0.8, 0.2], [0.3, 0.7]])
chain = JointPmf(["F1", "F2", "S"], np.einsum("a,ab,bs->abs", f1, channel, emission))
print("I(F1;S)    =", mutual_information(chain, "F1", "S"))
print("I(F1;S|F2) =", conditional_mutual_information(chain, "F1", "S", "F2"))
print("modulator:", is_modulator(chain, "F1", ["S"]),
      " robust:", is_robust_modulator(chain, "F1", "F2", ["S"]))
