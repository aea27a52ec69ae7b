"""Exact information measures on a small joint table.

Walks through entropy, conditional entropy and mutual information for a
correlated pair of bits, then attaches a channel and checks two standard
identities numerically.
"""

import numpy as np

from semprivacy import (Channel, JointTable, conditional_entropy,
                        conditional_mutual_information, entropy, extend_with_channel,
                        mutual_information)

# A private bit S and a semantic bit F that agree 80% of the time.
joint = JointTable.from_array([[0.4, 0.1], [0.1, 0.4]], ("S", "F"))
print("P(S,F) =\n", joint.cells)
print(f"H(S)    = {entropy(joint.pmf('S')):.6f} nats")
print(f"H(F|S)  = {conditional_entropy(joint, 'F', 'S'):.6f} nats")
print(f"I(S;F)  = {mutual_information(joint, 'S', 'F'):.6f} nats")

# Any disclosure U produced from (S, F) extends the table by one axis.
rng = np.random.default_rng(1)
channel = Channel(joint.axes, ("U", ("a", "b", "c")), rng.dirichlet(np.ones(3), size=(2, 2)))
ext = extend_with_channel(joint, channel)
print("\nextended axes:", ext.names)

i_uf = mutual_information(ext, "U", "F")
via_chain = mutual_information(ext, "U", ["S", "F"]) - conditional_mutual_information(ext, "S", "U", "F")
print(f"I(U;F)                 = {i_uf:.12f}")
print(f"I(U;S,F) - I(S;U|F)    = {via_chain:.12f}")
print(f"leakage I(U;S)         = {mutual_information(ext, 'U', 'S'):.6f}")
