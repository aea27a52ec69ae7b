"""Closed-form bounds against a numerical search for the trade-off.

For a few budgets the best utility found by the oracle is printed between
the two lower bounds and the upper bound. A second joint, where S is a
function of F, shows the upper bound being reached.
"""

from semprivacy import JointTable, efrl_mechanism, estimate_h_eps, theorem1_bounds

RESTARTS = 8


def table(joint, budgets):
    print("  eps    L_h1      [L_h2]+   EFRL      oracle    upper")
    for eps in budgets:
        b = theorem1_bounds(joint, eps)
        res = estimate_h_eps(joint, eps, restarts=RESTARTS)
        efrl = efrl_mechanism(joint, eps).utility_semantic
        print(f"  {eps:<5}  {b.L_h1:+.5f}  {b.L_h2_clamped:.5f}   {efrl:.5f}   "
              f"{res.value:.5f}   {b.upper_h_eps:.5f}   tight={b.tight}")


print("noisy pair:")
table(JointTable.from_array([[0.4, 0.1], [0.1, 0.4]], ("S", "F")), (0.0, 0.05, 0.1, 0.2))

print("\nS is the parity of a three-valued F:")
table(JointTable.from_array([[0.3, 0.0, 0.2], [0.0, 0.5, 0.0]], ("S", "F")), (0.0, 0.1, 0.3))
