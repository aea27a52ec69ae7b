"""Building a disclosure mechanism with an exact leakage budget.

First a variable U0 independent of S is built so that F can be recovered
from (U0, S). Then a randomized response of S is appended and tuned until
the disclosed pair leaks exactly the budget.
"""

from semprivacy import JointTable, construct_frl, theorem1_bounds, tune_leakage
from semprivacy.frl import frl_check

joint = JointTable.from_array([[0.4, 0.1], [0.1, 0.4]], ("S", "F"))
frl = construct_frl(joint)
print("cells of U0:", {u: round(float(x), 6) for u, x in zip(frl.u_alphabet, frl.cell_lengths)})
for (u0, s), f in sorted(frl.decoder.items()):
    print(f"  decode({u0}, s={s}) -> F={f}")
leak, residual = frl_check(joint, frl)
print(f"I(U0;S) = {leak:.2e}, H(F|U0,S) = {residual}")

print("\n  eps    truth-prob  I(U;S)     I(U;F)     L_h1")
for eps in (0.0, 0.05, 0.1, 0.2, 0.3):
    m = tune_leakage(joint, frl, eps)
    lower = theorem1_bounds(joint, eps).L_h1
    print(f"  {eps:<5}  {m.rr_prob:.6f}    {m.leakage:.6f}   {m.utility_semantic:.6f}   {lower:.6f}")

m = tune_leakage(joint, frl, 2.0)
print(f"\nasking for 2 nats is clamped to H(S): clamped={m.clamped}, eps={m.epsilon:.6f}")
