"""The MNIST sweep: digit label as semantic, ink ratio as task.

Needs the training files; fetch them once with ``scripts/fetch_mnist.py``
and pass the directory as the first argument (or set MNIST_DIR).
"""

import sys

from semprivacy.bounds import utility_bounds
from semprivacy.dataset import build_experiment_joint, load_mnist
from semprivacy.frl import construct_frl, mechanism_utilities, tune_leakage
from semprivacy.probcore import entropy

directory = sys.argv[1] if len(sys.argv) > 1 else None
exp = build_experiment_joint(load_mnist(directory))
joint = exp.joint
print(f"{exp.total} images; P(digit 5) = {joint.pmf('S')[1]:.5f}")
print("P(H | Z), rows are digits, columns ink-ratio intervals 1..7:")
for z, row in enumerate(exp.kernel_h_given_z()):
    print(f"  {z}: " + " ".join(f"{p:.3f}" for p in row))

h_s = entropy(joint.pmf("S"))
frl = construct_frl(joint, "S", "Z")
print(f"\nH(S) = {h_s:.5f} nats")
print("  eps      util_L1   [util_L2]+  upper     EFRL I(U;H)")
for eps in (0.0, 0.05, 0.1, 0.2, h_s):
    r = utility_bounds(joint, eps, f_axis="Z")
    _, task = mechanism_utilities(joint, tune_leakage(joint, frl, eps), "Z", "H")
    print(f"  {eps:.5f}  {r.util_L1:+.5f}  {r.util_L2_clamped:.5f}     {r.util_upper:.5f}   {task:.5f}")
print(f"\ngap between the outer curves: {r.gap:.5f} nats")
