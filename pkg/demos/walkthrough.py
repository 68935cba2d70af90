"""A short tour: one regular problem with a Jordan chain at 0, then a
logarithmic weight whose left endpoint is singular.

Run with  python3 demos/walkthrough.py
"""
from pathlib import Path

from polarsl import catalog as K
from polarsl import classify as C
from polarsl import eigensolver as E
from polarsl import weyl
from polarsl.coeffs import load_problem

HERE = Path(__file__).resolve().parent


def show(title, p):
    print(f"== {title}")
    sim = C.similarity_and_riesz(p)
    print(f"  regular at infinity: {sim.infinity.status.status} via {sim.infinity.route}")
    print(f"  regular at zero:     {sim.zero.status.status} (case {sim.zero.case})")
    print(f"  similar to s.a.:     {sim.status.status}; Riesz basis: {sim.riesz.status}")
    kern = E.kernel_analysis(p)
    print(f"  kernel dim {kern.kernel_dim}, chain length {kern.chain_length} ({kern.note})")
    return sim


# constant weight with a sign change: the kernel condition vanishes, so 0 is
# not semisimple and similarity fails even though infinity is regular
sgn = K.get_problem("sgn")
show("w = sgn x on (-1, 1)", sgn)
spec = E.eigenvalues(sgn, (-60.0, 60.0))
for e in spec.eigenvalues:
    print(f"  lam = {e.lam:12.6f}  {e.sign_class:8s}  {e.multiplicity_note}")

# the m-function on the imaginary axis follows the Atkinson-type prediction
tr = weyl.m_trace(sgn, "+", [1e2, 1e4, 1e6])
for y, m in zip(tr.y, tr.m):
    print(f"  y = {y:8.0e}  m+(iy) = {m.real:+.6f}{m.imag:+.6f}i")

# logarithmic weights from a problem file; vary alpha_minus through the
# balanced value where the Q ratio test stops working
for am in (1.0, 0.5):
    p = load_problem(HERE / "log_weight.cfg", {"alpha_minus": am})
    show(f"log weight alpha+ = 0.5, alpha- = {am}", p)
