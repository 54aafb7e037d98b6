"""Offline reference ACOPF objectives used by the test suite.

Solves the bundled IEEE cases with PYPOWER's PIPS (a port of MATPOWER's MIPS)
under the same constraint set as warmopf: generator boxes, voltage magnitude
bounds, fixed reference angle. Branch ratings are raised to a non-binding
value (PYPOWER fails when no flow constraints exist at all).

PYPOWER needs an old NumPy/SciPy stack:
    python3 -m venv /tmp/ppenv
    /tmp/ppenv/bin/pip install pypower numpy==1.21.6 scipy==1.7.3
    /tmp/ppenv/bin/python scripts/reference_opf.py
"""
import warnings

from pypower.api import case9, case14, case57, case118, ppoption, runopf

warnings.filterwarnings("ignore")

opts = ppoption(VERBOSE=0, OUT_ALL=0, PDIPM_GRADTOL=1e-10, PDIPM_COMPTOL=1e-10,
                PDIPM_FEASTOL=1e-10, PDIPM_COSTTOL=1e-12)
for fn in (case9, case14, case57, case118):
    ppc = fn()
    ppc["branch"][:, 5] = 1e5
    r = runopf(ppc, opts)
    print("%-8s success=%s objective=%r" % (fn.__name__, r["success"], r["f"]))
