"""Export the IEEE test cases shipped with PYPOWER as MATPOWER .m files.

Run once to (re)generate data/case*.m:  python3 scripts/export_cases.py
"""
import pathlib

from pypower.api import case9, case14, case57, case118

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def fmt(v):
    if float(v).is_integer():
        return "%d" % int(v)
    return repr(float(v))


def block(name, rows, header):
    lines = ["%% %s data" % name, "%%\t" + "\t".join(header), "mpc.%s = [" % name]
    for r in rows:
        lines.append("\t" + "\t".join(fmt(v) for v in r) + ";")
    lines.append("];")
    return "\n".join(lines)


def export(name, ppc):
    parts = [
        "function mpc = %s" % name,
        "%% %s  IEEE test case (exported from PYPOWER)" % name.upper(),
        "",
        "mpc.version = '2';",
        "",
        "%% system MVA base",
        "mpc.baseMVA = %s;" % fmt(ppc["baseMVA"]),
        "",
        block("bus", ppc["bus"][:, :13],
              ["bus_i", "type", "Pd", "Qd", "Gs", "Bs", "area", "Vm", "Va",
               "baseKV", "zone", "Vmax", "Vmin"]),
        "",
        block("gen", ppc["gen"][:, :10],
              ["bus", "Pg", "Qg", "Qmax", "Qmin", "Vg", "mBase", "status",
               "Pmax", "Pmin"]),
        "",
        block("branch", ppc["branch"][:, :13],
              ["fbus", "tbus", "r", "x", "b", "rateA", "rateB", "rateC",
               "ratio", "angle", "status", "angmin", "angmax"]),
        "",
        "%% generator cost data",
        block("gencost", ppc["gencost"], ["model", "startup", "shutdown", "n", "c2", "c1", "c0"]),
        "",
    ]
    (OUT / ("%s.m" % name)).write_text("\n".join(parts))


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for name, fn in [("case9", case9), ("case14", case14), ("case57", case57), ("case118", case118)]:
        export(name, fn())
