#pragma once

#include <string>

#include "warmopf/casefile.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(WARMOPF_DATA_DIR) + "/" + name; }

// Bus 1 slack with a generator, bus 2 PQ, one lossless branch x = 0.1.
// Pd in MW; cost c2, c1 in $/MW^2h, $/MWh.
inline std::string two_bus_text(double pd_mw = 50.0, double qd_mvar = 0.0, double pmax_mw = 1000.0) {
  return "function mpc = two_bus\n"
         "mpc.version = '2';\n"
         "mpc.baseMVA = 100;\n"
         "mpc.bus = [\n"
         "  1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n"
         "  2 1 " + std::to_string(pd_mw) + " " + std::to_string(qd_mvar) + " 0 0 1 1 0 100 1 1.1 0.9;\n"
         "];\n"
         "mpc.gen = [\n"
         "  1 0 0 1000 -1000 1 100 1 " + std::to_string(pmax_mw) + " 0;\n"
         "];\n"
         "mpc.branch = [\n"
         "  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;\n"
         "];\n"
         "mpc.gencost = [\n"
         "  2 0 0 3 0 1 0;\n"
         "];\n";
}

inline warmopf::CaseData two_bus(double pd_mw = 50.0, double qd_mvar = 0.0, double pmax_mw = 1000.0) {
  return warmopf::parse_case(two_bus_text(pd_mw, qd_mvar, pmax_mw), "two_bus");
}

// Single bus, load 50 MW, generator cost 0.01 p^2 + 40 p in p.u. units.
inline warmopf::CaseData one_bus() {
  return warmopf::parse_case(
      "mpc.baseMVA = 100;\n"
      "mpc.bus = [ 1 3 50 0 0 0 1 1 0 100 1 1.1 0.9 ];\n"
      "mpc.gen = [ 1 0 0 100 -100 1 100 1 200 0 ];\n"
      "mpc.branch = [];\n"
      "mpc.gencost = [ 2 0 0 3 0.000001 0.4 0 ];\n",
      "one_bus");
}

inline warmopf::CaseData load(const std::string& name) { return warmopf::load_case(data_path(name + ".m")); }

}  // namespace fixtures
