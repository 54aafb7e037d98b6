#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace warmopf {

enum class BusKind { Slack, PV, PQ };

std::string_view to_string(BusKind kind);

/// One network node. Powers and admittances are per-unit on the case base,
/// angles are radians.
struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double p_load = 0.0;
  double q_load = 0.0;
  double g_shunt = 0.0;
  double b_shunt = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
  double v_init = 1.0;
  double theta_init = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double p_init = 0.0;
  double q_init = 0.0;

  bool operator==(const Generator&) const = default;
};

/// Pi-model branch. `tap` is the off-nominal ratio on the from side (1.0 for
/// plain lines), `shift` the phase shift in radians. `rate_a` is the MVA
/// rating in p.u. (0 means unlimited) and is only used when line limits are
/// enforced.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_ch = 0.0;
  double tap = 1.0;
  double shift = 0.0;
  double rate_a = 0.0;
  bool in_service = true;

  bool operator==(const Branch&) const = default;
};

/// Quadratic cost a*p^2 + b*p + c with p in p.u. and the result in $/h.
struct CostCurve {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  bool operator==(const CostCurve&) const = default;
};

/// Validated network model. Buses are kept sorted by external id so the
/// position of a bus in `buses` is its dense index.
struct CaseData {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> gens;
  std::vector<Branch> branches;
  std::vector<CostCurve> costs;
  std::vector<std::string> warnings;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_gens() const { return gens.size(); }

  /// Equality of the network content; `warnings` and `name` are ignored.
  bool same_network(const CaseData& other) const;
};

/// Bijection between external bus ids and dense indices 0..N-1, ordered by id.
class BusIndex {
 public:
  BusIndex() = default;
  explicit BusIndex(std::vector<int> sorted_ids);

  std::size_t size() const { return ids_.size(); }
  int id_of(std::size_t index) const { return ids_.at(index); }
  std::size_t index_of(int id) const;
  bool contains(int id) const { return pos_.count(id) != 0; }
  const std::vector<int>& ids() const { return ids_; }

 private:
  std::vector<int> ids_;
  std::unordered_map<int, std::size_t> pos_;
};

/// Parses MATPOWER case syntax (blocks baseMVA, bus, gen, branch, gencost).
CaseData parse_case(std::string_view text, std::string name = "case");

/// Reads a `.m` case file, or the JSON mirror when the extension is `.json`.
CaseData load_case(const std::filesystem::path& path);

/// Checks every CaseData invariant and normalizes the case in place: buses
/// sorted by id, initial magnitudes clamped into their bounds, PV buses
/// without generators demoted to PQ. Warnings are appended to `warnings`.
void validate_case(CaseData& data);

BusIndex index_map(const CaseData& data);

/// Emits MATPOWER case syntax that parses back to the same CaseData.
std::string write_case(const CaseData& data);

nlohmann::json case_to_json(const CaseData& data);
CaseData case_from_json(const nlohmann::json& j);

/// SHA-256 of the canonical case text; used to tie datasets and models to
/// the network they were built from.
std::string case_hash(const CaseData& data);

}  // namespace warmopf
