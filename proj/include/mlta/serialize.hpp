#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mlta/model.hpp"
#include "mlta/posthoc.hpp"
#include "mlta/selection.hpp"
#include "mlta/simulate.hpp"
#include "mlta/variational.hpp"

namespace mlta {

// Fixed "%.12g" rendering used by every CSV artifact, so reruns are
// byte-identical.
std::string format_double(double v);

using json = nlohmann::ordered_json;

json params_to_json(const Parameters& p);
Parameters params_from_json(const nlohmann::json& j);

// Complete fit round-trip, including the variational state.
json fit_to_json(const FitResult& fr);
FitResult fit_from_json(const nlohmann::json& j);

json selection_to_json(const SelectionTable& t);

// Ground-truth sidecar for a synthetic sample (groups are 1-based here, as in
// every artifact).
json sample_truth_to_json(const SyntheticSample& s);

void write_json_file(const json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

// CSV artifacts. Group and receiver indices are 1-based throughout.
void write_bound_trace_csv(const std::vector<double>& trace,
                           const std::string& path);
void write_memberships_csv(const MembershipReport& rep,
                           const std::vector<std::string>& sender_labels,
                           const std::string& path);
void write_traits_csv(const TraitScores& t,
                      const std::vector<std::string>& sender_labels,
                      const std::string& path);
// Wide BIC table: one row per G, one column per (D, variant).
void write_selection_csv(const SelectionTable& t, const std::string& path);
void write_dependence_csv(const FitResult& fit, const std::string& path);
void write_loglift_csv(const FitResult& fit, const GHRule& rule,
                       const std::string& path);
void write_median_prob_csv(const FitResult& fit,
                           const std::vector<std::string>& receiver_labels,
                           const std::string& path);
void write_se_csv(const JackknifeReport& rep, const std::string& path);

}  // namespace mlta
