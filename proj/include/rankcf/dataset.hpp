#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rankcf {

struct Interaction {
  std::int32_t user = 0;
  std::int32_t item = 0;
  double rating = std::numeric_limits<double>::quiet_NaN();  // NaN when the row had no rating column
};

// Interactions with contiguous user/item ids. *_orig map dense ids back to
// the ids found in the source file.
struct Dataset {
  std::vector<Interaction> interactions;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<std::int64_t> user_orig;
  std::vector<std::int64_t> item_orig;

  // interactions grouped per user, items ascending
  std::vector<std::vector<std::int32_t>> items_by_user() const;
};

// Reads "user<sep>item[<sep>rating[<sep>extra...]]" rows, sep = tab or comma.
// A non-numeric first line is treated as a header. Rows below the rating
// threshold are dropped before ids are densified; duplicate (user,item)
// pairs collapse to one interaction.
Dataset load_interactions(const std::string& path,
                          std::optional<double> rating_threshold = std::nullopt);

// Drops users with fewer than min_n interactions, then items left with no
// interactions, repeating until stable. Ids are re-densified.
Dataset filter_min_interactions(const Dataset& d, int min_n);

enum class Part { kTrain, kValidation, kTest };

// Per-user holdout. The three parts share the parent dataset's id space.
struct TransductiveSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
  double rho = 0.8;
  std::uint64_t seed = 0;
  // held-out interactions pulled back into train so every item keeps
  // at least one training interaction
  int coverage_moves = 0;
};

TransductiveSplit split_transductive(const Dataset& d, double rho, std::uint64_t seed);

// User-level holdout. Validation/test users contribute a fold-in prefix of
// their history (ranking input) and a fold-out remainder (ground truth).
struct InductiveSplit {
  std::vector<std::int32_t> train_users;
  std::vector<std::int32_t> val_users;
  std::vector<std::int32_t> test_users;
  double mu = 0.8;
  double eta = 0.8;
  std::uint64_t seed = 0;
  Dataset train;  // full histories of train_users, parent id space
  // indexed by user id; empty for train users
  std::vector<std::vector<std::int32_t>> fold_in;
  std::vector<std::vector<std::int32_t>> fold_out;
  int dropped_interactions = 0;  // fold items absent from every training history
  int dropped_users = 0;         // val/test users left with an empty fold side
};

InductiveSplit split_inductive(const Dataset& d, double mu, double eta, std::uint64_t seed);

// Manifests list one interaction per line as original ids:
// "user<TAB>item<TAB>part". The JSON summary holds counts and parameters.
void write_transductive_manifest(const TransductiveSplit& s, const std::string& path);
void write_inductive_manifest(const InductiveSplit& s, const std::string& path);
std::string transductive_summary_json(const TransductiveSplit& s);
std::string inductive_summary_json(const InductiveSplit& s);

}  // namespace rankcf
