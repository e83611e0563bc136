#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/error.hpp"

using namespace rankcf;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = fs::temp_directory_path() / ("rankcf_ds_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++) + ".txt");
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

std::multiset<std::pair<int, int>> pairs(const Dataset& d) {
  std::multiset<std::pair<int, int>> out;
  for (const auto& x : d.interactions)
    out.insert({static_cast<int>(d.user_orig[x.user]), static_cast<int>(d.item_orig[x.item])});
  return out;
}

// fixpoint removal done the slow way: literally re-filter until nothing
// changes
std::multiset<std::pair<int, int>> brute_force_filter(std::multiset<std::pair<int, int>> rows,
                                                      int min_n) {
  for (;;) {
    std::map<int, int> cnt;
    for (const auto& [u, i] : rows) ++cnt[u];
    std::multiset<std::pair<int, int>> next;
    for (const auto& [u, i] : rows)
      if (cnt[u] >= min_n) next.insert({u, i});
    if (next == rows) return rows;
    rows = std::move(next);
  }
}

}  // namespace

TEST_CASE("comma and tab separated rows both load") {
  TempFile f("1,10,4.0\n2\t20\t5.0\n1\t30\t3.5\n");
  auto d = load_interactions(f.path.string());
  CHECK(d.num_users == 2);
  CHECK(d.num_items == 3);
  CHECK(d.interactions.size() == 3);
  CHECK(pairs(d) == std::multiset<std::pair<int, int>>{{1, 10}, {1, 30}, {2, 20}});
}

TEST_CASE("header line and trailing columns are tolerated") {
  TempFile f("userId,movieId,rating,timestamp\n7,3,4.5,964982703\n8,3,2.0,964982931\n");
  auto d = load_interactions(f.path.string());
  CHECK(d.num_users == 2);
  CHECK(d.num_items == 1);
}

TEST_CASE("rating threshold drops rows before densification") {
  TempFile f("1,10,4.0\n1,11,2.0\n2,11,1.0\n2,12,5.0\n");
  auto d = load_interactions(f.path.string(), 3.0);
  CHECK(d.num_users == 2);
  CHECK(d.num_items == 2);  // item 11 vanishes entirely
  CHECK(pairs(d) == std::multiset<std::pair<int, int>>{{1, 10}, {2, 12}});

  auto all = load_interactions(f.path.string());
  CHECK(all.num_items == 3);
}

TEST_CASE("rows without a rating column pass only when no threshold is set") {
  TempFile f("1,10\n2,11\n");
  auto d = load_interactions(f.path.string());
  CHECK(d.interactions.size() == 2);
  CHECK(std::isnan(d.interactions[0].rating));
  CHECK_THROWS_AS(load_interactions(f.path.string(), 3.0), EmptyDatasetError);
}

TEST_CASE("duplicate pairs collapse to one interaction") {
  TempFile f("1,10,4.0\n1,10,5.0\n1,11,4.0\n");
  auto d = load_interactions(f.path.string());
  CHECK(d.interactions.size() == 2);
}

TEST_CASE("ids densify in sorted order of the original ids") {
  TempFile f("42,900,1.0\n7,100,1.0\n42,100,1.0\n");
  auto d = load_interactions(f.path.string());
  CHECK(d.user_orig == std::vector<std::int64_t>{7, 42});
  CHECK(d.item_orig == std::vector<std::int64_t>{100, 900});
}

TEST_CASE("parse errors name the file and line") {
  TempFile f("1,10,4.0\nx,10,4.0\n");
  try {
    load_interactions(f.path.string());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  TempFile g("1,10,abc\n");
  CHECK_THROWS_AS(load_interactions(g.path.string()), ParseError);
  CHECK_THROWS_AS(load_interactions("/nonexistent/path.csv"), IoError);
}

TEST_CASE("empty input is an empty-dataset error") {
  TempFile f("userId,movieId,rating\n");
  CHECK_THROWS_AS(load_interactions(f.path.string()), EmptyDatasetError);
}

TEST_CASE("min-interaction filter matches a brute-force fixpoint") {
  TempFile f(
      "1,10,1\n1,11,1\n1,12,1\n"
      "2,10,1\n2,13,1\n"
      "3,13,1\n"
      "4,14,1\n4,15,1\n4,16,1\n4,10,1\n");
  auto d = load_interactions(f.path.string());
  for (int min_n : {1, 2, 3, 4}) {
    auto got = filter_min_interactions(d, min_n);
    CHECK(pairs(got) == brute_force_filter(pairs(d), min_n));
    for (auto orig : got.item_orig) {
      bool present = false;
      for (const auto& x : got.interactions)
        if (got.item_orig[x.item] == orig) present = true;
      CHECK(present);  // no zero-degree items survive
    }
  }
  CHECK_THROWS_AS(filter_min_interactions(d, 100), EmptyDatasetError);
}

namespace {

Dataset grid_dataset(int users, int items_per_user) {
  // user u interacts with items u..u+items_per_user-1, so items overlap
  std::string body;
  for (int u = 0; u < users; ++u)
    for (int k = 0; k < items_per_user; ++k)
      body += std::to_string(u + 1) + "," + std::to_string(u + k + 1) + ",5\n";
  TempFile f(body);
  return load_interactions(f.path.string());
}

}  // namespace

TEST_CASE("transductive split sizes follow the floor rule") {
  auto d = grid_dataset(6, 10);
  auto s = split_transductive(d, 0.8, 7);
  CHECK(s.rho == 0.8);

  auto train_by_user = s.train.items_by_user();
  auto val_by_user = s.validation.items_by_user();
  auto test_by_user = s.test.items_by_user();
  for (std::int32_t u = 0; u < d.num_users; ++u) {
    const auto moved =
        static_cast<std::size_t>(std::count_if(s.train.interactions.begin(),
                                               s.train.interactions.end(),
                                               [&](const Interaction& x) { return x.user == u; }));
    CHECK(moved >= 8);  // floor(0.8 * 10) plus possible coverage pulls
    CHECK(train_by_user[u].size() + val_by_user[u].size() + test_by_user[u].size() == 10);

    // parts are disjoint and rebuild the user's original item set
    std::set<std::int32_t> seen;
    for (auto* part : {&train_by_user[u], &val_by_user[u], &test_by_user[u]})
      for (auto i : *part) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 10);
  }
}

TEST_CASE("transductive split is deterministic in the seed") {
  auto d = grid_dataset(8, 12);
  auto a = split_transductive(d, 0.7, 123);
  auto b = split_transductive(d, 0.7, 123);
  CHECK(pairs(a.train) == pairs(b.train));
  CHECK(pairs(a.validation) == pairs(b.validation));
  CHECK(pairs(a.test) == pairs(b.test));

  auto c = split_transductive(d, 0.7, 124);
  CHECK(pairs(a.train) != pairs(c.train));
}

TEST_CASE("every item keeps a training interaction") {
  // item "60" exists only in user 1's history; wherever the shuffle puts
  // it, it must end up in train
  std::string body;
  for (int k = 0; k < 10; ++k) body += "1," + std::to_string(50 + k) + ",5\n";
  for (int k = 0; k < 10; ++k) body += "2," + std::to_string(40 + k) + ",5\n";
  TempFile f(body);
  auto d = load_interactions(f.path.string());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = split_transductive(d, 0.8, seed);
    std::set<std::int32_t> covered;
    for (const auto& x : s.train.interactions) covered.insert(x.item);
    CHECK(covered.size() == static_cast<std::size_t>(d.num_items));
  }
}

TEST_CASE("transductive split rejects degenerate parameters") {
  auto d = grid_dataset(3, 10);
  CHECK_THROWS_AS(split_transductive(d, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_transductive(d, 1.0, 1), ConfigError);

  TempFile tiny("1,10,5\n2,10,5\n2,11,5\n");
  auto td = load_interactions(tiny.path.string());
  // user 1 has a single interaction; floor(0.8 * 1) = 0 train items
  CHECK_THROWS_AS(split_transductive(td, 0.8, 1), ConfigError);
}

TEST_CASE("inductive split partitions users and folds histories") {
  auto d = grid_dataset(10, 10);
  auto s = split_inductive(d, 0.8, 0.8, 11);
  CHECK(s.train_users.size() == 8);
  CHECK(s.val_users.size() + s.test_users.size() == 2);

  std::set<std::int32_t> all_users(s.train_users.begin(), s.train_users.end());
  for (auto u : s.val_users) CHECK(all_users.insert(u).second);
  for (auto u : s.test_users) CHECK(all_users.insert(u).second);

  for (const auto& x : s.train.interactions)
    CHECK(std::binary_search(s.train_users.begin(), s.train_users.end(), x.user));

  auto by_user = d.items_by_user();
  for (auto u : s.val_users) {
    CHECK(!s.fold_in[u].empty());
    CHECK(!s.fold_out[u].empty());
    std::set<std::int32_t> fold(s.fold_in[u].begin(), s.fold_in[u].end());
    for (auto i : s.fold_out[u]) CHECK(fold.insert(i).second);
    // folded items all come from the user's history
    std::set<std::int32_t> hist(by_user[u].begin(), by_user[u].end());
    for (auto i : fold) CHECK(hist.count(i) == 1);
  }
}

TEST_CASE("inductive fold items outside the training item set are dropped") {
  // user 5's two items belong to nobody else; when user 5 is held out both
  // fold sides empty and the user is dropped
  std::string body;
  for (int u = 1; u <= 4; ++u)
    for (int k = 0; k < 4; ++k) body += std::to_string(u) + "," + std::to_string(k) + ",5\n";
  body += "5,100,5\n5,101,5\n";
  TempFile f(body);
  auto d = load_interactions(f.path.string());

  bool exercised = false;
  for (std::uint64_t seed = 0; seed < 64 && !exercised; ++seed) {
    auto s = split_inductive(d, 0.8, 0.5, seed);
    const std::int32_t u5 = 4;  // dense id of original user 5
    const bool held_out = !std::binary_search(s.train_users.begin(), s.train_users.end(), u5);
    if (!held_out) continue;
    exercised = true;
    CHECK(s.dropped_users == 1);
    CHECK(s.dropped_interactions == 2);
    CHECK(s.fold_in[u5].empty());
    for (auto u : s.val_users) CHECK(u != u5);
    for (auto u : s.test_users) CHECK(u != u5);
  }
  CHECK(exercised);
}

TEST_CASE("inductive split is deterministic in the seed") {
  auto d = grid_dataset(12, 10);
  auto a = split_inductive(d, 0.75, 0.8, 5);
  auto b = split_inductive(d, 0.75, 0.8, 5);
  CHECK(a.train_users == b.train_users);
  CHECK(a.val_users == b.val_users);
  CHECK(a.test_users == b.test_users);
  CHECK(a.fold_in == b.fold_in);
  CHECK(a.fold_out == b.fold_out);
  CHECK(pairs(a.train) == pairs(b.train));
}

TEST_CASE("manifests list original ids with part tags") {
  auto d = grid_dataset(6, 10);
  auto s = split_transductive(d, 0.8, 3);
  auto path = fs::temp_directory_path() / "rankcf_manifest_t.tsv";
  write_transductive_manifest(s, path.string());

  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  std::map<std::string, int> tag_count;
  while (std::getline(in, line)) {
    ++rows;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    REQUIRE(t2 != std::string::npos);
    ++tag_count[line.substr(t2 + 1)];
  }
  CHECK(rows == s.train.interactions.size() + s.validation.interactions.size() +
                    s.test.interactions.size());
  CHECK(tag_count["train"] == static_cast<int>(s.train.interactions.size()));
  CHECK(tag_count["val"] == static_cast<int>(s.validation.interactions.size()));
  CHECK(tag_count["test"] == static_cast<int>(s.test.interactions.size()));
  fs::remove(path);

  auto summary = nlohmann::json::parse(transductive_summary_json(s));
  CHECK(summary["protocol"] == "transductive");
  CHECK(summary["train_interactions"].get<std::size_t>() == s.train.interactions.size());
}

TEST_CASE("inductive manifest covers folds of both held-out groups") {
  auto d = grid_dataset(10, 10);
  auto s = split_inductive(d, 0.8, 0.8, 11);
  auto path = fs::temp_directory_path() / "rankcf_manifest_i.tsv";
  write_inductive_manifest(s, path.string());

  std::ifstream in(path);
  std::string line;
  std::map<std::string, std::size_t> tag_count;
  while (std::getline(in, line)) ++tag_count[line.substr(line.rfind('\t') + 1)];
  fs::remove(path);

  std::size_t vin = 0, vout = 0;
  for (auto u : s.val_users) {
    vin += s.fold_in[u].size();
    vout += s.fold_out[u].size();
  }
  CHECK(tag_count["train"] == s.train.interactions.size());
  CHECK(tag_count["val_in"] == vin);
  CHECK(tag_count["val_out"] == vout);

  auto summary = nlohmann::json::parse(inductive_summary_json(s));
  CHECK(summary["val_fold_in"].get<std::size_t>() == vin);
  CHECK(summary["dropped_users"].get<int>() == s.dropped_users);
}
