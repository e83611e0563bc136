#include "rankcf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rankcf/error.hpp"
#include "rankcf/rng.hpp"

namespace rankcf {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find_first_of(",\t", start);
    if (end == std::string_view::npos) end = line.size();
    std::string_view f = line.substr(start, end - start);
    while (!f.empty() && (f.front() == ' ')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (end == line.size()) break;
    start = end + 1;
  }
  return out;
}

bool parse_i64(std::string_view f, std::int64_t& out) {
  auto r = std::from_chars(f.data(), f.data() + f.size(), out);
  return r.ec == std::errc() && r.ptr == f.data() + f.size();
}

bool parse_f64(std::string_view f, double& out) {
  auto r = std::from_chars(f.data(), f.data() + f.size(), out);
  return r.ec == std::errc() && r.ptr == f.data() + f.size();
}

void densify(std::vector<std::int64_t>& ids,
             std::unordered_map<std::int64_t, std::int32_t>& index) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  index.reserve(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k)
    index.emplace(ids[k], static_cast<std::int32_t>(k));
}

}  // namespace

std::vector<std::vector<std::int32_t>> Dataset::items_by_user() const {
  std::vector<std::vector<std::int32_t>> by_user(num_users);
  for (const auto& x : interactions) by_user[x.user].push_back(x.item);
  for (auto& v : by_user) std::sort(v.begin(), v.end());
  return by_user;
}

Dataset load_interactions(const std::string& path, std::optional<double> rating_threshold) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open interactions file: " + path);

  struct RawRow {
    std::int64_t user;
    std::int64_t item;
    double rating;
  };
  std::vector<RawRow> rows;
  std::string line;
  long long lineno = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    if (sv.empty()) continue;
    auto fields = split_fields(sv);
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;

    std::int64_t u = 0, i = 0;
    if (!parse_i64(fields[0], u)) {
      if (first_content_line) {  // header row
        first_content_line = false;
        continue;
      }
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad user id '" +
                       std::string(fields[0]) + "'");
    }
    first_content_line = false;
    if (fields.size() < 2 || !parse_i64(fields[1], i))
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad item id");
    double r = std::numeric_limits<double>::quiet_NaN();
    if (fields.size() >= 3 && !fields[2].empty()) {
      if (!parse_f64(fields[2], r))
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad rating '" +
                         std::string(fields[2]) + "'");
    }
    if (rating_threshold) {
      if (std::isnan(r)) continue;  // no rating, cannot pass an explicit threshold
      if (r < *rating_threshold) continue;
    }
    rows.push_back({u, i, r});
  }
  if (rows.empty()) throw EmptyDatasetError("no interactions left after loading " + path);

  Dataset d;
  for (const auto& r : rows) {
    d.user_orig.push_back(r.user);
    d.item_orig.push_back(r.item);
  }
  std::unordered_map<std::int64_t, std::int32_t> uidx, iidx;
  densify(d.user_orig, uidx);
  densify(d.item_orig, iidx);
  d.num_users = static_cast<std::int32_t>(d.user_orig.size());
  d.num_items = static_cast<std::int32_t>(d.item_orig.size());

  std::unordered_set<std::int64_t> seen;
  seen.reserve(rows.size() * 2);
  d.interactions.reserve(rows.size());
  for (const auto& r : rows) {
    std::int32_t u = uidx.at(r.user);
    std::int32_t i = iidx.at(r.item);
    std::int64_t key = (static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(i);
    if (!seen.insert(key).second) continue;
    d.interactions.push_back({u, i, r.rating});
  }
  return d;
}

Dataset filter_min_interactions(const Dataset& d, int min_n) {
  if (min_n < 0) throw ConfigError("min_interactions must be >= 0");
  std::vector<char> user_alive(d.num_users, 1);
  std::vector<char> item_alive(d.num_items, 1);

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::int64_t> ucount(d.num_users, 0);
    for (const auto& x : d.interactions)
      if (user_alive[x.user] && item_alive[x.item]) ++ucount[x.user];
    for (std::int32_t u = 0; u < d.num_users; ++u) {
      if (user_alive[u] && ucount[u] < min_n) {
        user_alive[u] = 0;
        changed = true;
      }
    }
    std::vector<std::int64_t> icount(d.num_items, 0);
    for (const auto& x : d.interactions)
      if (user_alive[x.user] && item_alive[x.item]) ++icount[x.item];
    for (std::int32_t i = 0; i < d.num_items; ++i) {
      if (item_alive[i] && icount[i] == 0) {
        item_alive[i] = 0;
        changed = true;
      }
    }
  }

  std::vector<std::int32_t> umap(d.num_users, -1), imap(d.num_items, -1);
  Dataset out;
  for (std::int32_t u = 0; u < d.num_users; ++u)
    if (user_alive[u]) {
      umap[u] = static_cast<std::int32_t>(out.user_orig.size());
      out.user_orig.push_back(d.user_orig[u]);
    }
  for (std::int32_t i = 0; i < d.num_items; ++i)
    if (item_alive[i]) {
      imap[i] = static_cast<std::int32_t>(out.item_orig.size());
      out.item_orig.push_back(d.item_orig[i]);
    }
  out.num_users = static_cast<std::int32_t>(out.user_orig.size());
  out.num_items = static_cast<std::int32_t>(out.item_orig.size());
  if (out.num_users == 0)
    throw EmptyDatasetError("all users removed by min_interactions=" + std::to_string(min_n));
  for (const auto& x : d.interactions)
    if (user_alive[x.user] && item_alive[x.item])
      out.interactions.push_back({umap[x.user], imap[x.item], x.rating});
  return out;
}

namespace {

Dataset make_part(const Dataset& parent) {
  Dataset p;
  p.num_users = parent.num_users;
  p.num_items = parent.num_items;
  p.user_orig = parent.user_orig;
  p.item_orig = parent.item_orig;
  return p;
}

}  // namespace

TransductiveSplit split_transductive(const Dataset& d, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");

  auto by_user = d.items_by_user();
  TransductiveSplit s;
  s.rho = rho;
  s.seed = seed;
  s.train = make_part(d);
  s.validation = make_part(d);
  s.test = make_part(d);

  Rng rng(seed);
  std::vector<std::vector<std::int32_t>> train_items(d.num_users);
  std::vector<std::vector<std::int32_t>> val_items(d.num_users);
  std::vector<std::vector<std::int32_t>> test_items(d.num_users);
  std::vector<std::int64_t> item_train_deg(d.num_items, 0);

  for (std::int32_t u = 0; u < d.num_users; ++u) {
    auto items = by_user[u];
    auto n = static_cast<std::int64_t>(items.size());
    if (n == 0) continue;
    auto n_train = static_cast<std::int64_t>(std::floor(rho * static_cast<double>(n)));
    std::int64_t held = n - n_train;
    if (n_train == 0)
      throw ConfigError("rho=" + std::to_string(rho) + " leaves user " + std::to_string(u) +
                        " with an empty train part");
    if (held == 0)
      throw ConfigError("rho=" + std::to_string(rho) + " leaves user " + std::to_string(u) +
                        " with an empty held-out part");
    rng.shuffle(items);
    std::int64_t n_val = held / 2;
    for (std::int64_t k = 0; k < n; ++k) {
      if (k < n_train)
        train_items[u].push_back(items[k]);
      else if (k < n_train + n_val)
        val_items[u].push_back(items[k]);
      else
        test_items[u].push_back(items[k]);
    }
    for (auto i : train_items[u]) ++item_train_deg[i];
  }

  // pull held-out interactions whose item never made it into train back
  // into train, so the training graph covers every item
  for (std::int32_t u = 0; u < d.num_users; ++u) {
    for (auto* part : {&val_items[u], &test_items[u]}) {
      auto& v = *part;
      for (std::size_t k = 0; k < v.size();) {
        if (item_train_deg[v[k]] == 0) {
          train_items[u].push_back(v[k]);
          ++item_train_deg[v[k]];
          v.erase(v.begin() + static_cast<std::ptrdiff_t>(k));
          ++s.coverage_moves;
        } else {
          ++k;
        }
      }
    }
  }

  for (std::int32_t u = 0; u < d.num_users; ++u) {
    std::sort(train_items[u].begin(), train_items[u].end());
    for (auto i : train_items[u]) s.train.interactions.push_back({u, i, 0.0});
    for (auto i : val_items[u]) s.validation.interactions.push_back({u, i, 0.0});
    for (auto i : test_items[u]) s.test.interactions.push_back({u, i, 0.0});
  }
  return s;
}

InductiveSplit split_inductive(const Dataset& d, double mu, double eta, std::uint64_t seed) {
  if (!(mu > 0.0 && mu < 1.0)) throw ConfigError("mu must lie in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");

  auto by_user = d.items_by_user();
  InductiveSplit s;
  s.mu = mu;
  s.eta = eta;
  s.seed = seed;
  s.fold_in.resize(d.num_users);
  s.fold_out.resize(d.num_users);

  Rng rng(seed);
  std::vector<std::int32_t> users(d.num_users);
  for (std::int32_t u = 0; u < d.num_users; ++u) users[u] = u;
  rng.shuffle(users);

  auto num_users = static_cast<std::int64_t>(users.size());
  auto n_train = static_cast<std::int64_t>(std::floor(mu * static_cast<double>(num_users)));
  if (n_train == 0) throw ConfigError("mu leaves no training users");
  std::int64_t held = num_users - n_train;
  if (held == 0) throw ConfigError("mu leaves no held-out users");
  std::int64_t n_val = held / 2;
  std::vector<std::int32_t> val_candidates, test_candidates;
  for (std::int64_t k = 0; k < num_users; ++k) {
    if (k < n_train)
      s.train_users.push_back(users[k]);
    else if (k < n_train + n_val)
      val_candidates.push_back(users[k]);
    else
      test_candidates.push_back(users[k]);
  }
  std::sort(s.train_users.begin(), s.train_users.end());
  std::sort(val_candidates.begin(), val_candidates.end());
  std::sort(test_candidates.begin(), test_candidates.end());

  s.train = make_part(d);
  std::vector<char> covered(d.num_items, 0);
  std::vector<char> is_train_user(d.num_users, 0);
  for (auto u : s.train_users) is_train_user[u] = 1;
  for (const auto& x : d.interactions)
    if (is_train_user[x.user]) {
      s.train.interactions.push_back(x);
      covered[x.item] = 1;
    }
  std::sort(s.train.interactions.begin(), s.train.interactions.end(),
            [](const Interaction& a, const Interaction& b) {
              return a.user != b.user ? a.user < b.user : a.item < b.item;
            });

  auto assign_folds = [&](const std::vector<std::int32_t>& cands,
                          std::vector<std::int32_t>& keep) {
    for (auto u : cands) {
      auto items = by_user[u];
      auto n = static_cast<std::int64_t>(items.size());
      rng.shuffle(items);
      auto n_in = static_cast<std::int64_t>(std::floor(eta * static_cast<double>(n)));
      std::vector<std::int32_t> fin, fout;
      for (std::int64_t k = 0; k < n; ++k) {
        if (!covered[items[k]]) {
          ++s.dropped_interactions;
          continue;
        }
        if (k < n_in)
          fin.push_back(items[k]);
        else
          fout.push_back(items[k]);
      }
      if (fin.empty() || fout.empty()) {
        ++s.dropped_users;
        continue;
      }
      std::sort(fin.begin(), fin.end());
      std::sort(fout.begin(), fout.end());
      s.fold_in[u] = std::move(fin);
      s.fold_out[u] = std::move(fout);
      keep.push_back(u);
    }
  };
  assign_folds(val_candidates, s.val_users);
  assign_folds(test_candidates, s.test_users);
  return s;
}

namespace {

void write_lines(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << body;
  if (!out) throw IoError("short write on manifest: " + path);
}

void append_part(std::string& body, const Dataset& part, const char* tag) {
  for (const auto& x : part.interactions) {
    body += std::to_string(part.user_orig[x.user]);
    body += '\t';
    body += std::to_string(part.item_orig[x.item]);
    body += '\t';
    body += tag;
    body += '\n';
  }
}

}  // namespace

void write_transductive_manifest(const TransductiveSplit& s, const std::string& path) {
  std::string body;
  append_part(body, s.train, "train");
  append_part(body, s.validation, "val");
  append_part(body, s.test, "test");
  write_lines(path, body);
}

void write_inductive_manifest(const InductiveSplit& s, const std::string& path) {
  std::string body;
  append_part(body, s.train, "train");
  auto emit = [&](const std::vector<std::int32_t>& users, const char* in_tag,
                  const char* out_tag) {
    for (auto u : users) {
      for (auto i : s.fold_in[u]) {
        body += std::to_string(s.train.user_orig[u]);
        body += '\t';
        body += std::to_string(s.train.item_orig[i]);
        body += '\t';
        body += in_tag;
        body += '\n';
      }
      for (auto i : s.fold_out[u]) {
        body += std::to_string(s.train.user_orig[u]);
        body += '\t';
        body += std::to_string(s.train.item_orig[i]);
        body += '\t';
        body += out_tag;
        body += '\n';
      }
    }
  };
  emit(s.val_users, "val_in", "val_out");
  emit(s.test_users, "test_in", "test_out");
  write_lines(path, body);
}

std::string transductive_summary_json(const TransductiveSplit& s) {
  std::ostringstream o;
  o << "{\"protocol\":\"transductive\",\"rho\":" << s.rho << ",\"seed\":" << s.seed
    << ",\"num_users\":" << s.train.num_users << ",\"num_items\":" << s.train.num_items
    << ",\"train_interactions\":" << s.train.interactions.size()
    << ",\"val_interactions\":" << s.validation.interactions.size()
    << ",\"test_interactions\":" << s.test.interactions.size()
    << ",\"coverage_moves\":" << s.coverage_moves << "}";
  return o.str();
}

std::string inductive_summary_json(const InductiveSplit& s) {
  std::size_t vin = 0, vout = 0, tin = 0, tout = 0;
  for (auto u : s.val_users) {
    vin += s.fold_in[u].size();
    vout += s.fold_out[u].size();
  }
  for (auto u : s.test_users) {
    tin += s.fold_in[u].size();
    tout += s.fold_out[u].size();
  }
  std::ostringstream o;
  o << "{\"protocol\":\"inductive\",\"mu\":" << s.mu << ",\"eta\":" << s.eta
    << ",\"seed\":" << s.seed << ",\"train_users\":" << s.train_users.size()
    << ",\"val_users\":" << s.val_users.size() << ",\"test_users\":" << s.test_users.size()
    << ",\"train_interactions\":" << s.train.interactions.size() << ",\"val_fold_in\":" << vin
    << ",\"val_fold_out\":" << vout << ",\"test_fold_in\":" << tin << ",\"test_fold_out\":" << tout
    << ",\"dropped_interactions\":" << s.dropped_interactions
    << ",\"dropped_users\":" << s.dropped_users << "}";
  return o.str();
}

}  // namespace rankcf
