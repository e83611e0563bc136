#include "rankcf/ppr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "rankcf/error.hpp"
#include "rankcf/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "cache files assume a little-endian host");

namespace rankcf {

PprResult compute_ppr(const BipartiteGraph& g, std::int32_t user, const PPRConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("ppr alpha must lie in (0, 1)");
  if (!(cfg.tol > 0.0)) throw ConfigError("ppr tolerance must be positive");
  if (cfg.max_iter <= 0) throw ConfigError("ppr max_iter must be positive");
  if (user < 0 || user >= g.num_users) throw ShapeError("ppr: user id out of range");
  if (g.user_degree(user) == 0)
    throw StateError("ppr: user " + std::to_string(user) + " has no edges");

  const auto U = static_cast<std::size_t>(g.num_users);
  const auto I = static_cast<std::size_t>(g.num_items);
  std::vector<double> p(U + I, 0.0), next(U + I, 0.0);
  p[static_cast<std::size_t>(user)] = 1.0;

  PprResult res;
  const double a = cfg.alpha;
  for (int it = 0; it < cfg.max_iter; ++it) {
    // walk step: a node's incoming mass is the degree-normalized mass of
    // its neighbours on the other side
    for (std::int32_t u = 0; u < g.num_users; ++u) {
      double s = 0.0;
      for (std::int64_t e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
        const std::int32_t i = g.user_nbr[e];
        s += p[U + static_cast<std::size_t>(i)] / static_cast<double>(g.item_degree(i));
      }
      next[static_cast<std::size_t>(u)] = (1.0 - a) * s;
    }
    for (std::int32_t i = 0; i < g.num_items; ++i) {
      double s = 0.0;
      for (std::int64_t e = g.item_ptr[i]; e < g.item_ptr[i + 1]; ++e) {
        const std::int32_t u = g.item_nbr[e];
        s += p[static_cast<std::size_t>(u)] / static_cast<double>(g.user_degree(u));
      }
      next[U + static_cast<std::size_t>(i)] = (1.0 - a) * s;
    }
    next[static_cast<std::size_t>(user)] += a;

    double resid = 0.0, total = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k) {
      resid = std::max(resid, std::abs(next[k] - p[k]));
      total += next[k];
    }
    p.swap(next);
    res.mass_per_iteration.push_back(total);
    res.iterations = it + 1;
    res.residual = resid;
    if (resid <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.vec.user = user;
  res.vec.num_users = g.num_users;
  res.vec.num_items = g.num_items;
  res.vec.mass = std::move(p);
  return res;
}

TruncatedPpr truncate_ppr(const PPRVector& p, int top_t) {
  if (top_t <= 0) throw ConfigError("ppr truncation size must be positive");
  std::vector<std::int32_t> order;
  order.reserve(static_cast<std::size_t>(p.num_items));
  for (std::int32_t i = 0; i < p.num_items; ++i)
    if (p.item_mass(i) > 0.0) order.push_back(i);
  auto cmp = [&](std::int32_t a, std::int32_t b) {
    const double ma = p.item_mass(a), mb = p.item_mass(b);
    return ma != mb ? ma > mb : a < b;
  };
  const auto keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_t));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    cmp);
  order.resize(keep);
  std::sort(order.begin(), order.end());

  TruncatedPpr t;
  t.user = p.user;
  t.items = std::move(order);
  t.masses.reserve(t.items.size());
  for (auto i : t.items) t.masses.push_back(static_cast<float>(p.item_mass(i)));
  return t;
}

NegativeSampler::NegativeSampler(std::int32_t user, std::int32_t num_items,
                                 const std::vector<std::int32_t>& mass_items,
                                 const std::vector<double>& masses,
                                 const std::vector<std::int32_t>& positives, double scale)
    : user_(user), num_items_(num_items) {
  if (num_items <= 0) throw ConfigError("sampler needs a non-empty item universe");
  if (mass_items.size() != masses.size())
    throw ShapeError("sampler: mass list lengths disagree");

  std::vector<double> exponent(static_cast<std::size_t>(num_items), 0.0);
  for (std::size_t k = 0; k < mass_items.size(); ++k) {
    const auto i = mass_items[k];
    if (i < 0 || i >= num_items) throw ShapeError("sampler: item id out of range");
    exponent[static_cast<std::size_t>(i)] = scale * masses[k];
  }
  std::vector<char> is_pos(static_cast<std::size_t>(num_items), 0);
  for (auto i : positives) {
    if (i < 0 || i >= num_items) throw ShapeError("sampler: positive id out of range");
    is_pos[static_cast<std::size_t>(i)] = 1;
  }

  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::int32_t i = 0; i < num_items; ++i)
    if (!is_pos[static_cast<std::size_t>(i)]) {
      mx = std::max(mx, exponent[static_cast<std::size_t>(i)]);
      any = true;
    }
  if (!any) throw ConfigError("sampler: no candidate items besides the positives");

  cdf_.resize(static_cast<std::size_t>(num_items));
  double run = 0.0;
  for (std::int32_t i = 0; i < num_items; ++i) {
    if (!is_pos[static_cast<std::size_t>(i)])
      run += std::exp(exponent[static_cast<std::size_t>(i)] - mx);
    cdf_[static_cast<std::size_t>(i)] = run;
  }
}

double NegativeSampler::prob(std::int32_t item) const {
  if (item < 0 || item >= num_items_) throw ShapeError("sampler: item id out of range");
  const auto k = static_cast<std::size_t>(item);
  const double prev = k == 0 ? 0.0 : cdf_[k - 1];
  return (cdf_[k] - prev) / cdf_.back();
}

std::int32_t NegativeSampler::draw(Rng& rng) const {
  const double r = rng.next_double() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
  if (it == cdf_.end()) --it;  // r == total after rounding
  return static_cast<std::int32_t>(it - cdf_.begin());
}

NegativeSampler build_sampler(const PPRVector& p, const std::vector<std::int32_t>& positives,
                              double scale) {
  std::vector<std::int32_t> items;
  std::vector<double> masses;
  items.reserve(static_cast<std::size_t>(p.num_items));
  for (std::int32_t i = 0; i < p.num_items; ++i)
    if (p.item_mass(i) > 0.0) {
      items.push_back(i);
      masses.push_back(p.item_mass(i));
    }
  return NegativeSampler(p.user, p.num_items, items, masses, positives, scale);
}

NegativeSampler build_sampler(const TruncatedPpr& t, std::int32_t num_items,
                              const std::vector<std::int32_t>& positives, double scale) {
  std::vector<double> masses(t.masses.begin(), t.masses.end());
  return NegativeSampler(t.user, num_items, t.items, masses, positives, scale);
}

std::vector<std::int32_t> sample_negatives(const NegativeSampler& s, int n, Rng& rng) {
  if (n < 0) throw ConfigError("cannot sample a negative number of items");
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(s.draw(rng));
  return out;
}

const TruncatedPpr* PprCache::find(std::int32_t user) const {
  auto it = std::lower_bound(users.begin(), users.end(), user,
                             [](const TruncatedPpr& t, std::int32_t u) { return t.user < u; });
  if (it == users.end() || it->user != user) return nullptr;
  return &*it;
}

void PprCache::check_graph(const BipartiteGraph& g) const {
  if (num_users != g.num_users || num_items != g.num_items || graph_hash != g.structure_hash())
    throw ConfigError("ppr cache was built from a different graph");
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void read_raw(std::ifstream& in, T* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw IoError("truncated ppr cache record");
}

}  // namespace

PprCache precompute_and_store(const BipartiteGraph& g, const std::vector<std::int32_t>& users,
                              const PPRConfig& cfg, int top_t, double scale,
                              const std::string& path, int threads) {
  PprCache cache;
  cache.cfg = cfg;
  cache.top_t = top_t;
  cache.scale = scale;
  cache.graph_hash = g.structure_hash();
  cache.num_users = g.num_users;
  cache.num_items = g.num_items;
  cache.users.resize(users.size());

  std::vector<std::int32_t> sorted_users = users;
  std::sort(sorted_users.begin(), sorted_users.end());
  parallel_for(static_cast<std::int64_t>(sorted_users.size()), threads, [&](std::int64_t k) {
    auto res = compute_ppr(g, sorted_users[static_cast<std::size_t>(k)], cfg);
    if (!res.converged)
      throw NumericError("ppr did not converge for user " +
                         std::to_string(sorted_users[static_cast<std::size_t>(k)]));
    cache.users[static_cast<std::size_t>(k)] = truncate_ppr(res.vec, top_t);
  });

  nlohmann::json header = {
      {"alpha", cfg.alpha},       {"tol", cfg.tol},
      {"max_iter", cfg.max_iter}, {"top_t", top_t},
      {"scale", scale},           {"graph_hash", cache.graph_hash},
      {"num_users", g.num_users}, {"num_items", g.num_items},
      {"users", sorted_users.size()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write ppr cache: " + path);
  out << header.dump() << '\n';
  for (const auto& t : cache.users) {
    const auto user = static_cast<std::uint32_t>(t.user);
    const auto count = static_cast<std::uint32_t>(t.items.size());
    write_raw(out, &user, 1);
    write_raw(out, &count, 1);
    write_raw(out, t.items.data(), t.items.size());
    write_raw(out, t.masses.data(), t.masses.size());
  }
  if (!out) throw IoError("short write on ppr cache: " + path);
  return cache;
}

PprCache load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open ppr cache: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw IoError("ppr cache missing header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad ppr cache header: " + std::string(e.what()));
  }

  PprCache cache;
  try {
    cache.cfg.alpha = header.at("alpha").get<double>();
    cache.cfg.tol = header.at("tol").get<double>();
    cache.cfg.max_iter = header.at("max_iter").get<int>();
    cache.top_t = header.at("top_t").get<int>();
    cache.scale = header.at("scale").get<double>();
    cache.graph_hash = header.at("graph_hash").get<std::uint64_t>();
    cache.num_users = header.at("num_users").get<std::int32_t>();
    cache.num_items = header.at("num_items").get<std::int32_t>();
    cache.users.resize(header.at("users").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("ppr cache header missing field: " + std::string(e.what()));
  }

  for (auto& t : cache.users) {
    std::uint32_t user = 0, count = 0;
    read_raw(in, &user, 1);
    read_raw(in, &count, 1);
    t.user = static_cast<std::int32_t>(user);
    t.items.resize(count);
    t.masses.resize(count);
    read_raw(in, t.items.data(), t.items.size());
    read_raw(in, t.masses.data(), t.masses.size());
  }
  return cache;
}

}  // namespace rankcf
