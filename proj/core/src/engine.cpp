#include "revattr/engine.hpp"

#include <stdexcept>
#include <utility>

#include "parallel.hpp"

namespace revattr {

namespace {

RelevanceMatrix build_matrix(std::span<const Event> events, const AttenuationFn& alpha) {
  const std::size_t n = events.size() - 1;  // tail length
  RelevanceMatrix m(n + 1, n);
  std::vector<double> a(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) a[d] = alpha(static_cast<unsigned>(d));

  for (std::size_t col = 0; col < n; ++col) {
    m.at(0, col) = 1.0;  // platform anchor: literal 1, never alpha-derived
    for (std::size_t row = 1; row <= col + 1; ++row) {
      m.at(row, col) = a[col + 1 - row];
    }
  }
  return m;
}

std::map<PlayerId, double> credit_from_matrix(const RelevanceMatrix& m,
                                              std::span<const Money> revenues,
                                              std::span<const PlayerId> owners) {
  if (owners.size() != m.rows() || revenues.size() != m.cols()) {
    throw ValidationError("normalize_and_credit: dimension mismatch");
  }
  if (!owners.empty() && !owners[0].is_platform()) {
    throw ValidationError("normalize_and_credit: owners[0] must be the platform");
  }

  std::vector<double> row_credit(m.rows(), 0.0);
  for (std::size_t col = 0; col < m.cols(); ++col) {
    double column_sum = 0.0;
    for (std::size_t row = 0; row < m.rows(); ++row) column_sum += m.at(row, col);
    if (column_sum <= 0.0) {
      throw std::logic_error("relevance matrix column sum is zero");
    }
    const double revenue = revenues[col].units();
    if (revenue == 0.0) continue;
    for (std::size_t row = 0; row < m.rows(); ++row) {
      const double weight = m.at(row, col);
      if (weight != 0.0) row_credit[row] += weight / column_sum * revenue;
    }
  }

  std::map<PlayerId, double> credit;
  for (std::size_t row = 0; row < m.rows(); ++row) {
    if (row_credit[row] != 0.0) credit[owners[row]] += row_credit[row];
  }
  return credit;
}

// O(n_s) path for alpha(d) = theta^d. With D_k = 1 + sum_{d<k} theta^d the
// column-k denominators satisfy a running recurrence, the platform collects
// g_k = r_k / D_k from every column, and event e_l's total credit
// T(l) = sum_{k>=l} theta^(k-l) g_k folds backwards as T(l) = g_l + theta T(l+1).
std::map<PlayerId, double> credit_incremental_exp(std::span<const Event> events,
                                                  double theta) {
  const std::size_t n = events.size() - 1;
  std::map<PlayerId, double> credit;
  if (n == 0) return credit;

  std::vector<double> g(n + 1, 0.0);
  double geometric = 0.0;  // sum_{d < k} theta^d, starts empty for k = 1
  double platform_credit = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    geometric = 1.0 + theta * geometric;
    const double denom = 1.0 + geometric;
    g[k] = events[k].revenue.units() / denom;
    platform_credit += g[k];
  }

  double tail = 0.0;
  for (std::size_t l = n; l >= 1; --l) {
    tail = g[l] + theta * tail;
    if (tail != 0.0) credit[events[l].owner] += tail;
  }
  if (platform_credit != 0.0) credit[PlayerId::platform()] += platform_credit;
  return credit;
}

std::map<PlayerId, double> engine_credit(std::span<const Event> events,
                                         const AttenuationFn& alpha, EnginePath path) {
  std::map<PlayerId, double> credit;
  if (path == EnginePath::Incremental) {
    credit = credit_incremental_exp(events, *alpha.exponent());
  } else {
    const std::size_t n = events.size() - 1;
    std::vector<Money> revenues(n);
    std::vector<PlayerId> owners(n + 1);
    owners[0] = events[0].owner;
    for (std::size_t k = 1; k <= n; ++k) {
      revenues[k - 1] = events[k].revenue;
      owners[k] = events[k].owner;
    }
    credit = credit_from_matrix(build_matrix(events, alpha), revenues, owners);
  }

  const double r0 = events[0].revenue.units();
  if (r0 != 0.0 || credit.empty()) credit[PlayerId::platform()] += r0;
  return credit;
}

}  // namespace

RelevanceMatrix build_relevance_matrix(const Session& s, const AttenuationFn& alpha) {
  return build_matrix(s.events(), alpha);
}

std::map<PlayerId, double> normalize_and_credit(const RelevanceMatrix& m,
                                                std::span<const Money> revenues,
                                                std::span<const PlayerId> owners) {
  return credit_from_matrix(m, revenues, owners);
}

SessionEngine::SessionEngine(AttenuationFn alpha, EnginePath path)
    : alpha_(std::move(alpha)), path_(path) {
  if (path_ == EnginePath::Incremental && !alpha_.exponent()) {
    throw ValidationError(
        "incremental engine path requires an exponential attenuation function");
  }
}

void SessionEngine::push_event(const Event& e) {
  if (events_.empty()) {
    if (!e.owner.is_platform()) {
      throw ValidationError("first event of a session must be platform-owned");
    }
  } else if (e.owner.is_platform()) {
    throw ValidationError("platform may own only the entry event");
  }
  if (e.revenue.micros < 0) {
    throw ValidationError("event revenue must be nonnegative");
  }
  events_.push_back(e);
}

std::map<PlayerId, double> SessionEngine::finalize() {
  if (events_.empty()) {
    throw ValidationError("finalize called on an empty session");
  }
  auto credit = engine_credit(events_, alpha_, path_);
  events_.clear();
  return credit;
}

std::map<PlayerId, double> engine_attribute_session(const Session& s,
                                                    const AttenuationFn& alpha,
                                                    EnginePath path) {
  if (path == EnginePath::Incremental && !alpha.exponent()) {
    throw ValidationError(
        "incremental engine path requires an exponential attenuation function");
  }
  return engine_credit(s.events(), alpha, path);
}

Allocation engine_attribute_window(const SessionLog& log, const TimeWindow& w,
                                   const AttenuationFn& alpha, EnginePath path,
                                   unsigned threads) {
  if (path == EnginePath::Incremental && !alpha.exponent()) {
    throw ValidationError(
        "incremental engine path requires an exponential attenuation function");
  }
  const std::vector<const Session*> selected = window_filter(log, w);

  constexpr std::size_t kChunk = 256;
  const std::size_t nchunks = (selected.size() + kChunk - 1) / kChunk;
  std::vector<std::map<PlayerId, double>> partial(nchunks);
  detail::parallel_chunks(selected.size(), kChunk, threads,
                          [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                            auto& sink = partial[chunk];
                            for (std::size_t i = begin; i < end; ++i) {
                              for (const auto& [player, amount] : engine_credit(
                                       selected[i]->events(), alpha, path)) {
                                sink[player] += amount;
                              }
                            }
                          });

  std::map<PlayerId, double> amounts;
  for (const PlayerId& p : player_set(log)) amounts[p] = 0.0;
  for (const auto& chunk : partial) {
    for (const auto& [player, amount] : chunk) amounts[player] += amount;
  }
  return Allocation(w, std::move(amounts));
}

}  // namespace revattr
