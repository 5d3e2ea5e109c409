#pragma once

// Streaming relevance-matrix engine for alpha-family rules.
//
// Per session, a dense (n_s + 1) x n_s matrix collects how much each event
// still matters when later revenue arrives: row 0 is the platform anchor
// (constant 1), and row j >= 1 holds alpha(k - j) in the column of event
// e_k for j <= k. Column-normalizing, multiplying by the revenue vector and
// folding rows into their owners yields the alpha-rule attribution in
// O(n_s^2) per session. For exponential alpha an O(n_s) incremental path
// computes the same credits via running weighted sums.

#include <map>
#include <span>
#include <vector>

#include "revattr/domain.hpp"
#include "revattr/rules.hpp"

namespace revattr {

/// Dense column-major matrix with (n_s + 1) rows and n_s columns; entries
/// lie in [0, 1]: the anchor row of 1s, the attenuation band, 0 below it.
class RelevanceMatrix {
 public:
  RelevanceMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), cells_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double at(std::size_t row, std::size_t col) const {
    return cells_[col * rows_ + row];
  }
  double& at(std::size_t row, std::size_t col) {
    return cells_[col * rows_ + row];
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> cells_;
};

/// Builds the per-session relevance matrix: column k (0-based, for event
/// e_{k+1}) holds [1, alpha(k), alpha(k-1), ..., alpha(0), 0, ..., 0].
RelevanceMatrix build_relevance_matrix(const Session& s, const AttenuationFn& alpha);

/// Column-normalizes `m`, multiplies by the revenue vector, and folds rows
/// into players by owner. `revenues` are r(e_1)..r(e_{n_s}); `owners` are
/// the n_s + 1 event owners with owners[0] = platform. r(e_0) is NOT part of
/// this product — callers credit it to the platform separately.
/// Throws std::logic_error on a zero column sum (impossible given the
/// anchor; guarded anyway).
std::map<PlayerId, double> normalize_and_credit(const RelevanceMatrix& m,
                                                std::span<const Money> revenues,
                                                std::span<const PlayerId> owners);

enum class EnginePath {
  Matrix,       ///< materialize + normalize the matrix, O(n_s^2)
  Incremental,  ///< exponential-alpha running sums, O(n_s)
};

/// Streaming per-session accumulator: feed events one at a time, collect the
/// attribution at session end. Instances are independent; run one per
/// session and merge results element-wise.
class SessionEngine {
 public:
  /// EnginePath::Incremental requires an exponential attenuation
  /// (alpha.exponent() present); throws ValidationError otherwise.
  explicit SessionEngine(AttenuationFn alpha, EnginePath path = EnginePath::Matrix);

  /// First event of a session must be platform-owned, later ones must not
  /// be; revenues must be nonnegative. Throws ValidationError otherwise.
  void push_event(const Event& e);

  /// Number of events consumed since the last finalize().
  std::size_t event_count() const noexcept { return events_.size(); }
  EnginePath path() const noexcept { return path_; }

  /// Computes the session attribution (r(e_0) credited to the platform) and
  /// resets the engine for the next session. Throws ValidationError if no
  /// event was pushed.
  std::map<PlayerId, double> finalize();

 private:
  AttenuationFn alpha_;
  EnginePath path_;
  std::vector<Event> events_;
};

/// One-shot engine run over a whole session.
std::map<PlayerId, double> engine_attribute_session(const Session& s,
                                                    const AttenuationFn& alpha,
                                                    EnginePath path = EnginePath::Matrix);

/// Engine-based equivalent of rules::attribute_window for alpha rules:
/// element-wise sum of per-session engine results over the window, covering
/// all of player_set(log). Deterministic for any thread count.
Allocation engine_attribute_window(const SessionLog& log, const TimeWindow& w,
                                   const AttenuationFn& alpha,
                                   EnginePath path = EnginePath::Matrix,
                                   unsigned threads = 1);

}  // namespace revattr
