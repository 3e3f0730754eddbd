#ifndef TCPINDEX_INDEX_ENGINE_HPP
#define TCPINDEX_INDEX_ENGINE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tcpindex/flow_model.hpp"

namespace tcpindex {

// Admission set over states {1..N}, bitmask storage. States in the set take
// action 1 (admit), the rest action 0.
class PolicySet {
  public:
    PolicySet() = default;
    explicit PolicySet(int capacity) : capacity_(capacity), words_((capacity + 63) / 64, 0) {}
    static PolicySet full(int capacity);
    static PolicySet from_mask(int capacity, std::uint64_t mask);  // bit n-1 <-> state n

    void insert(int state) { words_[word(state)] |= bit(state); }
    void erase(int state) { words_[word(state)] &= ~bit(state); }
    bool contains(int state) const { return words_[word(state)] & bit(state); }
    int capacity() const { return capacity_; }
    int size() const;
    bool subset_of(const PolicySet& other) const;
    std::vector<int> states() const;

    bool operator==(const PolicySet&) const = default;

  private:
    static std::size_t word(int state) { return static_cast<std::size_t>(state - 1) / 64; }
    static std::uint64_t bit(int state) { return std::uint64_t{1} << ((state - 1) % 64); }
    int capacity_ = 0;
    std::vector<std::uint64_t> words_;
};

struct PolicyEvaluation {
    double total_work = 0.0;    // expected total discounted work from the start state
    double total_reward = 0.0;  // expected total discounted reward
};

// Exact discounted evaluation of the stationary policy "admit on S" from
// `start`: solves the deterministic chain in closed form (no truncation).
PolicyEvaluation evaluate_policy(const FlowMdp& mdp, const PolicySet& admit_set, int start);

// Per-state transmission (Whittle) index values and the diagnostics the
// computation produces alongside them. Values are finite for this model
// whenever indexable; +-infinity stay representable as sentinels.
struct IndexTable {
    std::vector<double> values;         // values[n-1] = index of state n
    bool indexable = false;             // numeric indexability check passed
    bool monotone_nonincreasing = false;  // v_1 >= v_2 >= ... >= v_N
    std::vector<int> assignment_order;  // states in the order the greedy run fixed them
};

// One-run adaptive-greedy marginal-productivity computation. Never throws on
// indexability trouble; it reports indexable = false instead.
IndexTable compute_indices_adaptive_greedy(const FlowMdp& mdp);

// Printed closed forms for N <= 3; nullopt for larger N. For the N = 3,
// gamma >= 2/3 regime two candidate triples exist depending on beta; the
// applicable one is detected numerically against the adaptive-greedy result.
std::optional<IndexTable> closed_form_indices(const FlowMdp& mdp);

// Memoized index table per (N, gamma, alpha, beta). Safe for concurrent
// callers; the returned reference stays valid for the program lifetime.
const IndexTable& cached_index_table(const FlowParams& params);

// Convenience copy of cached_index_table(params).values.
std::vector<double> index_lookup_table(const FlowParams& params);

// CSV rows "state,index_value".
void write_index_csv(std::ostream& out, const IndexTable& table);

}  // namespace tcpindex

#endif
