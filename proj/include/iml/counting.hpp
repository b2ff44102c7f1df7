#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "iml/common.hpp"

namespace iml {

using BigInt = boost::multiprecision::cpp_int;

/// Z_{>=0}-valued measure on tuples over a finite alphabet {0..|X|-1}.
/// Points are stored canonically (sorted map keys) so measures compare
/// deterministically.
struct IntegerMeasure {
    std::map<std::vector<int>, long long> mass;

    long long total() const;
    long long at(const std::vector<int>& point) const;
    void add(const std::vector<int>& point, long long count = 1);
    bool dominates(const IntegerMeasure& other) const; // other <= this pointwise
    bool operator==(const IntegerMeasure& other) const { return mass == other.mass; }
    bool operator<(const IntegerMeasure& other) const { return mass < other.mass; }

    /// Marginal onto coordinate i of the tuple points.
    IntegerMeasure marginal(int i) const;
};

/// Combinatorial data of the bijection-counting identity: index sets
/// S* = S1* u S2*, target sets F'_i of size |S*|, labels a_j^{(i)} in X,
/// and integer measures A (mass |S*|) and r <= A (mass |S1*|) on X^p.
struct CountingInstance {
    int alphabet_size = 0;
    int p = 0;
    std::vector<int> s1_star;
    std::vector<int> s2_star;
    std::vector<std::vector<int>> f_prime;     // p sets, each of size |S*|
    std::map<int, std::vector<int>> labels;    // j -> (a_j^{(1)}, ..., a_j^{(p)})
    IntegerMeasure a_measure;                  // A on X^p
    IntegerMeasure r_measure;                  // r on X^p

    std::vector<int> s_star() const; // S1* u S2*, sorted
    void validate() const;           // throws MassMismatch, RLargerThanA, BadInput
};

/// Closed-form count #S1*! #S2*! (prod_i prod_x A_i(x)!) / (prod_x A(x)!)
/// * prod_x binom(A(x), r(x)), valid when the brute-force set is nonempty.
BigInt count_psi_closed_form(const CountingInstance& instance);

/// Closed form times prod_i (|W_i| - |S*|)! for bijections W_i -> F_i with
/// S* contained in W_i.
BigInt count_psi_tilde_closed_form(const CountingInstance& instance,
                                   const std::vector<std::vector<int>>& w_sets);

struct EnumerationResult {
    BigInt count = 0;
    /// Up to 10 witnesses; each witness is p maps j -> sigma_i(j) flattened
    /// as (domain order matches the sorted domain).
    std::vector<std::vector<std::vector<int>>> witnesses;
};

/// Exhaustive sweep over tuples of bijections S* -> F'_i; guarded by
/// (|S*|!)^p <= 10^6.
EnumerationResult enumerate_psi_bruteforce(const CountingInstance& instance);

/// Exhaustive sweep over tuples of bijections W_i -> F_i (|F_i| = |W_i|),
/// constraints evaluated over S* only.
EnumerationResult enumerate_psi_tilde_bruteforce(const CountingInstance& instance,
                                                 const std::vector<std::vector<int>>& w_sets,
                                                 const std::vector<std::vector<int>>& f_sets);

/// Both sides of sum_{rho <= pi} prod_x f(pi(x), rho(x)) =
/// prod_x sum_{s <= pi(x)} f(pi(x), s); exact integers.
std::pair<BigInt, BigInt> sum_over_submeasures_identity(
    const IntegerMeasure& pi, const std::function<long long(long long, long long)>& f);

/// All rho <= pi with rho(X) = m, pi = sum_i delta_{b_i}; canonical sorted set.
std::vector<IntegerMeasure> enumerate_fixed_mass_submeasures(const std::vector<int>& b_list,
                                                             int m);
/// The permutation route {pi_m^sigma : sigma in S_n} for the same data.
std::vector<IntegerMeasure> permuted_prefix_measures(const std::vector<int>& b_list, int m);

/// All couplings on X x Y with marginals sum delta_{a_i} and sum delta_{b_i}.
std::vector<IntegerMeasure> enumerate_couplings(
    const std::vector<std::pair<int, int>>& pairs);
/// The permutation route {pi^sigma : sigma in S_n}.
std::vector<IntegerMeasure> permuted_pair_measures(
    const std::vector<std::pair<int, int>>& pairs);

/// Exhaustive count of chains (x_1..x_n) with A = sum_j delta_{(x_j, x_{j+1})}
/// given x_{n+1}, against the bound n * (prod Abar(l)!) / (prod A(l)!) where
/// Abar is the first-coordinate marginal. The unspecified prefactor is read
/// as n = A(X^2).
std::pair<BigInt, BigInt> chain_sequence_count_bound(const IntegerMeasure& a_measure,
                                                     int alphabet_size, int x_end);

BigInt factorial(long long n);
BigInt binomial(long long n, long long k);

} // namespace iml
