#include "iml/counting.hpp"

#include <algorithm>
#include <set>

namespace iml {

namespace {

constexpr double kBruteForceGuard = 1e6;

double log_factorial_estimate(int n) {
    double s = 0.0;
    for (int i = 2; i <= n; ++i) s += std::log(static_cast<double>(i));
    return s;
}

// All permutations of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> all_permutations(int n) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::vector<std::vector<int>> out;
    do {
        out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

std::vector<IntegerMeasure> canonical_set(std::set<IntegerMeasure>&& s) {
    return {std::make_move_iterator(s.begin()), std::make_move_iterator(s.end())};
}

} // namespace

long long IntegerMeasure::total() const {
    long long t = 0;
    for (const auto& [point, count] : mass) t += count;
    return t;
}

long long IntegerMeasure::at(const std::vector<int>& point) const {
    const auto it = mass.find(point);
    return it == mass.end() ? 0 : it->second;
}

void IntegerMeasure::add(const std::vector<int>& point, long long count) {
    if (count < 0) fail("BadInput", "integer measures take nonnegative masses");
    if (count == 0) return;
    mass[point] += count;
}

bool IntegerMeasure::dominates(const IntegerMeasure& other) const {
    for (const auto& [point, count] : other.mass)
        if (count > at(point)) return false;
    return true;
}

IntegerMeasure IntegerMeasure::marginal(int i) const {
    IntegerMeasure out;
    for (const auto& [point, count] : mass) {
        if (i < 0 || i >= static_cast<int>(point.size()))
            fail("BadInput", "marginal coordinate out of range");
        out.add({point[i]}, count);
    }
    return out;
}

std::vector<int> CountingInstance::s_star() const {
    std::vector<int> s = s1_star;
    s.insert(s.end(), s2_star.begin(), s2_star.end());
    std::sort(s.begin(), s.end());
    return s;
}

void CountingInstance::validate() const {
    if (alphabet_size < 1) fail("BadInput", "alphabet must be nonempty");
    if (p < 1) fail("BadInput", "p must be >= 1");
    const auto s = s_star();
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
        fail("BadInput", "S1* and S2* must be disjoint");
    if (static_cast<int>(f_prime.size()) != p)
        fail("BadInput", "need one target set F'_i per coordinate");
    for (const auto& f : f_prime) {
        if (f.size() != s.size()) fail("BadInput", "|F'_i| must equal |S*|");
        auto sorted = f;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            fail("BadInput", "F'_i has repeated indices");
    }
    for (const auto& [j, a] : labels) {
        if (static_cast<int>(a.size()) != p)
            fail("BadInput", "label a_j must have one entry per coordinate");
        for (int v : a)
            if (v < 0 || v >= alphabet_size) fail("BadInput", "label outside the alphabet");
        (void)j;
    }
    for (const auto& [point, count] : a_measure.mass) {
        if (static_cast<int>(point.size()) != p) fail("BadInput", "A lives on X^p");
        (void)count;
    }
    if (a_measure.total() != static_cast<long long>(s.size()))
        fail("MassMismatch", "A(X^p) must equal |S*|");
    if (r_measure.total() != static_cast<long long>(s1_star.size()))
        fail("MassMismatch", "r(X^p) must equal |S1*|");
    if (!a_measure.dominates(r_measure))
        fail("RLargerThanA", "r exceeds A at some point");
}

BigInt factorial(long long n) {
    if (n < 0) fail("BadInput", "factorial of a negative number");
    BigInt out = 1;
    for (long long i = 2; i <= n; ++i) out *= i;
    return out;
}

BigInt binomial(long long n, long long k) {
    if (k < 0 || k > n) return 0;
    BigInt out = 1;
    for (long long i = 0; i < k; ++i) {
        out *= (n - i);
        out /= (i + 1);
    }
    return out;
}

BigInt count_psi_closed_form(const CountingInstance& instance) {
    instance.validate();

    BigInt numerator = factorial(static_cast<long long>(instance.s1_star.size())) *
                       factorial(static_cast<long long>(instance.s2_star.size()));
    for (int i = 0; i < instance.p; ++i)
        for (const auto& [point, count] : instance.a_measure.marginal(i).mass) {
            numerator *= factorial(count);
            (void)point;
        }

    BigInt denominator = 1;
    for (const auto& [point, count] : instance.a_measure.mass) {
        denominator *= factorial(count);
        numerator *= binomial(count, instance.r_measure.at(point));
        (void)point;
    }

    if (numerator % denominator != 0)
        fail("InternalError", "closed form did not reduce to an integer");
    return numerator / denominator;
}

BigInt count_psi_tilde_closed_form(const CountingInstance& instance,
                                   const std::vector<std::vector<int>>& w_sets) {
    instance.validate();
    if (static_cast<int>(w_sets.size()) != instance.p)
        fail("BadInput", "need one W_i per coordinate");
    const auto s = instance.s_star();
    BigInt extra = 1;
    for (const auto& w : w_sets) {
        std::set<int> w_set(w.begin(), w.end());
        if (w_set.size() != w.size()) fail("BadInput", "W_i has repeated indices");
        for (int j : s)
            if (!w_set.count(j)) fail("BadContainment", "S* must be contained in W_i");
        extra *= factorial(static_cast<long long>(w.size() - s.size()));
    }
    return count_psi_closed_form(instance) * extra;
}

namespace {

// Shared enumeration core over tuples of bijections domains[i] -> targets[i];
// the measure constraints are evaluated at the S* (and S1*) positions only.
EnumerationResult enumerate_bijection_tuples(const CountingInstance& instance,
                                             const std::vector<std::vector<int>>& domains,
                                             const std::vector<std::vector<int>>& targets) {
    const auto s = instance.s_star();
    const std::set<int> s1(instance.s1_star.begin(), instance.s1_star.end());

    std::vector<std::vector<int>> pos_of_s(instance.p, std::vector<int>(s.size()));
    for (int i = 0; i < instance.p; ++i) {
        if (domains[i].size() != targets[i].size())
            fail("BadInput", "bijection endpoints must have equal size");
        if (instance.p * log_factorial_estimate(static_cast<int>(domains[i].size())) >
            std::log(kBruteForceGuard))
            fail("TooLarge", "bijection tuple count exceeds the brute-force guard");
        for (std::size_t a = 0; a < s.size(); ++a) {
            const auto it = std::find(domains[i].begin(), domains[i].end(), s[a]);
            if (it == domains[i].end()) fail("BadContainment", "S* not inside the domain");
            pos_of_s[i][a] = static_cast<int>(it - domains[i].begin());
        }
    }

    std::vector<std::vector<std::vector<int>>> perms(instance.p);
    std::int64_t total_choices = 1;
    for (int i = 0; i < instance.p; ++i) {
        perms[i] = all_permutations(static_cast<int>(domains[i].size()));
        total_choices *= static_cast<std::int64_t>(perms[i].size());
        if (total_choices > static_cast<std::int64_t>(kBruteForceGuard))
            fail("TooLarge", "bijection tuple count exceeds the brute-force guard");
    }

    const auto label_at = [&](int i, int target_index) {
        const auto it = instance.labels.find(target_index);
        if (it == instance.labels.end())
            fail("BadInput", "missing label for index " + std::to_string(target_index));
        return it->second[i];
    };

    EnumerationResult result;
    std::vector<int> choice(instance.p, 0);
    for (std::int64_t tuple = 0; tuple < total_choices; ++tuple) {
        std::int64_t rest = tuple;
        for (int i = 0; i < instance.p; ++i) {
            choice[i] = static_cast<int>(rest % perms[i].size());
            rest /= static_cast<std::int64_t>(perms[i].size());
        }

        IntegerMeasure got_a, got_r;
        for (std::size_t a = 0; a < s.size(); ++a) {
            std::vector<int> point(instance.p);
            for (int i = 0; i < instance.p; ++i) {
                const auto& perm = perms[i][choice[i]];
                point[i] = label_at(i, targets[i][perm[pos_of_s[i][a]]]);
            }
            got_a.add(point);
            if (s1.count(s[a])) got_r.add(point);
        }
        if (got_a == instance.a_measure && got_r == instance.r_measure) {
            result.count += 1;
            if (result.witnesses.size() < 10) {
                std::vector<std::vector<int>> witness(instance.p);
                for (int i = 0; i < instance.p; ++i) {
                    const auto& perm = perms[i][choice[i]];
                    witness[i].resize(domains[i].size());
                    for (std::size_t pos = 0; pos < domains[i].size(); ++pos)
                        witness[i][pos] = targets[i][perm[pos]];
                }
                result.witnesses.push_back(std::move(witness));
            }
        }
    }
    return result;
}

} // namespace

EnumerationResult enumerate_psi_bruteforce(const CountingInstance& instance) {
    instance.validate();
    const auto s = instance.s_star();
    std::vector<std::vector<int>> domains(instance.p, s);
    std::vector<std::vector<int>> targets = instance.f_prime;
    for (auto& t : targets) std::sort(t.begin(), t.end());
    return enumerate_bijection_tuples(instance, domains, targets);
}

EnumerationResult enumerate_psi_tilde_bruteforce(const CountingInstance& instance,
                                                 const std::vector<std::vector<int>>& w_sets,
                                                 const std::vector<std::vector<int>>& f_sets) {
    instance.validate();
    if (static_cast<int>(w_sets.size()) != instance.p ||
        static_cast<int>(f_sets.size()) != instance.p)
        fail("BadInput", "need one (W_i, F_i) pair per coordinate");
    std::vector<std::vector<int>> domains = w_sets;
    std::vector<std::vector<int>> targets = f_sets;
    for (int i = 0; i < instance.p; ++i) {
        std::sort(domains[i].begin(), domains[i].end());
        std::sort(targets[i].begin(), targets[i].end());
        if (domains[i].size() != targets[i].size())
            fail("BadInput", "|W_i| must equal |F_i|");
    }
    return enumerate_bijection_tuples(instance, domains, targets);
}

std::pair<BigInt, BigInt> sum_over_submeasures_identity(
    const IntegerMeasure& pi, const std::function<long long(long long, long long)>& f) {
    std::vector<std::pair<std::vector<int>, long long>> support(pi.mass.begin(), pi.mass.end());

    BigInt lhs = 0;
    std::vector<long long> rho(support.size(), 0);
    while (true) {
        BigInt term = 1;
        for (std::size_t i = 0; i < support.size(); ++i)
            term *= BigInt(f(support[i].second, rho[i]));
        lhs += term;

        std::size_t i = 0;
        while (i < support.size()) {
            if (rho[i] < support[i].second) {
                ++rho[i];
                break;
            }
            rho[i] = 0;
            ++i;
        }
        if (i == support.size()) break;
    }

    BigInt rhs = 1;
    for (const auto& [point, n] : support) {
        BigInt inner = 0;
        for (long long s = 0; s <= n; ++s) inner += BigInt(f(n, s));
        rhs *= inner;
        (void)point;
    }
    return {lhs, rhs};
}

std::vector<IntegerMeasure> enumerate_fixed_mass_submeasures(const std::vector<int>& b_list,
                                                             int m) {
    const int n = static_cast<int>(b_list.size());
    if (n > 8) fail("TooLarge", "list length exceeds the enumeration guard");
    if (m < 0 || m > n) fail("BadInput", "target mass out of range");
    IntegerMeasure pi;
    for (int b : b_list) pi.add({b});

    std::set<IntegerMeasure> out;
    std::vector<std::pair<std::vector<int>, long long>> support(pi.mass.begin(), pi.mass.end());
    std::vector<long long> rho(support.size(), 0);
    while (true) {
        long long total = 0;
        for (long long v : rho) total += v;
        if (total == m) {
            IntegerMeasure meas;
            for (std::size_t i = 0; i < support.size(); ++i)
                meas.add(support[i].first, rho[i]);
            out.insert(std::move(meas));
        }
        std::size_t i = 0;
        while (i < support.size()) {
            if (rho[i] < support[i].second) {
                ++rho[i];
                break;
            }
            rho[i] = 0;
            ++i;
        }
        if (i == support.size()) break;
    }
    return canonical_set(std::move(out));
}

std::vector<IntegerMeasure> permuted_prefix_measures(const std::vector<int>& b_list, int m) {
    const int n = static_cast<int>(b_list.size());
    if (n > 8) fail("TooLarge", "list length exceeds the enumeration guard");
    if (m < 0 || m > n) fail("BadInput", "target mass out of range");
    std::set<IntegerMeasure> out;
    for (const auto& perm : all_permutations(n)) {
        IntegerMeasure meas;
        for (int i = 0; i < m; ++i) meas.add({b_list[perm[i]]});
        out.insert(std::move(meas));
    }
    return canonical_set(std::move(out));
}

std::vector<IntegerMeasure> enumerate_couplings(const std::vector<std::pair<int, int>>& pairs) {
    const int n = static_cast<int>(pairs.size());
    if (n > 8) fail("TooLarge", "list length exceeds the enumeration guard");
    IntegerMeasure pi_x, pi_y;
    for (const auto& [a, b] : pairs) {
        pi_x.add({a});
        pi_y.add({b});
    }

    // Definition-side route: enumerate contingency tables (all Z_{>=0}
    // matrices over the marginal supports with the prescribed row and
    // column sums).
    std::vector<std::pair<int, long long>> rows, cols;
    for (const auto& [pt, c] : pi_x.mass) rows.emplace_back(pt[0], c);
    for (const auto& [pt, c] : pi_y.mass) cols.emplace_back(pt[0], c);

    std::set<IntegerMeasure> out;
    std::vector<std::vector<long long>> table(rows.size(),
                                              std::vector<long long>(cols.size(), 0));
    std::vector<long long> col_used(cols.size(), 0);

    const std::function<void(std::size_t)> fill_row = [&](std::size_t ri) {
        if (ri == rows.size()) {
            for (std::size_t cj = 0; cj < cols.size(); ++cj)
                if (col_used[cj] != cols[cj].second) return;
            IntegerMeasure meas;
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < cols.size(); ++j)
                    meas.add({rows[i].first, cols[j].first}, table[i][j]);
            out.insert(std::move(meas));
            return;
        }
        // Distribute rows[ri].second over the columns.
        const std::function<void(std::size_t, long long)> place = [&](std::size_t cj,
                                                                      long long remaining) {
            if (cj == cols.size()) {
                if (remaining == 0) fill_row(ri + 1);
                return;
            }
            const long long cap = std::min(remaining, cols[cj].second - col_used[cj]);
            for (long long v = 0; v <= cap; ++v) {
                table[ri][cj] = v;
                col_used[cj] += v;
                place(cj + 1, remaining - v);
                col_used[cj] -= v;
                table[ri][cj] = 0;
            }
        };
        place(0, rows[ri].second);
    };
    fill_row(0);
    return canonical_set(std::move(out));
}

std::vector<IntegerMeasure> permuted_pair_measures(const std::vector<std::pair<int, int>>& pairs) {
    const int n = static_cast<int>(pairs.size());
    if (n > 8) fail("TooLarge", "list length exceeds the enumeration guard");
    std::set<IntegerMeasure> out;
    for (const auto& perm : all_permutations(n)) {
        IntegerMeasure meas;
        for (int i = 0; i < n; ++i) meas.add({pairs[i].first, pairs[perm[i]].second});
        out.insert(std::move(meas));
    }
    return canonical_set(std::move(out));
}

std::pair<BigInt, BigInt> chain_sequence_count_bound(const IntegerMeasure& a_measure,
                                                     int alphabet_size, int x_end) {
    const long long n = a_measure.total();
    if (n > 8 || alphabet_size > 4)
        fail("TooLarge", "chain enumeration guard is n <= 8, |X| <= 4");
    if (x_end < 0 || x_end >= alphabet_size) fail("BadInput", "x_end outside the alphabet");
    for (const auto& [point, count] : a_measure.mass) {
        if (point.size() != 2) fail("BadInput", "A must live on X^2");
        for (int v : point)
            if (v < 0 || v >= alphabet_size) fail("BadInput", "A supported outside the alphabet");
        (void)count;
    }

    BigInt lhs = 0;
    std::vector<int> x(static_cast<std::size_t>(n), 0);
    while (true) {
        IntegerMeasure got;
        for (long long j = 0; j < n; ++j) {
            const int next = (j + 1 < n) ? x[static_cast<std::size_t>(j + 1)] : x_end;
            got.add({x[static_cast<std::size_t>(j)], next});
        }
        if (got == a_measure) lhs += 1;

        std::size_t i = 0;
        while (i < x.size()) {
            if (x[i] < alphabet_size - 1) {
                ++x[i];
                break;
            }
            x[i] = 0;
            ++i;
        }
        if (i == x.size()) break;
    }

    // Prefactor read as n = A(X^2); the reference leaves "k" unspecified.
    BigInt numerator = BigInt(n);
    for (const auto& [point, count] : a_measure.marginal(0).mass) {
        numerator *= factorial(count);
        (void)point;
    }
    BigInt denominator = 1;
    for (const auto& [point, count] : a_measure.mass) {
        denominator *= factorial(count);
        (void)point;
    }
    if (numerator % denominator != 0)
        fail("InternalError", "chain bound did not reduce to an integer");
    return {lhs, numerator / denominator};
}

} // namespace iml
