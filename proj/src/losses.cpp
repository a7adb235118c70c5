#include "annoret/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "annoret/util.hpp"

namespace annoret {

namespace {

void check_finite(const std::vector<double>& scores) {
    if (scores.empty()) throw data_error("score vector is empty");
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw numeric_error("non-finite score at index " + std::to_string(i));
        }
    }
}

void check_positives(const std::vector<std::size_t>& positives, std::size_t n) {
    if (positives.empty()) throw data_error("positive index set is empty");
    std::set<std::size_t> seen;
    for (auto i : positives) {
        if (i >= n) {
            throw data_error("positive index " + std::to_string(i) + " out of range for " +
                             std::to_string(n) + " candidates");
        }
        if (!seen.insert(i).second) {
            throw data_error("duplicate positive index " + std::to_string(i));
        }
    }
}

double log_sum_exp(const std::vector<double>& v) {
    double mx = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

}  // namespace

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::SingleLH: return "SingleLH";
        case LossKind::Rand1LH: return "Rand1LH";
        case LossKind::JointLH: return "JointLH";
        case LossKind::SumMargLH: return "SumMargLH";
        case LossKind::ReplugKL: return "REPLUG-KL";
    }
    return "SumMargLH";
}

LossKind loss_kind_from_string(const std::string& s) {
    std::string v = to_lower(s);
    v.erase(std::remove_if(v.begin(), v.end(), [](char c) { return c == '-' || c == '_'; }),
            v.end());
    if (v == "singlelh" || v == "single") return LossKind::SingleLH;
    if (v == "rand1lh" || v == "rand1") return LossKind::Rand1LH;
    if (v == "jointlh" || v == "joint") return LossKind::JointLH;
    if (v == "summarglh" || v == "summarg") return LossKind::SumMargLH;
    if (v == "replugkl" || v == "replug") return LossKind::ReplugKL;
    throw config_error("unknown loss: " + s);
}

std::vector<double> candidate_distribution(const std::vector<double>& scores) {
    check_finite(scores);
    double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        z += p[i];
    }
    for (auto& x : p) x /= z;
    return p;
}

std::vector<double> log_candidate_distribution(const std::vector<double>& scores) {
    check_finite(scores);
    double lse = log_sum_exp(scores);
    std::vector<double> lp(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) lp[i] = scores[i] - lse;
    return lp;
}

double loss_single(const std::vector<double>& p, std::size_t pos) {
    if (pos >= p.size()) {
        throw data_error("positive index " + std::to_string(pos) + " out of range for " +
                         std::to_string(p.size()) + " candidates");
    }
    if (p[pos] <= 0.0) {
        throw numeric_error("probability of the positive is zero at index " +
                            std::to_string(pos));
    }
    return -std::log(p[pos]);
}

double loss_joint(const std::vector<double>& p, const std::vector<std::size_t>& positives) {
    check_positives(positives, p.size());
    double loss = 0.0;
    for (auto i : positives) loss += loss_single(p, i);
    return loss;
}

double loss_summarg(const std::vector<double>& p, const std::vector<std::size_t>& positives) {
    check_positives(positives, p.size());
    double mass = 0.0;
    for (auto i : positives) mass += p[i];
    if (mass <= 0.0) throw numeric_error("total probability of the positive set is zero");
    return -std::log(mass);
}

LossResult loss_grad_single(const std::vector<double>& scores, std::size_t pos) {
    check_finite(scores);
    if (pos >= scores.size()) {
        throw data_error("positive index " + std::to_string(pos) + " out of range for " +
                         std::to_string(scores.size()) + " candidates");
    }
    double lse = log_sum_exp(scores);
    LossResult r;
    r.value = lse - scores[pos];
    r.grad = candidate_distribution(scores);
    r.grad[pos] -= 1.0;
    return r;
}

LossResult loss_grad_joint(const std::vector<double>& scores,
                           const std::vector<std::size_t>& positives) {
    check_finite(scores);
    check_positives(positives, scores.size());
    double lse = log_sum_exp(scores);
    LossResult r;
    auto p = candidate_distribution(scores);
    double np = (double)positives.size();
    r.value = 0.0;
    r.grad.assign(scores.size(), 0.0);
    for (std::size_t j = 0; j < scores.size(); ++j) r.grad[j] = np * p[j];
    for (auto i : positives) {
        r.value += lse - scores[i];
        r.grad[i] -= 1.0;
    }
    return r;
}

LossResult loss_grad_summarg(const std::vector<double>& scores,
                             const std::vector<std::size_t>& positives) {
    check_finite(scores);
    check_positives(positives, scores.size());
    double lse = log_sum_exp(scores);
    std::vector<double> pos_scores;
    pos_scores.reserve(positives.size());
    for (auto i : positives) pos_scores.push_back(scores[i]);
    double lse_pos = log_sum_exp(pos_scores);

    LossResult r;
    r.value = lse - lse_pos;
    r.grad = candidate_distribution(scores);
    // d/ds_j = p_j - 1[j in P] * p_j / sum_{i in P} p_i, and the ratio is
    // exp(s_j - lse_pos) in log space.
    for (auto i : positives) r.grad[i] -= std::exp(scores[i] - lse_pos);
    return r;
}

LossResult loss_replug(const std::vector<double>& scores, const std::vector<double>& utilities) {
    if (scores.size() != utilities.size()) {
        throw data_error("scores and utilities have different lengths (" +
                         std::to_string(scores.size()) + " vs " +
                         std::to_string(utilities.size()) + ")");
    }
    if (scores.size() < 2) throw data_error("REPLUG needs at least two candidates");
    check_finite(scores);
    check_finite(utilities);

    auto R = candidate_distribution(scores);
    auto U = candidate_distribution(utilities);
    auto log_r = log_candidate_distribution(scores);
    auto log_u = log_candidate_distribution(utilities);

    LossResult r;
    r.value = 0.0;
    for (std::size_t i = 0; i < U.size(); ++i) {
        if (U[i] == 0.0) continue;  // 0 * log 0 := 0
        r.value += U[i] * (log_u[i] - log_r[i]);
    }
    // KL is non-negative; absorb sub-epsilon rounding from the summation.
    if (r.value < 0.0 && r.value > -1e-12) r.value = 0.0;
    r.grad.resize(R.size());
    for (std::size_t i = 0; i < R.size(); ++i) r.grad[i] = R[i] - U[i];
    return r;
}

LossResult loss_grad(LossKind kind, const std::vector<double>& scores,
                     const std::vector<std::size_t>& positives) {
    switch (kind) {
        case LossKind::SingleLH:
        case LossKind::Rand1LH:
            if (positives.size() != 1) {
                throw data_error(to_string(kind) + " requires exactly one positive, got " +
                                 std::to_string(positives.size()));
            }
            return loss_grad_single(scores, positives[0]);
        case LossKind::JointLH:
            return loss_grad_joint(scores, positives);
        case LossKind::SumMargLH:
            return loss_grad_summarg(scores, positives);
        case LossKind::ReplugKL:
            throw config_error("REPLUG-KL needs utility targets; use loss_replug");
    }
    throw config_error("unhandled loss kind");
}

}  // namespace annoret
