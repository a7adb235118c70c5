#include "annoret/optim.hpp"

#include <algorithm>
#include <cmath>

#include "annoret/util.hpp"

namespace annoret {

AdamW::AdamW(std::size_t n, Options opt) : opt_(opt), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw data_error("optimizer state does not match parameter count");
    }
    ++t_;
    double bc1 = 1.0 - std::pow(opt_.beta1, (double)t_);
    double bc2 = 1.0 - std::pow(opt_.beta2, (double)t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grad[i];
        m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
        v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g * g;
        double m_hat = m_[i] / bc1;
        double v_hat = v_[i] / bc2;
        params[i] -= opt_.lr * (m_hat / (std::sqrt(v_hat) + opt_.eps) +
                                opt_.weight_decay * params[i]);
    }
}

void AdamW::reset() {
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
    t_ = 0;
}

}  // namespace annoret
