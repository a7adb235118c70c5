#pragma once

// AdamW with decoupled weight decay. Defaults follow common convention
// (beta1 0.9, beta2 0.999, eps 1e-8, decay 0.01); only lr/epochs/batch size
// are pinned by the experiments this optimizer serves.

#include <cstddef>
#include <vector>

namespace annoret {

class AdamW {
   public:
    struct Options {
        double lr = 3e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW(std::size_t n, Options opt);

    void step(std::vector<double>& params, const std::vector<double>& grad);

    // Drop moments and the step count (stage-2 re-initialization).
    void reset();

    Options& options() { return opt_; }
    const Options& options() const { return opt_; }
    long step_count() const { return t_; }

   private:
    Options opt_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

}  // namespace annoret
