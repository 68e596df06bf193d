#ifndef GLYPHFORGE_OPTIM_HPP
#define GLYPHFORGE_OPTIM_HPP

#include <string>
#include <vector>

#include "glyphforge/nn.hpp"

namespace gf::optim {

// Learning-rate schedules, selected by id (constant | cosine | warmup-cosine).
struct LrSchedule {
    std::string id = "constant";
    double base_lr = 1e-3;
    int total_steps = 1;
    int warmup_steps = 0;

    double at(int step) const;
};

class Adam {
public:
    Adam(nn::NamedParams params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    void zero_grad();
    void step();

private:
    nn::NamedParams params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

class Sgd {
public:
    Sgd(nn::NamedParams params, double lr) : params_(std::move(params)), lr_(lr) {}
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    void zero_grad();
    void step();

private:
    nn::NamedParams params_;
    double lr_;
};

}  // namespace gf::optim

#endif
