#include "core/params.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace idminer::num {

Param& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (entries_.count(name))
        raise(ErrorKind::Usage, "ParamStore: duplicate parameter '" + name + "'");
    Param p;
    p.value = Eigen::MatrixXd::Zero(rows, cols);
    p.grad = Eigen::MatrixXd::Zero(rows, cols);
    p.adam_m = Eigen::MatrixXd::Zero(rows, cols);
    p.adam_v = Eigen::MatrixXd::Zero(rows, cols);
    return entries_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) raise(ErrorKind::Usage, "ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) raise(ErrorKind::Usage, "ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

bool ParamStore::contains(const std::string& name) const { return entries_.count(name) != 0; }

void ParamStore::zero_grads() {
    for (auto& [name, p] : entries_) p.grad.setZero();
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : entries_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void adam_step(ParamStore& store, const AdamConfig& config) {
    for (const auto& [name, p] : store.entries()) {
        if (!p.grad.allFinite())
            raise(ErrorKind::Numeric, "adam_step: non-finite gradient for '" + name + "'");
    }
    const auto t = static_cast<double>(store.step_count + 1);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (auto& [name, p] : store.entries()) {
        p.adam_m = config.beta1 * p.adam_m + (1.0 - config.beta1) * p.grad;
        p.adam_v = config.beta2 * p.adam_v.array().matrix() +
                   (1.0 - config.beta2) * p.grad.array().square().matrix();
        const Eigen::ArrayXXd m_hat = p.adam_m.array() / correction1;
        const Eigen::ArrayXXd v_hat = p.adam_v.array() / correction2;
        p.value.array() -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        p.grad.setZero();
    }
    store.step_count += 1;
}

}  // namespace idminer::num
