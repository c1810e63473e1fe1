#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>

namespace idminer::num {

// One named learnable array with its gradient buffer and Adam moments.
// All four matrices always share a shape.
struct Param {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd adam_m;
    Eigen::MatrixXd adam_v;
};

// Name-keyed parameter collection. std::map keeps iteration order equal to
// name order, which fixes the update and serialization order once and for all.
class ParamStore {
public:
    Param& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::map<std::string, Param>& entries() { return entries_; }
    const std::map<std::string, Param>& entries() const { return entries_; }

    void zero_grads();
    std::size_t scalar_count() const;

    std::uint64_t step_count = 0;

private:
    std::map<std::string, Param> entries_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over every entry, in name order. Gradients are zeroed
// afterwards and step_count advances by one.
void adam_step(ParamStore& store, const AdamConfig& config);

}  // namespace idminer::num
