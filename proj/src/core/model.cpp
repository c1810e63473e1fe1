#include "core/model.hpp"

#include <cmath>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/numeric.hpp"
#include "core/serialize.hpp"

namespace idminer::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string layer_name(int index, const char* part) {
    return "enc.l" + std::to_string(index) + "." + part;
}

void check_config(const ModelConfig& config) {
    if (config.encoder.input_dim <= 0) raise(ErrorKind::Config, "encoder input_dim must be positive");
    if (config.encoder.widths.empty()) raise(ErrorKind::Config, "encoder needs at least one layer");
    for (int w : config.encoder.widths)
        if (w <= 0) raise(ErrorKind::Config, "encoder widths must be positive");
    if (config.aggregator.hidden_dim <= 0 || config.aggregator.repr_dim <= 0)
        raise(ErrorKind::Config, "aggregator dimensions must be positive");
    if (config.t_max <= 0) raise(ErrorKind::Config, "t_max must be positive");
}

void init_matrix(Eigen::MatrixXd& m, int fan_in, num::SeededRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

}  // namespace

void init_params(num::ParamStore& store, const ModelConfig& config, num::SeededRng& rng) {
    check_config(config);
    int fan_in = config.encoder.input_dim;
    for (std::size_t l = 0; l < config.encoder.widths.size(); ++l) {
        const int width = config.encoder.widths[l];
        auto& w = store.add(layer_name(static_cast<int>(l), "W"), width, fan_in);
        store.add(layer_name(static_cast<int>(l), "b"), width, 1);
        init_matrix(w.value, fan_in, rng);
        fan_in = width;
    }
    const int in = config.encoder.output_dim();
    const int hidden = config.aggregator.hidden_dim;
    for (const char* gate : {"z", "r", "h"}) {
        auto& w = store.add(std::string("agg.W") + gate, hidden, in);
        auto& u = store.add(std::string("agg.U") + gate, hidden, hidden);
        store.add(std::string("agg.b") + gate, hidden, 1);
        init_matrix(w.value, in, rng);
        init_matrix(u.value, hidden, rng);
    }
    auto& proj = store.add("agg.proj.W", config.aggregator.repr_dim, hidden);
    store.add("agg.proj.b", config.aggregator.repr_dim, 1);
    init_matrix(proj.value, hidden, rng);
}

MatrixXd encode_frames(const num::ParamStore& store, const ModelConfig& config,
                       const MatrixXd& frames, EncodeCache* cache) {
    if (frames.cols() != config.encoder.input_dim)
        raise(ErrorKind::Shape, "encode_frames: frame dimension " + std::to_string(frames.cols()) +
                                    " does not match encoder input " +
                                    std::to_string(config.encoder.input_dim));
    if (frames.rows() == 0) raise(ErrorKind::Usage, "encode_frames: empty frame list");

    MatrixXd current = frames;
    std::vector<MatrixXd> activations;
    activations.reserve(config.encoder.widths.size());
    for (std::size_t l = 0; l < config.encoder.widths.size(); ++l) {
        const auto& w = store.at(layer_name(static_cast<int>(l), "W")).value;
        const auto& b = store.at(layer_name(static_cast<int>(l), "b")).value;
        MatrixXd pre = current * w.transpose();
        pre.rowwise() += b.col(0).transpose();
        current = pre.array().tanh().matrix();
        activations.push_back(current);
    }
    VectorXd norms(current.rows());
    MatrixXd output(current.rows(), current.cols());
    for (Eigen::Index t = 0; t < current.rows(); ++t) {
        const double n = current.row(t).norm();
        if (n == 0.0) raise(ErrorKind::Numeric, "encode_frames: zero pre-normalization activation");
        norms(t) = n;
        output.row(t) = current.row(t) / n;
    }
    if (cache) {
        cache->input = frames;
        cache->activations = std::move(activations);
        cache->norms = std::move(norms);
        cache->output = output;
    }
    return output;
}

VectorXd encode_frame(const num::ParamStore& store, const ModelConfig& config,
                      const VectorXd& frame) {
    return encode_frames(store, config, frame.transpose()).row(0).transpose();
}

MatrixXd encode_backward(num::ParamStore& store, const ModelConfig& config,
                         const EncodeCache& cache, const MatrixXd& d_output) {
    if (cache.activations.empty()) raise(ErrorKind::Usage, "encode_backward: missing forward cache");
    if (d_output.rows() != cache.output.rows() || d_output.cols() != cache.output.cols())
        raise(ErrorKind::Shape, "encode_backward: upstream gradient shape mismatch");

    const MatrixXd& last = cache.activations.back();
    MatrixXd d_act(last.rows(), last.cols());
    for (Eigen::Index t = 0; t < last.rows(); ++t) {
        const double n = cache.norms(t);
        const auto y = cache.output.row(t);
        const double along = y.dot(d_output.row(t));
        d_act.row(t) = (d_output.row(t) - along * y) / n;
    }
    for (int l = static_cast<int>(config.encoder.widths.size()) - 1; l >= 0; --l) {
        const MatrixXd& act = cache.activations[static_cast<std::size_t>(l)];
        const MatrixXd d_pre = (d_act.array() * (1.0 - act.array().square())).matrix();
        const MatrixXd& below =
            l == 0 ? cache.input : cache.activations[static_cast<std::size_t>(l - 1)];
        auto& w = store.at(layer_name(l, "W"));
        auto& b = store.at(layer_name(l, "b"));
        w.grad += d_pre.transpose() * below;
        b.grad.col(0) += d_pre.colwise().sum().transpose();
        d_act = d_pre * w.value;
    }
    return d_act;
}

VectorXd aggregate(const num::ParamStore& store, const ModelConfig& config,
                   const MatrixXd& embeddings, AggregateCache* cache) {
    if (embeddings.rows() == 0) raise(ErrorKind::Usage, "aggregate: empty embedding sequence");
    if (embeddings.cols() != config.encoder.output_dim())
        raise(ErrorKind::Shape, "aggregate: embedding dimension mismatch");

    const auto& wz = store.at("agg.Wz").value;
    const auto& wr = store.at("agg.Wr").value;
    const auto& wh = store.at("agg.Wh").value;
    const auto& uz = store.at("agg.Uz").value;
    const auto& ur = store.at("agg.Ur").value;
    const auto& uh = store.at("agg.Uh").value;
    const auto& bz = store.at("agg.bz").value;
    const auto& br = store.at("agg.br").value;
    const auto& bh = store.at("agg.bh").value;

    const Eigen::Index steps = embeddings.rows();
    const int hidden = config.aggregator.hidden_dim;
    MatrixXd hs(steps, hidden), zs(steps, hidden), rs(steps, hidden), cs(steps, hidden);
    VectorXd h = VectorXd::Zero(hidden);
    for (Eigen::Index t = 0; t < steps; ++t) {
        const VectorXd x = embeddings.row(t).transpose();
        const VectorXd z =
            (1.0 / (1.0 + (-(wz * x + uz * h + bz.col(0)).array()).exp())).matrix();
        const VectorXd r =
            (1.0 / (1.0 + (-(wr * x + ur * h + br.col(0)).array()).exp())).matrix();
        const VectorXd hc = (wh * x + uh * (r.array() * h.array()).matrix() + bh.col(0))
                                .array()
                                .tanh()
                                .matrix();
        h = ((1.0 - z.array()) * h.array() + z.array() * hc.array()).matrix();
        zs.row(t) = z.transpose();
        rs.row(t) = r.transpose();
        cs.row(t) = hc.transpose();
        hs.row(t) = h.transpose();
    }

    const auto& pw = store.at("agg.proj.W").value;
    const auto& pb = store.at("agg.proj.b").value;
    // Time-averaged state readout: the representation must not depend on
    // where in its cycle a behavior happens to start or end.
    const VectorXd pooled = hs.colwise().mean().transpose();
    const VectorXd projection = pw * pooled + pb.col(0);
    const double norm = projection.norm();
    if (norm == 0.0) raise(ErrorKind::Numeric, "aggregate: zero projection");
    const VectorXd output = projection / norm;

    if (cache) {
        cache->inputs = embeddings;
        cache->h = std::move(hs);
        cache->z = std::move(zs);
        cache->r = std::move(rs);
        cache->hcand = std::move(cs);
        cache->projection = projection;
        cache->projection_norm = norm;
        cache->output = output;
    }
    return output;
}

MatrixXd aggregate_backward(num::ParamStore& store, const ModelConfig& config,
                            const AggregateCache& cache, const VectorXd& d_repr) {
    if (cache.h.rows() == 0) raise(ErrorKind::Usage, "aggregate_backward: missing forward cache");
    if (d_repr.size() != cache.output.size())
        raise(ErrorKind::Shape, "aggregate_backward: upstream gradient shape mismatch");

    const Eigen::Index steps = cache.h.rows();
    const int hidden = config.aggregator.hidden_dim;

    auto& pw = store.at("agg.proj.W");
    auto& pb = store.at("agg.proj.b");
    const double along = cache.output.dot(d_repr);
    const VectorXd d_proj = (d_repr - along * cache.output) / cache.projection_norm;
    const VectorXd h_pooled = cache.h.colwise().mean().transpose();
    pw.grad += d_proj * h_pooled.transpose();
    pb.grad.col(0) += d_proj;

    auto& wz = store.at("agg.Wz");
    auto& wr = store.at("agg.Wr");
    auto& wh = store.at("agg.Wh");
    auto& uz = store.at("agg.Uz");
    auto& ur = store.at("agg.Ur");
    auto& uh = store.at("agg.Uh");
    auto& bz = store.at("agg.bz");
    auto& br = store.at("agg.br");
    auto& bh = store.at("agg.bh");

    MatrixXd d_inputs(steps, cache.inputs.cols());
    // Every step's state feeds the mean readout, so each carries the same
    // direct term on top of the recurrent flow from later steps.
    const VectorXd d_h_direct = pw.value.transpose() * d_proj / static_cast<double>(steps);
    VectorXd d_h = d_h_direct;
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
        const VectorXd x = cache.inputs.row(t).transpose();
        const VectorXd h_prev =
            t == 0 ? VectorXd::Zero(hidden) : VectorXd(cache.h.row(t - 1).transpose());
        const VectorXd z = cache.z.row(t).transpose();
        const VectorXd r = cache.r.row(t).transpose();
        const VectorXd hc = cache.hcand.row(t).transpose();

        const VectorXd d_z = (d_h.array() * (hc - h_prev).array()).matrix();
        const VectorXd d_hc = (d_h.array() * z.array()).matrix();
        VectorXd d_h_prev = (d_h.array() * (1.0 - z.array())).matrix();

        const VectorXd d_hc_pre = (d_hc.array() * (1.0 - hc.array().square())).matrix();
        wh.grad += d_hc_pre * x.transpose();
        uh.grad += d_hc_pre * (r.array() * h_prev.array()).matrix().transpose();
        bh.grad.col(0) += d_hc_pre;
        const VectorXd d_rh = uh.value.transpose() * d_hc_pre;
        const VectorXd d_r = (d_rh.array() * h_prev.array()).matrix();
        d_h_prev += (d_rh.array() * r.array()).matrix();

        const VectorXd d_z_pre = (d_z.array() * z.array() * (1.0 - z.array())).matrix();
        wz.grad += d_z_pre * x.transpose();
        uz.grad += d_z_pre * h_prev.transpose();
        bz.grad.col(0) += d_z_pre;
        d_h_prev += uz.value.transpose() * d_z_pre;

        const VectorXd d_r_pre = (d_r.array() * r.array() * (1.0 - r.array())).matrix();
        wr.grad += d_r_pre * x.transpose();
        ur.grad += d_r_pre * h_prev.transpose();
        br.grad.col(0) += d_r_pre;
        d_h_prev += ur.value.transpose() * d_r_pre;

        d_inputs.row(t) = (wz.value.transpose() * d_z_pre + wr.value.transpose() * d_r_pre +
                           wh.value.transpose() * d_hc_pre)
                              .transpose();
        d_h = d_h_prev + d_h_direct;
    }
    return d_inputs;
}

MatrixXd subsample_frames(const MatrixXd& frames, int t_max) {
    if (t_max <= 0) raise(ErrorKind::Config, "subsample_frames: t_max must be positive");
    const Eigen::Index total = frames.rows();
    if (total <= t_max) return frames;
    MatrixXd out(t_max, frames.cols());
    for (int i = 0; i < t_max; ++i) {
        const double pos = t_max == 1
                               ? 0.0
                               : static_cast<double>(i) * static_cast<double>(total - 1) /
                                     static_cast<double>(t_max - 1);
        out.row(i) = frames.row(static_cast<Eigen::Index>(std::llround(pos)));
    }
    return out;
}

VectorXd forward_video(const num::ParamStore& store, const ModelConfig& config,
                       const MatrixXd& frames) {
    const MatrixXd reduced = subsample_frames(frames, config.t_max);
    const MatrixXd embeddings = encode_frames(store, config, reduced);
    return aggregate(store, config, embeddings);
}

namespace {

json model_config_to_json(const ModelConfig& config) {
    json out;
    out["encoder"]["input_dim"] = config.encoder.input_dim;
    out["encoder"]["widths"] = config.encoder.widths;
    out["aggregator"]["hidden_dim"] = config.aggregator.hidden_dim;
    out["aggregator"]["repr_dim"] = config.aggregator.repr_dim;
    out["t_max"] = config.t_max;
    return out;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig config;
    config.encoder.input_dim = j.at("encoder").at("input_dim").get<int>();
    config.encoder.widths = j.at("encoder").at("widths").get<std::vector<int>>();
    config.aggregator.hidden_dim = j.at("aggregator").at("hidden_dim").get<int>();
    config.aggregator.repr_dim = j.at("aggregator").at("repr_dim").get<int>();
    config.t_max = j.at("t_max").get<int>();
    return config;
}

}  // namespace

std::string save_checkpoint(const ModelConfig& config, const num::ParamStore& store,
                            const std::string& train_config_json) {
    json root;
    root["version"] = 1;
    root["model_config"] = model_config_to_json(config);
    root["step_count"] = store.step_count;
    if (!train_config_json.empty()) {
        try {
            root["train_config"] = json::parse(train_config_json);
        } catch (const json::exception& e) {
            raise(ErrorKind::Usage, std::string("save_checkpoint: train config is not JSON: ") + e.what());
        }
    }
    json params = json::object();
    for (const auto& [name, p] : store.entries()) {
        json entry;
        entry["rows"] = p.value.rows();
        entry["cols"] = p.value.cols();
        entry["value"] = num::encode_doubles(p.value);
        entry["adam_m"] = num::encode_doubles(p.adam_m);
        entry["adam_v"] = num::encode_doubles(p.adam_v);
        params[name] = std::move(entry);
    }
    root["params"] = std::move(params);
    return root.dump(2) + "\n";
}

Checkpoint load_checkpoint(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorKind::Integrity, std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        const int version = root.at("version").get<int>();
        if (version != 1)
            raise(ErrorKind::Integrity,
                  "checkpoint version " + std::to_string(version) + " unsupported (expected 1)");
        Checkpoint ckpt;
        ckpt.config = model_config_from_json(root.at("model_config"));
        ckpt.store.step_count = root.at("step_count").get<std::uint64_t>();
        if (root.contains("train_config")) ckpt.train_config_json = root.at("train_config").dump();
        for (const auto& [name, entry] : root.at("params").items()) {
            auto& p = ckpt.store.add(name, entry.at("rows").get<Eigen::Index>(),
                                     entry.at("cols").get<Eigen::Index>());
            num::decode_doubles(entry.at("value").get<std::string>(), p.value);
            num::decode_doubles(entry.at("adam_m").get<std::string>(), p.adam_m);
            num::decode_doubles(entry.at("adam_v").get<std::string>(), p.adam_v);
        }
        return ckpt;
    } catch (const json::exception& e) {
        raise(ErrorKind::Integrity, std::string("checkpoint layout error: ") + e.what());
    }
}

void save_checkpoint_file(const std::filesystem::path& path, const ModelConfig& config,
                          const num::ParamStore& store, const std::string& train_config_json) {
    num::write_text_file_atomic(path, save_checkpoint(config, store, train_config_json));
}

Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
    return load_checkpoint(num::read_text_file(path));
}

}  // namespace idminer::model
