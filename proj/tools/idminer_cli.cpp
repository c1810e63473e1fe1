#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <idminer/idminer.h>

namespace {

void print_file(const std::string& path) {
    std::ifstream stream(path, std::ios::binary);
    if (!stream) return;
    std::ostringstream content;
    content << stream.rdbuf();
    std::cout << content.str();
}

int finish(idm_status status) {
    if (status != IDM_OK) std::cerr << "error: " << idm_last_error() << "\n";
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identity-anchored deepfake detection laboratory"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", [] { return std::string(idm_version()); });

    std::string config_path, manifest_path, out_path, checkpoint_path, resume_path;
    std::string protocol = "conventional", kind = "jpeg", detector = "idminer";
    std::string reference = "auto", scores_path, report_path = "grad_check.json";
    std::uint64_t seed = 1;
    int level = 3, configurations = 20;
    double tolerance = 1e-4;
    bool average_frames = false;

    idm_train_options train_options;
    idm_train_options_init(&train_options);

    CLI::App* synth = app.add_subcommand("synth-gen", "Generate the synthetic protocol dataset");
    synth->add_option("--config", config_path, "Generation config file")->required();
    synth->add_option("--out", out_path, "Output directory")->required();
    synth->add_option("--seed", seed, "Generation seed");

    CLI::App* train = app.add_subcommand("train", "Train the identity detector");
    train->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    train->add_option("--out", out_path, "Output directory")->required();
    train->add_option("--resume", resume_path, "Continue from this checkpoint");
    train->add_option("--epochs", train_options.epochs, "Training epochs");
    train->add_option("--steps-per-epoch", train_options.steps_per_epoch,
                      "Steps per epoch (0: derive from the train split)");
    train->add_option("--lr", train_options.lr, "Adam learning rate");
    train->add_option("--beta1", train_options.beta1, "Adam beta1");
    train->add_option("--beta2", train_options.beta2, "Adam beta2");
    train->add_option("--tau", train_options.tau, "Contrastive temperature");
    train->add_option("--lambda", train_options.lambda_, "Frame-level loss weight");
    train->add_option("--classes", train_options.classes_per_batch, "Classes per batch");
    train->add_option("--videos", train_options.videos_per_class, "Videos per class");
    train->add_option("--genuine", train_options.genuine_per_class,
                      "Genuine videos inside each class");
    train->add_option("--frame-pairs", train_options.frame_pairs_per_video,
                      "Frame pairs per video");
    train->add_option("--seed", train_options.seed, "Training seed");
    train->add_option("--checkpoint-every", train_options.checkpoint_every,
                      "Steps between mid-run checkpoints (0: final only)");

    CLI::App* eval = app.add_subcommand("eval", "Protocol evaluation");
    eval->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    eval->add_option("--ckpt", checkpoint_path, "Trained checkpoint (identity detector)");
    eval->add_option("--protocol", protocol, "conventional | whitehat | surrogate | all");
    eval->add_option("--kind", kind, "Surrogate kind: resize | jpeg | vc | blur");
    eval->add_option("--level", level, "Surrogate level 0..5");
    eval->add_option("--detector", detector, "idminer | meanfeat");
    eval->add_option("--reference", reference, "auto | based | free");
    eval->add_option("--out", out_path, "Output prefix")->required();

    CLI::App* reid = app.add_subcommand("reid", "Puppeteer re-identification");
    reid->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    reid->add_option("--ckpt", checkpoint_path, "Trained checkpoint (identity detector)");
    reid->add_option("--detector", detector, "idminer | meanfeat");
    reid->add_option("--out", out_path, "Output prefix")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "Surrogate sensitivity table");
    sweep->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    sweep->add_option("--ckpt", checkpoint_path, "Trained checkpoint (identity detector)");
    sweep->add_option("--detector", detector, "idminer | meanfeat");
    sweep->add_option("--out", out_path, "Output prefix")->required();

    CLI::App* grad = app.add_subcommand("grad-check", "Verify hand-derived gradients");
    grad->add_option("--seed", seed, "Configuration seed");
    grad->add_option("--configs", configurations, "Number of seeded configurations");
    grad->add_option("--tol", tolerance, "Maximum allowed relative error");
    grad->add_option("--report", report_path, "Report JSON path");

    CLI::App* external = app.add_subcommand("eval-scores", "Metrics over an external score CSV");
    external->add_option("--scores", scores_path, "Score CSV")->required();
    external->add_option("--out", out_path, "Output prefix")->required();
    external->add_flag("--average-frames", average_frames,
                       "Rows sharing a pair_id are per-frame scores");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed())
        return finish(idm_synth_gen(config_path.c_str(), out_path.c_str(), seed));

    if (train->parsed()) {
        idm_status status;
        if (resume_path.empty())
            status = idm_train(manifest_path.c_str(), out_path.c_str(), &train_options);
        else
            status = idm_resume(resume_path.c_str(), manifest_path.c_str(), out_path.c_str(),
                                &train_options);
        if (status == IDM_OK) print_file(out_path + "/run.json");
        return finish(status);
    }

    if (eval->parsed()) {
        const idm_status status =
            idm_eval(manifest_path.c_str(), checkpoint_path.c_str(), protocol.c_str(),
                     kind.c_str(), level, detector.c_str(), reference.c_str(), out_path.c_str());
        if (status == IDM_OK) print_file(out_path + "_metrics.json");
        return finish(status);
    }

    if (reid->parsed()) {
        const idm_status status = idm_reid(manifest_path.c_str(), checkpoint_path.c_str(),
                                           detector.c_str(), out_path.c_str());
        if (status == IDM_OK) print_file(out_path + "_reid.json");
        return finish(status);
    }

    if (sweep->parsed()) {
        const idm_status status = idm_sweep(manifest_path.c_str(), checkpoint_path.c_str(),
                                            detector.c_str(), out_path.c_str());
        if (status == IDM_OK) print_file(out_path + "_sweep.csv");
        return finish(status);
    }

    if (grad->parsed()) {
        const idm_status status =
            idm_grad_check(seed, configurations, tolerance, report_path.c_str());
        print_file(report_path);
        return finish(status);
    }

    if (external->parsed()) {
        const idm_status status =
            idm_eval_scores(scores_path.c_str(), average_frames ? 1 : 0, out_path.c_str());
        if (status == IDM_OK) print_file(out_path + "_metrics.json");
        return finish(status);
    }

    std::cout << app.help();
    return 0;
}
