// mud: crowd-count labeling and counting toolkit.
//
// Subcommands: gen-map, viz, stats, synth, train, eval, sweep, grad-check.
// Exit codes: 0 success, 1 usage error, 2 data/io error, 3 numeric failure.

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mud/dataset.hpp"
#include "mud/error.hpp"
#include "mud/grad_check.hpp"
#include "mud/inference.hpp"
#include "mud/label_maps.hpp"
#include "mud/model.hpp"
#include "mud/parallel.hpp"
#include "mud/png_io.hpp"
#include "mud/sweep.hpp"
#include "mud/synthetic.hpp"
#include "mud/trainer.hpp"

namespace {

mud::SigmaMode parse_sigma_mode(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (head == "adaptive") {
            return arg.empty() ? mud::SigmaMode{} : mud::SigmaMode::adaptive_k(std::stoi(arg));
        }
        if (head == "fixed") {
            return arg.empty() ? mud::SigmaMode::fixed(16.0)
                               : mud::SigmaMode::fixed(std::stod(arg));
        }
    } catch (const std::exception&) {
        // falls through to the shared error below
    }
    throw CLI::ValidationError("--sigma-mode",
                               "expected adaptive[:K] or fixed[:S], got '" + text + "'");
}

struct LabelFlags {
    std::string kind = "iknn";
    int k = 1;
    double beta = 0.3;
    std::string sigma_mode = "adaptive:3";
    int resolution = 224;
};

void add_label_flags(CLI::App* cmd, LabelFlags& flags, bool with_resolution,
                     bool with_knn_kind) {
    auto kinds = with_knn_kind ? std::vector<std::string>{"density", "knn", "iknn"}
                               : std::vector<std::string>{"density", "iknn"};
    cmd->add_option("--kind", flags.kind, "Label map family")
        ->check(CLI::IsMember(kinds))
        ->capture_default_str();
    cmd->add_option("--k", flags.k, "Neighbor count for knn/iknn labels")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--beta", flags.beta, "Gaussian kernel scale factor (density labels)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--sigma-mode", flags.sigma_mode,
                    "Per-head sigma rule: adaptive[:K] or fixed[:S]")
        ->capture_default_str();
    if (with_resolution) {
        cmd->add_option("--resolution", flags.resolution, "Label resolution")
            ->check(CLI::IsMember({28, 56, 112, 224}))
            ->capture_default_str();
    }
}

mud::MapConfig map_config_from(const LabelFlags& flags) {
    mud::MapConfig config;
    config.k = flags.k;
    config.beta = flags.beta;
    config.sigma_mode = parse_sigma_mode(flags.sigma_mode);
    config.label_resolution = flags.resolution;
    return config;
}

struct TrainFlags {
    LabelFlags label;
    int epochs = 10;
    int batch = 8;
    double lr = 1e-3;
    std::uint64_t seed = 1;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
    add_label_flags(cmd, flags.label, /*with_resolution=*/true, /*with_knn_kind=*/false);
    cmd->add_option("--epochs", flags.epochs, "Training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--batch", flags.batch, "Examples per optimizer step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--lr", flags.lr, "Learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", flags.seed, "Run seed (init, shuffles, crops)")
        ->capture_default_str();
}

mud::TrainConfig train_config_from(const TrainFlags& flags) {
    mud::TrainConfig config;
    config.label_kind = mud::map_kind_from_name(flags.label.kind);
    config.map = map_config_from(flags.label);
    config.epochs = flags.epochs;
    config.batch_size = flags.batch;
    config.learning_rate = flags.lr;
    config.seed = flags.seed;
    return config;
}

void print_metrics(const std::string& method, const mud::MetricsReport& report) {
    std::printf("%s: mae %.4f nae %.4f rmse %.4f (%d images", method.c_str(), report.mae,
                report.nae, report.rmse, report.images);
    if (report.nae_excluded > 0) {
        std::printf(", %d zero-count excluded from nae", report.nae_excluded);
    }
    std::printf(")\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crowd-count labeling maps and multi-scale counting network"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (0 = hardware)");

    // ---- gen-map -----------------------------------------------------
    auto* gen = app.add_subcommand("gen-map", "Generate a label map for one image");
    LabelFlags gen_flags;
    std::string gen_image, gen_heads, gen_out;
    add_label_flags(gen, gen_flags, /*with_resolution=*/false, /*with_knn_kind=*/true);
    gen->add_option("--image", gen_image, "Image (PNG); sets the map dimensions")->required();
    gen->add_option("--heads", gen_heads, "Head annotations (CSV x,y)")->required();
    gen->add_option("--out", gen_out, "Output label map (.lmap)")->required();
    gen->callback([&] {
        mud::set_max_threads(threads);
        const auto [width, height] = mud::read_png_size(gen_image);
        const auto ann = mud::load_annotations(gen_heads, width, height);
        const auto kind = mud::map_kind_from_name(gen_flags.kind);
        mud::LabelMap map;
        if (kind == mud::MapKind::kDensity) {
            map = mud::density_map(ann, map_config_from(gen_flags));
        } else if (kind == mud::MapKind::kKnn) {
            map = mud::knn_map(ann, gen_flags.k);
        } else {
            map = mud::iknn_map(ann, gen_flags.k);
        }
        mud::write_lmap(map, gen_out);
        std::printf("%s map %dx%d sum %.6f -> %s\n", gen_flags.kind.c_str(), map.width,
                    map.height, map.sum(), gen_out.c_str());
    });

    // ---- viz ---------------------------------------------------------
    auto* viz = app.add_subcommand("viz", "Render a label map to a grayscale PNG");
    std::string viz_in, viz_out;
    bool viz_log = false;
    viz->add_option("--in", viz_in, "Label map (.lmap)")->required();
    viz->add_option("--out", viz_out, "Output PNG")->required();
    viz->add_flag("--log", viz_log, "Log-scale the values before normalizing");
    viz->callback([&] {
        const auto map = mud::read_lmap(viz_in);
        mud::export_png(map, viz_out, viz_log ? mud::PngScale::kLog : mud::PngScale::kLinear);
        std::printf("%s -> %s\n", viz_in.c_str(), viz_out.c_str());
    });

    // ---- stats -------------------------------------------------------
    auto* stats = app.add_subcommand("stats", "Annotation statistics for a dataset directory");
    std::string stats_dir;
    stats->add_option("--data", stats_dir, "Dataset directory (png + csv pairs)")->required();
    stats->callback([&] {
        const auto s = mud::dataset_dir_stats(stats_dir);
        std::printf("images: %d\n", s.images);
        std::printf("total heads: %lld\n", s.total_count);
        std::printf("mean count: %.3f\n", s.mean_count);
        std::printf("max count: %d\n", s.max_count);
        std::printf("mean size: %.1fx%.1f\n", s.mean_width, s.mean_height);
    });

    // ---- synth -------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic crowd dataset");
    mud::SceneConfig synth_config;
    int synth_scenes = 1;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--scenes", synth_scenes, "Number of scenes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--seed", synth_config.seed, "Base seed")->capture_default_str();
    synth->add_option("--width", synth_config.width, "Scene width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--height", synth_config.height, "Scene height")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--count-lo", synth_config.count_lo, "Minimum heads per scene")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth->add_option("--count-hi", synth_config.count_hi, "Maximum heads per scene")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth->add_option("--radius-min", synth_config.radius_min, "Head radius at the top edge")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--radius-max", synth_config.radius_max, "Head radius at the bottom edge")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--noise", synth_config.noise, "Additive Gaussian noise amplitude")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth->callback([&] {
        const auto s = mud::generate_dataset(synth_config, synth_scenes, synth_out);
        std::printf("wrote %d scenes to %s (total heads %lld, mean %.2f)\n", s.images,
                    synth_out.c_str(), s.total_count, s.mean_count);
    });

    // ---- train -------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train the counting network");
    TrainFlags train_flags;
    std::string train_dir, train_out, train_history;
    train->add_option("--data", train_dir, "Training dataset directory")->required();
    train->add_option("--out", train_out, "Output checkpoint (.mudw)")->required();
    train->add_option("--history", train_history, "Per-epoch loss CSV (epoch,L,L_m,L_c)");
    add_train_flags(train, train_flags);
    train->callback([&] {
        mud::set_max_threads(threads);
        const auto dataset = mud::load_dataset(train_dir);
        mud::TrainConfig config = train_config_from(train_flags);
        config.on_epoch = [](const mud::EpochLoss& e) {
            std::printf("epoch %d L %.6f L_m %.6f L_c %.6f\n", e.epoch, e.total, e.map_loss,
                        e.count_loss);
            std::fflush(stdout);
        };
        auto [model, result] = mud::train_new(dataset, config);
        config.on_epoch = nullptr;
        mud::save_run(train_out, model, config);
        if (!train_history.empty()) {
            mud::write_loss_history_csv(train_history, result.history);
        }
        std::printf("saved %s (%zu parameters)\n", train_out.c_str(),
                    model.parameter_count());
    });

    // ---- eval --------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Sliding-window evaluation of a checkpoint");
    std::string eval_model, eval_dir, eval_out;
    int eval_step = 128, eval_patch = 224;
    eval->add_option("--model", eval_model, "Checkpoint (.mudw, with .cfg alongside)")
        ->required();
    eval->add_option("--data", eval_dir, "Evaluation dataset directory")->required();
    eval->add_option("--out", eval_out, "Metrics CSV (method,mae,nae,rmse)");
    eval->add_option("--step", eval_step, "Sliding-window step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_option("--patch", eval_patch, "Window size (the network is fixed at 224)")
        ->check(CLI::IsMember({224}))
        ->capture_default_str();
    eval->callback([&] {
        mud::set_max_threads(threads);
        auto [model, config] = mud::load_run(eval_model);
        const auto dataset = mud::load_dataset(eval_dir);
        const auto report = mud::evaluate_model(model, dataset, eval_step);
        const std::string method = mud::method_label(config);
        print_metrics(method, report);
        if (!eval_out.empty()) mud::write_metrics_csv(eval_out, {{method, report}});
    });

    // ---- sweep -------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Labeling ablation: train+eval per value");
    TrainFlags sweep_flags;
    std::string sweep_axis = "k", sweep_dir, sweep_test, sweep_out;
    std::vector<double> sweep_values;
    std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};
    sweep->add_option("--axis", sweep_axis, "Sweep axis")
        ->check(CLI::IsMember({"beta", "k", "resolution"}))
        ->capture_default_str();
    sweep->add_option("--values", sweep_values, "Axis values")->required()->delimiter(',');
    sweep->add_option("--data", sweep_dir, "Training dataset directory")->required();
    sweep->add_option("--test", sweep_test,
                      "Held-out dataset directory (defaults to --data)");
    sweep->add_option("--seeds", sweep_seeds, "Seeds; metrics report per-value medians")
        ->delimiter(',');
    sweep->add_option("--out", sweep_out, "Output CSV (method,mae,nae,rmse)");
    add_train_flags(sweep, sweep_flags);
    sweep->callback([&] {
        mud::set_max_threads(threads);
        const auto train_set = mud::load_dataset(sweep_dir);
        const auto test_set =
            sweep_test.empty() ? train_set : mud::load_dataset(sweep_test);
        const auto axis = mud::sweep_axis_from_name(sweep_axis);
        const auto rows = mud::ablation_sweep(train_set, test_set,
                                              train_config_from(sweep_flags), axis,
                                              sweep_values, sweep_seeds);
        for (const auto& row : rows) print_metrics(row.method, row.metrics);
        if (!sweep_out.empty()) mud::write_sweep_csv(sweep_out, rows);
    });

    // ---- grad-check ----------------------------------------------------
    auto* grad = app.add_subcommand(
        "grad-check", "Finite-difference check of the full model gradient (64-bit)");
    // Step 1e-5: first-layer parameters shift every downstream pre-activation,
    // and a coarser step sweeps too many of them across the leaky-ReLU kink
    // for the secant to track the true one-sided derivative.
    double grad_eps = 1e-5, grad_fraction = 0.01, grad_tolerance = 1e-4;
    std::uint64_t grad_seed = 1;
    grad->add_option("--eps", grad_eps, "Central-difference step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    grad->add_option("--fraction", grad_fraction, "Fraction of each parameter checked")
        ->check(CLI::Range(1e-6, 1.0))
        ->capture_default_str();
    grad->add_option("--tolerance", grad_tolerance, "Maximum relative error accepted")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    grad->add_option("--seed", grad_seed, "Seed for the probe patch and sampling")
        ->capture_default_str();
    grad->callback([&] {
        mud::set_max_threads(threads);
        // The probe must be a continuous random patch: quantized or clamped
        // images put pre-activations exactly on the leaky-ReLU kink (zero
        // pixels times zero-initialized biases), where the two-sided secant
        // measures the average of both slopes instead of either derivative.
        std::mt19937_64 rng(grad_seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        mud::TensorD patch({3, mud::kPatchSize, mud::kPatchSize});
        for (auto& v : patch.values()) v = unit(rng);
        mud::TensorD truth({28, 28});
        for (auto& v : truth.values()) v = unit(rng);
        const double count = 5.0 + 45.0 * unit(rng);

        mud::ModelT<double> model(mud::ModelConfig{mud::BackboneConfig::desk(), grad_seed});
        const auto params = model.parameters();
        auto build = [&]() {
            const auto pred = model.forward(mud::constant(patch));
            return mud::compute_loss(pred, truth, count, mud::MapKind::kIknn).total;
        };
        const auto report = mud::grad_check<double>(build, params, grad_eps, grad_fraction,
                                                    grad_seed);
        std::printf("checked %zu elements, max relative error %.3e\n",
                    report.elements_checked, report.max_rel_error);
        if (!(report.max_rel_error < grad_tolerance)) {
            throw mud::NumericError("gradient check failed: max relative error " +
                                    std::to_string(report.max_rel_error));
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 1;
    } catch (const mud::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const mud::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
