#pragma once

// Declarative experiment configuration: one JSON document per recipe with
// desk-scale and paper-scale defaults, dotted-key overrides and a content hash.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dimest/error.hpp"
#include "dimest/output.hpp"

namespace dimest {

enum class Scale { Desk, Paper };

inline const char* to_string(Scale s) { return s == Scale::Desk ? "desk" : "paper"; }

inline Scale scale_from_string(const std::string& s) {
    if (s == "desk") return Scale::Desk;
    if (s == "paper") return Scale::Paper;
    throw UsageError("unknown scale '" + s + "' (expected desk or paper)");
}

inline const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> names{
        "fig2_sweep",  "fig3_noise",     "fig4_oneshot",   "fig5_finite",        "fig6a_ising",
        "fig6b_pendulum", "appA_circle", "appC_idcompare", "appD_mixture_peaks", "appD_sample_efficiency"};
    return names;
}

inline std::string recipe_list() {
    std::string s;
    for (const auto& n : recipe_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
}

struct ExperimentConfig {
    std::string recipe;
    std::uint64_t seed = 1;
    Scale scale = Scale::Desk;
    Json params = Json::object();

    [[nodiscard]] Json to_json() const {
        return Json{{"recipe", recipe}, {"seed", seed}, {"scale", to_string(scale)}, {"params", params}};
    }

    static ExperimentConfig from_json(const Json& j) {
        try {
            ExperimentConfig c;
            c.recipe = j.at("recipe").get<std::string>();
            c.seed = j.at("seed").get<std::uint64_t>();
            c.scale = scale_from_string(j.at("scale").get<std::string>());
            c.params = j.at("params");
            return c;
        } catch (const Json::exception& e) {
            throw InvalidInput(std::string("ExperimentConfig: ") + e.what());
        }
    }

    [[nodiscard]] std::string hash() const { return json_hash(to_json()); }
};

namespace detail {

inline Json train_block(Scale) {
    return Json{{"iters", 20000}, {"batch", 128}, {"lr", 5e-4}, {"report_window", 0.1}, {"fail_threshold_bits", 0.05},
                {"standardize_inputs", true}};
}

inline Json finite_block(Scale, int epochs, const std::string& stop_rule) {
    return Json{{"epochs", epochs},       {"batch", 128},           {"lr", 5e-4},
                {"test_size", 128},       {"test_fraction", 0.0},   {"median_filter_epochs", 20},
                {"stop_rule", stop_rule}, {"fraction", 0.9},        {"fail_threshold_bits", 0.05},
                {"standardize_inputs", true}};
}

inline Json critic_block() {
    return Json{{"encoder_hidden", {128, 128}}, {"head_hidden", {64}}, {"concat_hidden", {256, 256}}};
}

inline Json data_block() {
    return Json{{"K", 500},
                {"KZ", 4},
                {"I_bits", 2.0},
                {"teacher", "nonlinear"},
                {"mixture", {{"n_peaks", 8}, {"mu", 2.0}, {"i_peak_bits", 2.0}}}};
}

inline Json dimension_block() {
    return Json{{"alpha", 0.5}, {"threshold_bits", 0.5}, {"n_eval", 10000}};
}

inline Json range(int lo, int hi) {
    Json a = Json::array();
    for (int i = lo; i <= hi; ++i) a.push_back(i);
    return a;
}

}  // namespace detail

/// Resolved defaults for `recipe` at the given scale.
inline ExperimentConfig default_config(const std::string& recipe, Scale scale = Scale::Desk, std::uint64_t seed = 1) {
    const bool desk = scale == Scale::Desk;
    const int trials = desk ? 3 : 10;
    ExperimentConfig c;
    c.recipe = recipe;
    c.seed = seed;
    c.scale = scale;
    Json& p = c.params;
    if (recipe == "fig2_sweep") {
        p = {{"latents", {"gaussian", "mixture"}},
             {"teachers", {"linear", "nonlinear"}},
             {"families", {"hybrid", "separable"}},
             {"kz_list", detail::range(1, desk ? 8 : 10)},
             {"trials", trials},
             {"delta_bits", 0.1},
             {"cca_samples", 20000},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"train", detail::train_block(scale)}};
    } else if (recipe == "fig3_noise") {
        p = {{"latents", {"gaussian", "mixture"}},
             {"eta_list", desk ? Json{0.0, 0.5, 1.0} : Json{0.0, 0.25, 0.5, 0.75, 1.0}},
             {"family", "hybrid"},
             {"kz_list", detail::range(1, 8)},
             {"trials", trials},
             {"delta_bits", 0.1},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"train", detail::train_block(scale)},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "fig4_oneshot") {
        p = {{"spectrum_kz", 19},
             {"latents", {"gaussian", "mixture"}},
             {"kz_list", desk ? Json{2, 4, 8, 16, 32} : Json{1, 2, 4, 8, 16, 32, 64}},
             {"oneshot_kz", desk ? 32 : 64},
             {"KZ_list", {1, 2, 4, 8}},
             {"I_list", desk ? Json{2.0} : Json{1.0, 2.0, 4.0}},
             {"batch_list", desk ? Json{128} : Json{64, 128, 256, 512}},
             {"trials", trials},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"train", detail::train_block(scale)},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "fig5_finite") {
        p = {{"latents", {"gaussian", "mixture"}},
             {"kz", desk ? 32 : 64},
             {"N_list", desk ? Json{1024, 4096} : Json{256, 512, 1024, 2048, 4096, 8192, 16384}},
             {"KZ_list", desk ? Json{1, 2, 4, 8} : Json{1, 2, 3, 4, 5, 6, 7, 8}},
             {"I_list", desk ? Json{2.0} : Json{1.0, 2.0, 4.0}},
             {"panel_cd_N", 4096},
             {"trials", trials},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"finite", detail::finite_block(scale, 100, "max_test")},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "fig6a_ising") {
        Json finite = detail::finite_block(scale, 100, "max_test");
        finite["test_fraction"] = 0.1;
        p = {{"L_list", desk ? Json{8, 16, 32} : Json{8, 16, 32, 64, 133}},
             {"T_list", {1.5, 1.8, 2.0, 2.1, 2.2, 2.25, 2.3, 2.35, 2.4, 2.45, 2.5, 2.6, 2.8, 3.2}},
             {"n_configs", desk ? 2000 : 10000},
             {"sweeps_between", 0},
             {"burn_in", -1},
             {"replicas", 64},
             {"kz", desk ? 16 : 64},
             {"trials", trials},
             {"bootstrap", 200},
             {"critic", detail::critic_block()},
             {"finite", finite},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "fig6b_pendulum") {
        Json finite = detail::finite_block(scale, 100, "fraction_of_max_test");
        if (!desk) finite["batch"] = 256;
        p = {{"kinds", {"single", "double"}},
             {"trajectories_list", desk ? Json{100} : Json{100, 300, 1000}},
             {"frames", 60},
             {"P", 32},
             {"frame_dt", 1.0 / 30.0},
             {"substeps", 20},
             {"kz", 16},
             {"siamese", true},
             {"trials", trials},
             {"export_frames", 4},
             {"critic", detail::critic_block()},
             {"finite", finite},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "appA_circle") {
        p = {{"rho_points", 100},
             {"rho_max", 0.99},
             {"kappa", {{"lo", 0.05}, {"hi", 5.0}, {"n", 60}}},
             {"lambda", {{"lo", 0.05}, {"hi", 200.0}, {"n", 60}}},
             {"quad_n", 64}};
    } else if (recipe == "appC_idcompare") {
        p = {{"N", desk ? 4096 : 16384},
             {"eta_list", desk ? Json{0.0, 0.5, 1.0} : Json{0.0, 0.25, 0.5, 0.75, 1.0}},
             {"kz", desk ? 32 : 64},
             {"trials", trials},
             {"lb_k_min", 10},
             {"lb_k_max", 20},
             {"twonn_discard", 0.1},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"finite", detail::finite_block(scale, 100, "max_test")},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "appD_mixture_peaks") {
        p = {{"n_peaks_list", detail::range(1, 8)},
             {"families", {"hybrid", "separable"}},
             {"kz", desk ? 32 : 64},
             {"trials", trials},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"train", detail::train_block(scale)},
             {"dimension", detail::dimension_block()}};
    } else if (recipe == "appD_sample_efficiency") {
        p = {{"N_list", desk ? Json{256, 1024, 4096} : Json{256, 512, 1024, 2048, 4096, 8192, 16384}},
             {"families", {"hybrid", "separable"}},
             {"kz", desk ? 32 : 64},
             {"trials", trials},
             {"data", detail::data_block()},
             {"critic", detail::critic_block()},
             {"finite", detail::finite_block(scale, 100, "max_test")},
             {"dimension", detail::dimension_block()}};
    } else {
        throw UsageError("unknown recipe '" + recipe + "'; known recipes: " + recipe_list());
    }
    return c;
}

/// Applies "a.b.c=value" to the params document. The key must already exist;
/// the value is parsed as JSON (bare words become strings) and must keep the
/// kind of the value it replaces.
inline void apply_override(ExperimentConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::exception&) {
        value = text;
    }
    Json* node = &c.params;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part))
            throw UsageError("override key '" + key + "' does not exist in recipe " + c.recipe);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    const bool same_kind = (node->is_number() && value.is_number()) || node->type() == value.type();
    if (!same_kind)
        throw UsageError("override '" + key + "' expects a " + std::string(node->type_name()) + ", got " +
                         value.type_name());
    *node = std::move(value);
}

}  // namespace dimest
