// ctseg command line: phantom generation, preprocessing, forward inference,
// loss evaluation, metric evaluation and report aggregation over the native
// .ctvol volume container.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctseg/io.hpp"
#include "ctseg/loss.hpp"
#include "ctseg/metrics.hpp"
#include "ctseg/nn.hpp"
#include "ctseg/phantom.hpp"
#include "ctseg/preprocess.hpp"
#include "ctseg/report.hpp"
#include "ctseg/volume.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUndefinedMetric = 2;

ctseg::Volume load_any_volume(const std::string& path, std::map<std::string, std::string>* meta) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".nii") == 0)
        return ctseg::read_nifti(path);
    ctseg::ReadResult r = ctseg::read_volume(path);
    if (meta) *meta = r.meta;
    return std::move(r.volume);
}

ctseg::Volume coerce_probability(ctseg::Volume v) {
    if (v.kind == ctseg::VolumeKind::Probability) return v;
    return v.as_probability();
}

ctseg::Volume coerce_label(ctseg::Volume v) {
    if (v.kind == ctseg::VolumeKind::Label) return v;
    return v.as_label();
}

std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

ctseg::Tensor5 volume_to_tensor(const ctseg::Volume& v) {
    ctseg::Tensor5 t(1, 1, v.dims.d, v.dims.h, v.dims.w);
    t.data = v.data;
    return t;
}

ctseg::Volume tensor_to_probability(const ctseg::Tensor5& t, const ctseg::Spacing& spacing) {
    ctseg::Volume v;
    v.dims = {t.d, t.h, t.w};
    v.spacing = spacing;
    v.kind = ctseg::VolumeKind::Probability;
    v.data = t.data;
    return v;
}

struct SharedEvalFlags {
    double threshold = 0.5;
    double theta_mm = 1.0;
    double w1 = 0.1;
    double w2 = 0.9;
    bool oracle = false;
    bool strict = false;
    bool hd_literal_sum = false;
};

void add_eval_flags(CLI::App* cmd, SharedEvalFlags& f) {
    cmd->add_option("--threshold", f.threshold, "Probability threshold")->default_val(0.5);
    cmd->add_option("--theta-mm", f.theta_mm, "Surface overlap tolerance in mm")
        ->check(CLI::PositiveNumber)
        ->default_val(1.0);
    cmd->add_option("--w1", f.w1, "Foreground dice weight")->default_val(0.1);
    cmd->add_option("--w2", f.w2, "Background dice weight")->default_val(0.9);
    cmd->add_flag("--oracle", f.oracle, "Force the exhaustive pairwise distance path");
    cmd->add_flag("--strict", f.strict, "Exit 2 when any metric is undefined");
    cmd->add_flag("--hd-literal-sum", f.hd_literal_sum,
                  "Report the sum of both directed Hausdorff maxima instead of their max");
}

void check_weights(const SharedEvalFlags& f) {
    if (std::abs(f.w1 + f.w2 - 1.0) > 1e-9)
        throw CLI::ValidationError("--w1/--w2", "weights must satisfy w1 + w2 = 1");
}

bool report_has_undefined(const ctseg::CaseReport& r) {
    return !r.wdsc || !r.dsc || !r.iou || !r.sen || !r.ppv || !r.hd || !r.assd || !r.so || !r.sd;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric segmentation benchmark engine"};
    app.require_subcommand(1);

    // --- phantom ---------------------------------------------------------
    auto* cmd_phantom = app.add_subcommand("phantom", "Generate a synthetic jaw volume pair");
    std::string ph_out;
    ctseg::PhantomSpec spec;
    std::vector<int> ph_dims = {24, 48, 48};
    std::vector<double> ph_spacing = {0.3, 0.25, 0.25};
    cmd_phantom->add_option("--out", ph_out, "Output stem; writes <stem>_image and <stem>_label")
        ->required();
    cmd_phantom->add_option("--dims", ph_dims, "D H W")->expected(3);
    cmd_phantom->add_option("--spacing", ph_spacing, "dz dy dx in mm")->expected(3);
    cmd_phantom->add_option("--teeth", spec.tooth_count, "Number of teeth")->default_val(6);
    cmd_phantom->add_flag("--missing", spec.missing_teeth, "Remove a seeded subset of teeth");
    cmd_phantom->add_flag("--appliance", spec.appliance, "Add bright restoration foci");
    cmd_phantom->add_option("--noise", spec.noise_sigma, "Gaussian intensity noise sigma")
        ->default_val(0.0);
    cmd_phantom->add_option("--seed", spec.seed, "RNG seed")->default_val(0);

    // --- preprocess ------------------------------------------------------
    auto* cmd_pre = app.add_subcommand("preprocess", "CLAHE then [0,1] normalization");
    std::string pre_in, pre_out;
    ctseg::ClaheParams clahe;
    int resize_to = 0;
    bool skip_clahe = false;
    cmd_pre->add_option("--in", pre_in, "Input volume")->required();
    cmd_pre->add_option("--out", pre_out, "Output volume stem")->required();
    cmd_pre->add_option("--clip", clahe.clip_limit, "CLAHE clip limit")->default_val(2.0);
    cmd_pre->add_option("--tiles", clahe.tiles_y, "CLAHE tile grid (square)")->default_val(8);
    cmd_pre->add_option("--bins", clahe.bins, "CLAHE histogram bins")->default_val(256);
    cmd_pre->add_option("--resize", resize_to, "Resize axial slices to NxN (0 = keep)")
        ->default_val(0);
    cmd_pre->add_flag("--no-clahe", skip_clahe, "Skip equalization, only normalize");

    // --- forward ---------------------------------------------------------
    auto* cmd_forward = app.add_subcommand("forward", "Run the attention encoder-decoder");
    std::string fw_in, fw_out, fw_params_in, fw_params_out, fw_attention = "sk";
    ctseg::ModelConfig model_cfg;
    bool fw_ds = false;
    cmd_forward->add_option("--in", fw_in, "Input intensity volume")->required();
    cmd_forward->add_option("--out", fw_out, "Output stem for probability maps")->required();
    cmd_forward->add_option("--attention", fw_attention,
                            "Attention variant: none|se|sk|cbam|gate|polar|danet");
    cmd_forward->add_option("--base", model_cfg.base_channels, "Base channel width")
        ->default_val(8);
    cmd_forward->add_option("--seed", model_cfg.seed, "Weight init seed")->default_val(0);
    cmd_forward->add_flag("--ds", fw_ds, "Write deep-supervision auxiliary maps");
    cmd_forward->add_option("--params", fw_params_in, "Load weights from a .ctparams file");
    cmd_forward->add_option("--save-params", fw_params_out, "Write the weights used");

    // --- loss ------------------------------------------------------------
    auto* cmd_loss = app.add_subcommand("loss", "Weighted dice loss of a prediction");
    std::string loss_pred, loss_ref;
    ctseg::LossConfig loss_cfg;
    cmd_loss->add_option("--pred", loss_pred, "Probability volume")->required();
    cmd_loss->add_option("--ref", loss_ref, "Label volume")->required();
    cmd_loss->add_option("--w1", loss_cfg.w1, "Foreground weight")->default_val(0.1);
    cmd_loss->add_option("--w2", loss_cfg.w2, "Background weight")->default_val(0.9);
    cmd_loss->add_option("--epsilon", loss_cfg.epsilon, "Stabilizer")->default_val(1e-6);

    // --- evaluate --------------------------------------------------------
    auto* cmd_eval = app.add_subcommand("evaluate", "Nine-metric case evaluation");
    std::string ev_pred, ev_ref, ev_out, ev_format = "json", ev_case = "case";
    SharedEvalFlags ev;
    cmd_eval->add_option("--pred", ev_pred, "Predicted volume (probability or label)")->required();
    cmd_eval->add_option("--ref", ev_ref, "Reference label volume")->required();
    cmd_eval->add_option("--out", ev_out, "Report file (stdout when omitted)");
    cmd_eval->add_option("--format", ev_format, "json or csv")->default_val("json");
    cmd_eval->add_option("--case-id", ev_case, "Case identifier")->default_val("case");
    add_eval_flags(cmd_eval, ev);

    // --- report ----------------------------------------------------------
    auto* cmd_report = app.add_subcommand("report", "Aggregate case reports into one table");
    std::vector<std::string> rp_inputs;
    std::string rp_out, rp_format = "csv";
    cmd_report->add_option("--out", rp_out, "Output table (stdout when omitted)");
    cmd_report->add_option("--format", rp_format, "json or csv")->default_val("csv");
    cmd_report->add_option("inputs", rp_inputs, "Per-case JSON report files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_phantom) {
            spec.dims = {ph_dims[0], ph_dims[1], ph_dims[2]};
            spec.spacing = {ph_spacing[0], ph_spacing[1], ph_spacing[2]};
            auto [intensity, label] = ctseg::generate_phantom(spec);
            ctseg::write_volume(intensity, ph_out + "_image.ctvol");
            ctseg::write_volume(label, ph_out + "_label.ctvol");
            std::cout << "wrote " << ph_out << "_image.ctvol and " << ph_out << "_label.ctvol\n";
            return kExitOk;
        }

        if (*cmd_pre) {
            ctseg::Volume v = load_any_volume(pre_in, nullptr);
            clahe.tiles_x = clahe.tiles_y;
            if (!skip_clahe) v = ctseg::clahe_volume(v, clahe);
            v = ctseg::normalize_volume(v);
            if (resize_to > 0) v = ctseg::resize_axial(v, resize_to, resize_to);
            ctseg::WriteOptions opts;
            opts.meta["preprocess"] = skip_clahe ? "normalize" : "clahe,normalize";
            if (resize_to > 0) opts.meta["preprocess"] += ",resize" + std::to_string(resize_to);
            ctseg::write_volume(v, pre_out, ctseg::VoxelDtype::F32, opts);
            std::cout << "wrote " << pre_out << "\n";
            return kExitOk;
        }

        if (*cmd_forward) {
            model_cfg.attention = ctseg::attention_kind_from_string(fw_attention);
            model_cfg.ds_heads = fw_ds;
            ctseg::Volume v = load_any_volume(fw_in, nullptr);

            ctseg::ModelParams params;
            if (!fw_params_in.empty()) {
                auto [loaded, loaded_cfg] = ctseg::read_model_params(fw_params_in);
                loaded_cfg.ds_heads = fw_ds;
                model_cfg = loaded_cfg;
                params = std::move(loaded);
            } else {
                params = ctseg::init_model_params(model_cfg);
            }
            if (!fw_params_out.empty()) ctseg::write_model_params(params, model_cfg, fw_params_out);

            ctseg::ModelOutput out = ctseg::model_forward(volume_to_tensor(v), model_cfg, params);
            ctseg::WriteOptions opts;
            opts.meta["attention"] = ctseg::to_string(model_cfg.attention);
            opts.meta["seed"] = std::to_string(model_cfg.seed);
            ctseg::write_volume(tensor_to_probability(out.main, v.spacing), fw_out,
                                ctseg::VoxelDtype::F32, opts);
            for (std::size_t i = 0; i < out.aux.size(); ++i)
                ctseg::write_volume(tensor_to_probability(out.aux[i], v.spacing),
                                    fw_out + "_aux" + std::to_string(i), ctseg::VoxelDtype::F32,
                                    opts);
            std::cout << "wrote " << fw_out << " (attention=" << ctseg::to_string(model_cfg.attention)
                      << ", aux maps: " << out.aux.size() << ")\n";
            return kExitOk;
        }

        if (*cmd_loss) {
            ctseg::Volume pred = coerce_probability(load_any_volume(loss_pred, nullptr));
            ctseg::Volume ref = coerce_label(load_any_volume(loss_ref, nullptr));
            ctseg::LossValue lv = ctseg::weighted_dice_loss(pred, ref, loss_cfg);
            std::cout << "{\"total\": " << fmt(lv.total, 9) << ", \"fg_dice\": " << fmt(lv.fg_dice, 9)
                      << ", \"bg_dice\": " << fmt(lv.bg_dice, 9) << ", \"w1\": " << fmt(loss_cfg.w1, 4)
                      << ", \"w2\": " << fmt(loss_cfg.w2, 4)
                      << ", \"epsilon\": " << loss_cfg.epsilon << "}\n";
            return kExitOk;
        }

        if (*cmd_eval) {
            check_weights(ev);
            std::map<std::string, std::string> pred_meta;
            ctseg::Volume pred = coerce_probability(load_any_volume(ev_pred, &pred_meta));
            ctseg::Volume ref = coerce_label(load_any_volume(ev_ref, nullptr));

            ctseg::EvalConfig cfg;
            cfg.threshold = ev.threshold;
            cfg.theta_mm = ev.theta_mm;
            cfg.w1 = ev.w1;
            cfg.w2 = ev.w2;
            cfg.path = ev.oracle ? ctseg::DistancePath::Exhaustive : ctseg::DistancePath::Auto;
            cfg.hd_literal_sum = ev.hd_literal_sum;

            ctseg::CaseReport report = ctseg::evaluate_case(pred, ref, cfg, ev_case);
            if (auto it = pred_meta.find("attention"); it != pred_meta.end())
                report.attention = it->second;

            std::string text = ev_format == "csv" ? ctseg::format_report_csv({report})
                                                  : ctseg::format_report_json({report});
            if (ev_out.empty())
                std::cout << text;
            else
                ctseg::write_report({report}, ev_out,
                                    ctseg::report_format_from_string(ev_format));
            if (ev.strict && report_has_undefined(report)) {
                std::cerr << "undefined metrics present (strict mode)\n";
                return kExitUndefinedMetric;
            }
            return kExitOk;
        }

        if (*cmd_report) {
            std::vector<ctseg::CaseReport> cases;
            for (const std::string& path : rp_inputs) {
                std::vector<ctseg::CaseReport> in = ctseg::read_report_json(path);
                cases.insert(cases.end(), in.begin(), in.end());
            }
            std::sort(cases.begin(), cases.end(),
                      [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
            std::string text = rp_format == "json" ? ctseg::format_report_json(cases)
                                                   : ctseg::format_report_csv(cases);
            if (rp_out.empty())
                std::cout << text;
            else
                ctseg::write_report(cases, rp_out, ctseg::report_format_from_string(rp_format));
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
