#include "gex/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gex/deform.hpp"
#include "gex/estimate.hpp"
#include "gex/fit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gex {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot read file for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json config_to_json(const PipelineConfig& c) {
    json runs = json::array();
    for (const auto& r : c.runs) runs.push_back({{"path", r.path}, {"run_id", r.run_id}});
    return json{{"runs", runs},
                {"tau", c.tau},
                {"u_chi", c.u_chi},
                {"quantile_level", c.quantile_level},
                {"m_sim", c.m_sim},
                {"block_len", c.block_len},
                {"seed", c.seed},
                {"out_dir", c.out_dir},
                {"deform", c.do_deform},
                {"preprocess", c.do_preprocess},
                {"export_cloud", c.export_cloud},
                {"harmonics", c.harmonics},
                {"lags", c.lags},
                {"threads", c.threads},
                {"sim_k", c.sim_k},
                {"k_grid", {{"lo", c.k_grid.lo}, {"hi", c.k_grid.hi}, {"step", c.k_grid.step}}},
                {"bootstrap",
                 {{"reps", c.bootstrap.reps},
                  {"m_sim", c.bootstrap.m_sim},
                  {"level", c.bootstrap.level}}},
                {"ctq",
                 {{"q1", c.ctq.q1},
                  {"q2", c.ctq.q2},
                  {"q3", c.ctq.q3},
                  {"m2", c.ctq.m2},
                  {"m3", c.ctq.m3},
                  {"run3", c.ctq.run3}}},
                {"diagnostics",
                 {{"reps", c.diag.reps},
                  {"chi_m_sim", c.diag.chi_m_sim},
                  {"chi_bins", c.diag.chi_bins}}}};
}

json read_json(const std::string& path, const char* needed_by, const char* producer) {
    if (!fs::exists(path)) {
        if (producer)
            throw dependency_error(std::string(needed_by) + " requires the artifact " + path +
                                   "; run the `" + producer + "` stage first");
        throw validation_error(std::string("missing file: ") + path);
    }
    std::ifstream in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw validation_error("corrupt artifact " + path + ": " + e.what());
    }
    return j;
}

void write_json_artifact(const std::string& path, json j, const std::string& stage_hash,
                         const std::string& config_hash) {
    j["stage_hash"] = stage_hash;
    j["config_hash"] = config_hash;
    std::ofstream out(path);
    if (!out) throw validation_error("cannot open artifact for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw validation_error("failed writing artifact: " + path);
}

std::vector<Eigen::Vector2d> coords_from_json(const json& arr) {
    std::vector<Eigen::Vector2d> coords;
    for (const auto& p : arr) coords.emplace_back(p[0].get<double>(), p[1].get<double>());
    return coords;
}

json coords_to_json(const std::vector<Eigen::Vector2d>& coords) {
    json arr = json::array();
    for (const auto& c : coords) arr.push_back({c.x(), c.y()});
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i];
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    const json j = read_json(path, "load_config", nullptr);
    PipelineConfig c;
    try {
        if (!j.contains("runs") || !j["runs"].is_array() || j["runs"].empty())
            throw validation_error("config: `runs` must be a nonempty array");
        for (const auto& r : j["runs"]) {
            RunInput in;
            in.path = r.at("path").get<std::string>();
            in.run_id = r.value("run_id", static_cast<int>(c.runs.size()) + 1);
            c.runs.push_back(in);
        }
        c.tau = j.value("tau", c.tau);
        c.u_chi = j.value("u_chi", c.u_chi);
        c.quantile_level = j.value("quantile_level", c.quantile_level);
        c.m_sim = j.value("m_sim", c.m_sim);
        c.block_len = j.value("block_len", c.block_len);
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.do_deform = j.value("deform", c.do_deform);
        c.do_preprocess = j.value("preprocess", c.do_preprocess);
        c.export_cloud = j.value("export_cloud", c.export_cloud);
        c.harmonics = j.value("harmonics", c.harmonics);
        c.lags = j.value("lags", c.lags);
        c.threads = j.value("threads", c.threads);
        c.sim_k = j.value("sim_k", c.sim_k);
        if (j.contains("k_grid")) {
            c.k_grid.lo = j["k_grid"].value("lo", c.k_grid.lo);
            c.k_grid.hi = j["k_grid"].value("hi", c.k_grid.hi);
            c.k_grid.step = j["k_grid"].value("step", c.k_grid.step);
        }
        if (j.contains("bootstrap")) {
            c.bootstrap.reps = j["bootstrap"].value("reps", c.bootstrap.reps);
            c.bootstrap.m_sim = j["bootstrap"].value("m_sim", c.bootstrap.m_sim);
            c.bootstrap.level = j["bootstrap"].value("level", c.bootstrap.level);
        }
        if (j.contains("ctq")) {
            c.ctq.q1 = j["ctq"].value("q1", c.ctq.q1);
            c.ctq.q2 = j["ctq"].value("q2", c.ctq.q2);
            c.ctq.q3 = j["ctq"].value("q3", c.ctq.q3);
            c.ctq.m2 = j["ctq"].value("m2", c.ctq.m2);
            c.ctq.m3 = j["ctq"].value("m3", c.ctq.m3);
            c.ctq.run3 = j["ctq"].value("run3", c.ctq.run3);
        }
        if (j.contains("diagnostics")) {
            c.diag.reps = j["diagnostics"].value("reps", c.diag.reps);
            c.diag.chi_m_sim = j["diagnostics"].value("chi_m_sim", c.diag.chi_m_sim);
            c.diag.chi_bins = j["diagnostics"].value("chi_bins", c.diag.chi_bins);
        }
    } catch (const json::exception& e) {
        throw validation_error(std::string("config: ") + e.what());
    }
    validate_config(c);
    return c;
}

void validate_config(const PipelineConfig& c) {
    if (c.runs.empty()) throw validation_error("config: no input runs");
    for (const auto& r : c.runs)
        if (!fs::exists(r.path)) throw validation_error("config: input does not exist: " + r.path);
    if (!(c.tau > 0.0 && c.tau < 1.0)) throw validation_error("config: tau must lie in (0,1)");
    if (!(c.u_chi > 0.0 && c.u_chi < 1.0))
        throw validation_error("config: u_chi must lie in (0,1)");
    if (!(c.quantile_level > 0.0 && c.quantile_level < 1.0))
        throw validation_error("config: quantile_level must lie in (0,1)");
    if (c.m_sim < 10000) throw validation_error("config: m_sim must be >= 10^4");
    if (c.block_len < 1) throw validation_error("config: block_len must be >= 1");
    if (c.bootstrap.reps < 100) throw validation_error("config: bootstrap reps must be >= 100");
    if (c.bootstrap.m_sim < 1000)
        throw validation_error("config: bootstrap m_sim must be >= 1000");
    if (!(c.k_grid.lo >= 1.0 && c.k_grid.hi >= c.k_grid.lo && c.k_grid.step > 0.0))
        throw validation_error("config: malformed k grid");
    if (!(c.ctq.q1 > 0.0 && c.ctq.q2 > 0.0 && c.ctq.q3 > 0.0))
        throw validation_error("config: ctq thresholds must be positive");
    if (c.ctq.run3 < 1 || c.ctq.run3 > c.block_len)
        throw validation_error("config: ctq run length must lie in [1, block_len]");
    if (!(c.sim_k >= 1.0)) throw validation_error("config: sim_k must be >= 1");
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Preprocess: return "preprocess";
        case Stage::Margins: return "margins";
        case Stage::Deform: return "deform";
        case Stage::Fit: return "fit";
        case Stage::Diagnose: return "diagnose";
        case Stage::Simulate: return "simulate";
        case Stage::EstimateCtq: return "estimate-ctq";
        case Stage::Report: return "report";
    }
    return "?";
}

Stage parse_stage(const std::string& name) {
    for (Stage s : {Stage::Preprocess, Stage::Margins, Stage::Deform, Stage::Fit, Stage::Diagnose,
                    Stage::Simulate, Stage::EstimateCtq, Stage::Report})
        if (name == stage_name(s)) return s;
    throw validation_error("unknown stage: " + name);
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    config_hash_ = fnv1a_hex(config_to_json(cfg_).dump());
    fs::create_directories(cfg_.out_dir);
    for (std::size_t i = 0; i < cfg_.runs.size(); ++i) fs::create_directories(run_dir(i));
}

std::string Pipeline::run_dir(std::size_t run_index) const {
    return cfg_.out_dir + "/run" + std::to_string(cfg_.runs.at(run_index).run_id);
}

std::uint64_t Pipeline::stage_seed(Stage stage, int run_id) const {
    return Rng(cfg_.seed ^ (static_cast<std::uint64_t>(stage) + 1))
        .split(static_cast<std::uint64_t>(run_id))
        .seed();
}

std::string Pipeline::stage_hash(Stage stage, std::size_t run_index) const {
    std::vector<std::string> deps;
    const std::string dir = run_index < cfg_.runs.size() ? run_dir(run_index) : cfg_.out_dir;
    auto need = [&](const char* file, const char* producer) {
        const std::string path = dir + "/" + file;
        if (!fs::exists(path))
            throw dependency_error(std::string("stage `") + stage_name(stage) +
                                   "` requires the artifact " + path + "; run the `" + producer +
                                   "` stage first");
        deps.push_back(path);
    };
    switch (stage) {
        case Stage::Preprocess:
            deps.push_back(cfg_.runs.at(run_index).path);
            break;
        case Stage::Margins:
            deps.push_back(cfg_.runs.at(run_index).path);
            need("preprocess.json", "preprocess");
            break;
        case Stage::Deform:
            need("exp_data.csv", "margins");
            break;
        case Stage::Fit:
            need("exp_data.csv", "margins");
            need("deform.json", "deform");
            break;
        case Stage::Diagnose:
            need("exp_data.csv", "margins");
            need("deform.json", "deform");
            need("fit.json", "fit");
            break;
        case Stage::Simulate:
            need("exp_data.csv", "margins");
            need("deform.json", "deform");
            need("fit.json", "fit");
            break;
        case Stage::EstimateCtq:
            need("exp_data.csv", "margins");
            need("margins.json", "margins");
            need("deform.json", "deform");
            need("fit.json", "fit");
            break;
        case Stage::Report:
            for (std::size_t i = 0; i < cfg_.runs.size(); ++i) {
                const std::string rd = run_dir(i);
                for (const char* f : {"fit.json", "ctq.json"}) {
                    const std::string path = rd + "/" + f;
                    if (!fs::exists(path))
                        throw dependency_error(std::string("stage `report` requires ") + path +
                                               "; run the upstream stages first");
                    deps.push_back(path);
                }
            }
            break;
    }
    std::string material = std::string(stage_name(stage)) + "|" + config_hash_;
    for (const auto& d : deps) material += "|" + hash_file(d);
    return fnv1a_hex(material);
}

bool Pipeline::up_to_date(const std::string& artifact, const std::string& hash) const {
    if (!fs::exists(artifact)) return false;
    try {
        std::ifstream in(artifact);
        json j;
        in >> j;
        return j.value("stage_hash", "") == hash;
    } catch (...) {
        return false;
    }
}

StageResult Pipeline::run_stage(Stage stage, std::size_t run_index) {
    if (stage != Stage::Report && run_index >= cfg_.runs.size())
        throw validation_error("run index out of range");
    const std::string hash = stage_hash(stage, run_index);
    const std::string dir = stage == Stage::Report ? cfg_.out_dir : run_dir(run_index);
    std::string artifact;
    switch (stage) {
        case Stage::Preprocess: artifact = dir + "/preprocess.json"; break;
        case Stage::Margins: artifact = dir + "/margins.json"; break;
        case Stage::Deform: artifact = dir + "/deform.json"; break;
        case Stage::Fit: artifact = dir + "/fit.json"; break;
        case Stage::Diagnose: artifact = dir + "/diagnose.json"; break;
        case Stage::Simulate: artifact = dir + "/simulate.json"; break;
        case Stage::EstimateCtq: artifact = dir + "/ctq.json"; break;
        case Stage::Report: artifact = dir + "/report.json"; break;
    }
    if (up_to_date(artifact, hash)) return {true, artifact};
    switch (stage) {
        case Stage::Preprocess: do_preprocess(run_index, hash); break;
        case Stage::Margins: do_margins(run_index, hash); break;
        case Stage::Deform: do_deform(run_index, hash); break;
        case Stage::Fit: do_fit(run_index, hash); break;
        case Stage::Diagnose: do_diagnose(run_index, hash); break;
        case Stage::Simulate: do_simulate(run_index, hash); break;
        case Stage::EstimateCtq: do_estimate(run_index, hash); break;
        case Stage::Report: do_report(hash); break;
    }
    return {false, artifact};
}

std::string Pipeline::run_all() {
    for (std::size_t i = 0; i < cfg_.runs.size(); ++i) {
        for (Stage s : {Stage::Preprocess, Stage::Margins, Stage::Deform, Stage::Fit,
                        Stage::Diagnose, Stage::Simulate, Stage::EstimateCtq})
            run_stage(s, i);
    }
    run_stage(Stage::Report, 0);
    return cfg_.out_dir;
}

void Pipeline::do_preprocess(std::size_t run_index, const std::string& hash) {
    const RunInput& in = cfg_.runs[run_index];
    const GridDataset ds = load_dataset(in.path, in.run_id);
    validate_dataset(ds);
    json j{{"run_id", in.run_id},
           {"input_path", in.path},
           {"input_hash", hash_file(in.path)},
           {"n_times", ds.n_times()},
           {"n_sites", ds.n_sites()},
           {"first_day", ds.times.front()},
           {"last_day", ds.times.back()}};
    write_json_artifact(run_dir(run_index) + "/preprocess.json", std::move(j), hash, config_hash_);
}

void Pipeline::do_margins(std::size_t run_index, const std::string& hash) {
    const RunInput& in = cfg_.runs[run_index];
    const GridDataset ds = load_dataset(in.path, in.run_id);
    CovariateConfig cov;
    cov.harmonics = cfg_.harmonics;
    cov.lags = cfg_.lags;
    const MarginalModel model =
        fit_marginal_model(ds, cov, cfg_.quantile_level, cfg_.do_preprocess, cfg_.threads);
    const Eigen::MatrixXd exp_data = to_exponential_matrix(model);

    GridDataset exp_ds;
    exp_ds.run_id = in.run_id;
    exp_ds.sites = ds.sites;
    exp_ds.times = model.sites.front().cov.days;
    exp_ds.values = exp_data;
    const std::string dir = run_dir(run_index);
    save_dataset(exp_ds, dir + "/exp_data.csv");

    const int d = ds.n_sites();
    Eigen::VectorXd q1(d), q2(d), q3(d);
    int n_extrapolated = 0;
    for (int s = 0; s < d; ++s) {
        bool ex = false;
        q1[s] = leadbetter_to_exponential(cfg_.ctq.q1, s, model, &ex);
        n_extrapolated += ex;
        q2[s] = leadbetter_to_exponential(cfg_.ctq.q2, s, model, &ex);
        n_extrapolated += ex;
        q3[s] = leadbetter_to_exponential(cfg_.ctq.q3, s, model, &ex);
        n_extrapolated += ex;
    }

    json sites = json::array();
    for (const auto& site : model.sites) {
        sites.push_back({{"gpd_threshold", site.gpd.threshold},
                         {"gpd_xi", site.gpd.xi},
                         {"gpd_psi_coeffs", vector_to_json(site.gpd.psi_coeffs)},
                         {"gpd_n_exceed", site.gpd.n_exceed},
                         {"phi_u", site.phi_u},
                         {"ls_converged", site.ls.converged},
                         {"ls_degenerate", site.ls.degenerate},
                         {"mu_coeffs", vector_to_json(site.ls.mu_coeffs)},
                         {"log_sigma_coeffs", vector_to_json(site.ls.log_sigma_coeffs)}});
    }
    json j{{"run_id", in.run_id},
           {"n_usable", model.n_usable},
           {"preprocess", cfg_.do_preprocess},
           {"quantile_level", cfg_.quantile_level},
           {"q1_exp", vector_to_json(q1)},
           {"q2_exp", vector_to_json(q2)},
           {"q3_exp", vector_to_json(q3)},
           {"n_extrapolated_thresholds", n_extrapolated},
           {"sites", sites}};
    write_json_artifact(dir + "/margins.json", std::move(j), hash, config_hash_);
}

void Pipeline::do_deform(std::size_t run_index, const std::string& hash) {
    const std::string dir = run_dir(run_index);
    const GridDataset exp_ds = load_dataset(dir + "/exp_data.csv", cfg_.runs[run_index].run_id);
    const ChiMatrix chi = empirical_chi_matrix(exp_ds.values, cfg_.u_chi);

    json j{{"run_id", cfg_.runs[run_index].run_id}, {"u_chi", cfg_.u_chi}};
    json chi_rows = json::array();
    for (Eigen::Index r = 0; r < chi.chi.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < chi.chi.cols(); ++c) row.push_back(chi.chi(r, c));
        chi_rows.push_back(row);
    }
    j["chi"] = chi_rows;
    j["deformed"] = cfg_.do_deform;

    std::vector<Eigen::Vector2d> dplane = exp_ds.sites;
    if (cfg_.do_deform) {
        const auto anchors = default_anchor_indices(exp_ds.n_sites());
        DeformOptions opts;
        opts.seed = stage_seed(Stage::Deform, exp_ds.run_id);
        const Deformation def = fit_deformation(exp_ds.sites, chi, anchors, opts);
        dplane = apply_deformation(def, exp_ds.sites);
        j["anchors"] = anchors;
        j["br_rho"] = def.br_rho;
        j["br_alpha"] = def.br_alpha;
        j["objective"] = def.objective;
        j["identity_objective"] = def.identity_objective;
    }
    j["gplane"] = coords_to_json(exp_ds.sites);
    j["dplane"] = coords_to_json(dplane);
    write_json_artifact(dir + "/deform.json", std::move(j), hash, config_hash_);
}

namespace {

struct LoadedModel {
    GridDataset exp_ds;
    std::vector<Eigen::Vector2d> dplane;
    GaugeParams params;
};

LoadedModel load_model(const std::string& dir, int run_id, double tau) {
    GridDataset exp_ds = load_dataset(dir + "/exp_data.csv", run_id);
    const json def = read_json(dir + "/deform.json", "load_model", "deform");
    const json fit = read_json(dir + "/fit.json", "load_model", "fit");
    std::vector<Eigen::Vector2d> dplane = coords_from_json(def.at("dplane"));
    GaugeParams params(fit.at("lambda"), fit.at("phi"), fit.at("kappa"), fit.at("gamma"),
                       fit.at("c_tau"), tau, dplane);
    return {std::move(exp_ds), std::move(dplane), std::move(params)};
}

}  // namespace

void Pipeline::do_fit(std::size_t run_index, const std::string& hash) {
    const std::string dir = run_dir(run_index);
    const int run_id = cfg_.runs[run_index].run_id;
    const GridDataset exp_ds = load_dataset(dir + "/exp_data.csv", run_id);
    const json def = read_json(dir + "/deform.json", "fit", "deform");
    const std::vector<Eigen::Vector2d> dplane = coords_from_json(def.at("dplane"));

    FitOptions opts;
    opts.seed = stage_seed(Stage::Fit, run_id);
    const PairwiseFit stage1 = fit_pairwise(exp_ds.values, dplane, cfg_.tau, opts);
    const GaugeParams params1(1.0, stage1.phi, stage1.kappa, 2.0, stage1.c_tau, cfg_.tau, dplane);
    const ExceedanceSet exc1 = make_exceedance_set(exp_ds.values, params1);
    const FittedGeometricModel stage2 =
        fit_truncated_gamma(exc1, dplane, stage1, cfg_.tau, opts);
    const auto [final_model, exc] = finalize_model(exp_ds.values, stage2);

    json j{{"run_id", run_id},
           {"tau", cfg_.tau},
           {"stage1",
            {{"phi", stage1.phi},
             {"kappa", stage1.kappa},
             {"c_tau", stage1.c_tau},
             {"loglik", stage1.loglik},
             {"converged", stage1.converged},
             {"kappa_at_boundary", stage1.kappa_at_boundary}}},
           {"lambda", final_model.params.lambda()},
           {"phi", final_model.params.phi()},
           {"kappa", final_model.params.kappa()},
           {"gamma", final_model.params.gamma()},
           {"c_tau", final_model.params.c_tau()},
           {"loglik", final_model.loglik},
           {"iterations", final_model.iterations},
           {"simplex_spread", final_model.simplex_spread},
           {"converged", final_model.converged},
           {"n_exceed", exc.points.size()},
           {"n_total", exc.n_total},
           {"exceed_fraction",
            static_cast<double>(exc.points.size()) / static_cast<double>(exc.n_total)}};
    write_json_artifact(dir + "/fit.json", std::move(j), hash, config_hash_);
}

void Pipeline::do_diagnose(std::size_t run_index, const std::string& hash) {
    const std::string dir = run_dir(run_index);
    const int run_id = cfg_.runs[run_index].run_id;
    LoadedModel m = load_model(dir, run_id, cfg_.tau);
    const ExceedanceSet exc = make_exceedance_set(m.exp_ds.values, m.params);
    Rng rng(stage_seed(Stage::Diagnose, run_id));

    Rng pp_rng = rng.split(0), qq_rng = rng.split(1), chi_rng = rng.split(2);
    DiagnosticSeries pp = pp_points(exc, m.params, cfg_.diag.reps, pp_rng);
    pp.run_id = run_id;
    DiagnosticSeries qq = qq_points(exc, m.params, cfg_.diag.reps, qq_rng);
    qq.run_id = run_id;
    const Eigen::MatrixXd dists = pairwise_distances(m.dplane);
    DiagnosticSeries chi_m =
        model_chi(m.params, exc, cfg_.u_chi, dists, cfg_.diag.chi_m_sim, chi_rng);
    chi_m.run_id = run_id;
    const ChiMatrix chi_emp = empirical_chi_matrix(m.exp_ds.values, cfg_.u_chi);
    DiagnosticSeries chi_e = chi_series(chi_emp, dists);
    chi_e.run_id = run_id;

    save_series_csv(pp, dir + "/pp.csv");
    save_series_csv(qq, dir + "/qq.csv");
    save_series_csv(chi_m, dir + "/chi_model.csv");
    save_series_csv(chi_e, dir + "/chi_empirical.csv");
    save_series_csv(bin_chi(chi_m, cfg_.diag.chi_bins), dir + "/chi_model_binned.csv");
    save_series_csv(bin_chi(chi_e, cfg_.diag.chi_bins), dir + "/chi_empirical_binned.csv");

    auto frac_in_band = [](const DiagnosticSeries& s) {
        std::size_t in = 0;
        for (std::size_t i = 0; i < s.y.size(); ++i)
            if (s.y[i] >= s.band_lo[i] && s.y[i] <= s.band_hi[i]) ++in;
        return static_cast<double>(in) / static_cast<double>(s.y.size());
    };
    json j{{"run_id", run_id},
           {"n_exceed", exc.points.size()},
           {"pp_frac_in_band", frac_in_band(pp)},
           {"qq_frac_in_band", frac_in_band(qq)},
           {"u_chi", cfg_.u_chi},
           {"chi_m_sim", cfg_.diag.chi_m_sim}};
    write_json_artifact(dir + "/diagnose.json", std::move(j), hash, config_hash_);
}

void Pipeline::do_simulate(std::size_t run_index, const std::string& hash) {
    const std::string dir = run_dir(run_index);
    const int run_id = cfg_.runs[run_index].run_id;
    LoadedModel m = load_model(dir, run_id, cfg_.tau);
    const ExceedanceSet exc = make_exceedance_set(m.exp_ds.values, m.params);
    Rng rng(stage_seed(Stage::Simulate, run_id));

    const SimulatedCloud cloud = simulate_cloud(m.params, exc, cfg_.sim_k, cfg_.m_sim, rng);
    std::size_t exceed = 0;
    double mean_radius = 0.0;
    for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
        const Eigen::VectorXd z = cloud.points.row(i);
        const double r = z.sum();
        mean_radius += r;
        if (r > cfg_.sim_k * m.params.radial_threshold(z / r)) ++exceed;
    }
    mean_radius /= static_cast<double>(cloud.points.rows());

    if (cfg_.export_cloud) {
        GridDataset cloud_ds;
        cloud_ds.run_id = run_id;
        cloud_ds.sites = m.exp_ds.sites;
        cloud_ds.times.resize(cfg_.m_sim);
        for (std::size_t i = 0; i < cfg_.m_sim; ++i) cloud_ds.times[i] = static_cast<long>(i);
        cloud_ds.values = cloud.points;
        save_dataset(cloud_ds, dir + "/cloud.csv");
    }

    json j{{"run_id", run_id},
           {"k", cfg_.sim_k},
           {"m_sim", cfg_.m_sim},
           {"seed", cloud.seed},
           {"exceed_fraction",
            static_cast<double>(exceed) / static_cast<double>(cloud.points.rows())},
           {"mean_radius", mean_radius},
           {"exported_cloud", cfg_.export_cloud}};
    write_json_artifact(dir + "/simulate.json", std::move(j), hash, config_hash_);
}

void Pipeline::do_estimate(std::size_t run_index, const std::string& hash) {
    const std::string dir = run_dir(run_index);
    const int run_id = cfg_.runs[run_index].run_id;
    LoadedModel m = load_model(dir, run_id, cfg_.tau);
    const json margins = read_json(dir + "/margins.json", "estimate-ctq", "margins");
    const ExceedanceSet exc = make_exceedance_set(m.exp_ds.values, m.params);
    const Eigen::MatrixXd non_exc = non_exceedance_rows(m.exp_ds.values, m.params);
    const long n_usable = m.exp_ds.n_times();
    Rng rng(stage_seed(Stage::EstimateCtq, run_id));

    ExtremeSet b1{ExtremeSetKind::AllExceed, vector_from_json(margins.at("q1_exp")), 1, 1};
    ExtremeSet b2{ExtremeSetKind::AtLeastM, vector_from_json(margins.at("q2_exp")), cfg_.ctq.m2,
                  1};
    ExtremeSet b3{ExtremeSetKind::ConsecutiveRun, vector_from_json(margins.at("q3_exp")),
                  cfg_.ctq.m3, cfg_.ctq.run3};

    const double p1 =
        static_cast<double>(exc.points.size()) / static_cast<double>(exc.n_total);

    json ctqs = json::array();
    json table_rows = json::array();
    for (int which = 1; which <= 3; ++which) {
        const ExtremeSet& set = which == 1 ? b1 : which == 2 ? b2 : b3;
        Rng ctq_rng = rng.split(static_cast<std::uint64_t>(which));
        bool k_warning = false;
        const double k = select_k(non_exc, set, cfg_.k_grid, &k_warning);
        const long n_obs = which == 3 ? n_usable - 1 : n_usable;

        TailProbability point;
        BootstrapSummary boot;
        if (which == 3) {
            const auto blocks = enumerate_blocks(m.exp_ds.values, k, cfg_.block_len, m.params);
            Rng point_rng = ctq_rng.split(0);
            point = tail_probability_from_blocks(m.params, blocks, p1, set, k, cfg_.m_sim,
                                                 point_rng);
            Rng boot_rng = ctq_rng.split(1);
            boot = bootstrap_ci(
                [&](const std::vector<std::size_t>& idx, Rng& rep_rng) {
                    std::vector<AngularBlock> re(idx.size());
                    for (std::size_t i = 0; i < idx.size(); ++i) re[i] = blocks[idx[i]];
                    const TailProbability tp = tail_probability_from_blocks(
                        m.params, re, p1, set, k, cfg_.bootstrap.m_sim, rep_rng);
                    return ctq_frequency(tp.prob, n_obs);
                },
                blocks.size(), cfg_.bootstrap.reps, cfg_.bootstrap.level, boot_rng);
        } else {
            Rng point_rng = ctq_rng.split(0);
            point = tail_probability(m.params, exc, set, k, cfg_.m_sim, point_rng);
            Rng boot_rng = ctq_rng.split(1);
            boot = bootstrap_ci(
                [&](const std::vector<std::size_t>& idx, Rng& rep_rng) {
                    ExceedanceSet re;
                    re.d = exc.d;
                    re.n_total = exc.n_total;
                    re.points.reserve(idx.size());
                    re.thresholds.reserve(idx.size());
                    for (std::size_t i : idx) {
                        re.points.push_back(exc.points[i]);
                        re.thresholds.push_back(exc.thresholds[i]);
                    }
                    const TailProbability tp =
                        tail_probability(m.params, re, set, k, cfg_.bootstrap.m_sim, rep_rng);
                    return ctq_frequency(tp.prob, n_obs);
                },
                exc.points.size(), cfg_.bootstrap.reps, cfg_.bootstrap.level, boot_rng);
        }
        const double freq = ctq_frequency(point.prob, n_obs);
        ctqs.push_back({{"ctq", which},
                        {"kind", which == 1 ? "all-exceed" : which == 2 ? "at-least-m"
                                                                        : "consecutive-run"},
                        {"m", set.m},
                        {"run_len", set.run_len},
                        {"k_used", k},
                        {"k_warning", k_warning},
                        {"prob", point.prob},
                        {"frac_in_set", point.frac_in_set},
                        {"p_k_given_1", point.p_k_given_1},
                        {"p_rprime_gt_1", point.p_rprime_gt_1},
                        {"zero_hits_warning", point.zero_hits_warning},
                        {"point", freq},
                        {"n_obs", n_obs},
                        {"bootstrap",
                         {{"mean", boot.mean},
                          {"median", boot.median},
                          {"lo", boot.lo},
                          {"hi", boot.hi},
                          {"reps", cfg_.bootstrap.reps}}}});
    }
    json j{{"run_id", run_id}, {"seed", rng.seed()}, {"ctqs", ctqs}};
    write_json_artifact(dir + "/ctq.json", std::move(j), hash, config_hash_);
}

void Pipeline::do_report(const std::string& hash) {
    std::string table1 = "run_id,lambda,phi,kappa,gamma,c_tau\n";
    std::string table2 = "run_id,ctq,point,boot_mean,boot_median,ci_lo,ci_hi,k_used\n";
    json runs = json::array();
    for (std::size_t i = 0; i < cfg_.runs.size(); ++i) {
        const std::string dir = run_dir(i);
        const json fit = read_json(dir + "/fit.json", "report", "fit");
        const json ctq = read_json(dir + "/ctq.json", "report", "estimate-ctq");
        table1 += std::to_string(fit.at("run_id").get<int>()) + "," +
                  fmt17(fit.at("lambda")) + "," + fmt17(fit.at("phi")) + "," +
                  fmt17(fit.at("kappa")) + "," + fmt17(fit.at("gamma")) + "," +
                  fmt17(fit.at("c_tau")) + "\n";
        for (const auto& c : ctq.at("ctqs")) {
            const auto& b = c.at("bootstrap");
            table2 += std::to_string(ctq.at("run_id").get<int>()) + "," +
                      std::to_string(c.at("ctq").get<int>()) + "," + fmt17(c.at("point")) + "," +
                      fmt17(b.at("mean")) + "," + fmt17(b.at("median")) + "," +
                      fmt17(b.at("lo")) + "," + fmt17(b.at("hi")) + "," +
                      fmt17(c.at("k_used")) + "\n";
        }
        runs.push_back({{"run_id", fit.at("run_id")},
                        {"fit", {{"lambda", fit.at("lambda")},
                                 {"phi", fit.at("phi")},
                                 {"kappa", fit.at("kappa")},
                                 {"gamma", fit.at("gamma")}}},
                        {"ctqs", ctq.at("ctqs")}});
    }
    std::ofstream t1(cfg_.out_dir + "/table1.csv");
    t1 << table1;
    std::ofstream t2(cfg_.out_dir + "/table2.csv");
    t2 << table2;
    // cross-run empirical reference counts, shipped for comparison only
    json j{{"runs", runs},
           {"reference_counts", {{"ctq1", 0.24}, {"ctq2", 0.20}, {"ctq3", 0.24}}}};
    write_json_artifact(cfg_.out_dir + "/report.json", std::move(j), hash, config_hash_);
}

}  // namespace gex
