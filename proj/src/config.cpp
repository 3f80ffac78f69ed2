#include "metapinn/config.hpp"

#include "metapinn/csvio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace metapinn {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

const std::map<std::string, std::vector<std::string>>& schema() {
    static const std::map<std::string, std::vector<std::string>> s{
        {"model",
         {"drug", "route", "dose_mg", "infusion_h", "horizon_h",
          "mask_enzyme"}},
        {"grid", {"n_points"}},
        {"net", {"width", "w0", "seed", "gamma"}},
        {"clusters", {"k"}},
        {"weights", {"lambda_ode", "lambda_ic", "lambda_data", "ridge_rel"}},
        {"stage1",
         {"n_tasks", "n_iters", "task_range_factor", "lr", "grad_mode",
          "early_nmse", "lr_decay_frac", "lr_decay"}},
        {"stage2",
         {"n_iters", "lr", "bounds_factor", "prior_weight", "init_factor",
          "mode"}},
        {"obs", {"n_points", "sigma", "seed", "t_first", "times"}},
        {"baseline", {"n_iters", "bounds_factor", "init_factor"}},
        {"report", {"param_tol", "term_tol", "pi_tol"}},
        {"discovery", {"y_floor"}},
        {"paths", {"output_dir"}},
    };
    return s;
}

[[noreturn]] void unknown(const std::string& what, const std::string& got,
                          const std::vector<std::string>& valid) {
    std::ostringstream os;
    os << "unknown " << what << " '" << got << "'; valid: ";
    for (size_t i = 0; i < valid.size(); ++i)
        os << (i ? ", " : "") << valid[i];
    throw ValidationError(os.str());
}

double to_double(const std::string& k, const std::string& v) {
    try {
        size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("key '" + k + "': not a number: '" + v + "'");
    }
}

long to_long(const std::string& k, const std::string& v) {
    try {
        size_t pos;
        long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("key '" + k + "': not an integer: '" + v +
                              "'");
    }
}

std::vector<double> to_list(const std::string& k, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ValidationError("key '" + k + "': empty list entry");
        out.push_back(to_double(k, item));
    }
    if (out.empty()) throw ValidationError("key '" + k + "': empty list");
    return out;
}

void apply(RunConfig& c, const std::string& sec, const std::string& key,
           const std::string& val) {
    auto it = schema().find(sec);
    if (it == schema().end()) {
        std::vector<std::string> names;
        for (const auto& [n, _] : schema()) names.push_back(n);
        unknown("section", sec, names);
    }
    const auto& keys = it->second;
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        unknown("key in [" + sec + "]", key, keys);

    std::string full = sec + "." + key;
    if (sec == "model") {
        if (key == "drug")
            c.drug = val;
        else if (key == "route") {
            if (val == "iv")
                c.route = Route::IV;
            else if (val == "oral")
                c.route = Route::Oral;
            else
                unknown("route", val, {"iv", "oral"});
        } else if (key == "dose_mg")
            c.dose_mg = to_double(full, val);
        else if (key == "infusion_h")
            c.infusion_h = to_double(full, val);
        else if (key == "horizon_h")
            c.horizon_h = to_double(full, val);
        else
            c.mask_enzyme = int(to_long(full, val));
    } else if (sec == "grid") {
        c.grid_n = int(to_long(full, val));
    } else if (sec == "net") {
        if (key == "width")
            c.width = int(to_long(full, val));
        else if (key == "w0")
            c.w0 = to_list(full, val);
        else if (key == "seed")
            c.seed = uint64_t(to_long(full, val));
        else
            c.gamma = to_double(full, val);
    } else if (sec == "clusters") {
        c.k = int(to_long(full, val));
    } else if (sec == "weights") {
        if (key == "lambda_ode")
            c.weights.lam_ode = to_double(full, val);
        else if (key == "lambda_ic")
            c.weights.lam_ic = to_double(full, val);
        else if (key == "lambda_data")
            c.weights.lam_data = to_double(full, val);
        else
            c.weights.ridge_rel = to_double(full, val);
    } else if (sec == "stage1") {
        if (key == "n_tasks")
            c.s1_n_tasks = int(to_long(full, val));
        else if (key == "n_iters")
            c.s1_n_iters = int(to_long(full, val));
        else if (key == "task_range_factor")
            c.s1_range_factor = to_double(full, val);
        else if (key == "lr")
            c.s1_lr = to_double(full, val);
        else if (key == "grad_mode") {
            if (val == "implicit")
                c.s1_grad_mode = GradMode::Implicit;
            else if (val == "frozen")
                c.s1_grad_mode = GradMode::Frozen;
            else
                unknown("grad_mode", val, {"implicit", "frozen"});
        } else if (key == "early_nmse")
            c.s1_early_nmse = to_double(full, val);
        else if (key == "lr_decay_frac")
            c.s1_lr_decay_frac = to_double(full, val);
        else
            c.s1_lr_decay = to_double(full, val);
    } else if (sec == "stage2") {
        if (key == "n_iters")
            c.s2_n_iters = int(to_long(full, val));
        else if (key == "lr")
            c.s2_lr = to_double(full, val);
        else if (key == "bounds_factor")
            c.s2_bounds_factor = to_double(full, val);
        else if (key == "prior_weight")
            c.s2_prior_weight = to_double(full, val);
        else if (key == "init_factor")
            c.s2_init_factor = to_double(full, val);
        else {
            if (val == "params")
                c.mode = MaskKind::Parameter;
            else if (val == "term")
                c.mode = MaskKind::Term;
            else
                unknown("mode", val, {"params", "term"});
        }
    } else if (sec == "obs") {
        if (key == "n_points")
            c.obs_n = int(to_long(full, val));
        else if (key == "sigma")
            c.obs_sigma = to_double(full, val);
        else if (key == "seed")
            c.obs_seed = uint64_t(to_long(full, val));
        else if (key == "t_first")
            c.obs_t_first = to_double(full, val);
        else
            c.obs_times = to_list(full, val);
    } else if (sec == "baseline") {
        if (key == "n_iters")
            c.bl_n_iters = int(to_long(full, val));
        else if (key == "bounds_factor")
            c.bl_bounds_factor = to_double(full, val);
        else
            c.bl_init_factor = to_double(full, val);
    } else if (sec == "report") {
        if (key == "param_tol")
            c.param_tol = to_double(full, val);
        else if (key == "term_tol")
            c.term_tol = to_double(full, val);
        else
            c.pi_tol = to_double(full, val);
    } else if (sec == "discovery") {
        c.y_floor = to_double(full, val);
    } else {
        c.output_dir = val;
    }
}

void validate(const RunConfig& c) {
    if (c.dose_mg <= 0) throw ValidationError("model.dose_mg must be > 0");
    if (c.horizon_h <= 0)
        throw ValidationError("model.horizon_h must be > 0");
    if (c.grid_n < 3) throw ValidationError("grid.n_points must be >= 3");
    if (c.width < 2) throw ValidationError("net.width must be >= 2");
    for (double v : c.w0)
        if (v <= 0) throw ValidationError("net.w0 entries must be > 0");
    if (c.gamma <= 0) throw ValidationError("net.gamma must be > 0");
    if (c.k < 0) throw ValidationError("clusters.k must be >= 0");
    if (c.weights.lam_ode <= 0 || c.weights.lam_ic < 0 ||
        c.weights.lam_data < 0 || c.weights.ridge_rel < 0)
        throw ValidationError("weights must be nonnegative, lambda_ode > 0");
    if (c.s1_n_tasks < 1) throw ValidationError("stage1.n_tasks must be >= 1");
    if (c.s1_n_iters < 1) throw ValidationError("stage1.n_iters must be >= 1");
    if (c.s1_range_factor < 1)
        throw ValidationError("stage1.task_range_factor must be >= 1");
    if (c.s1_lr <= 0) throw ValidationError("stage1.lr must be > 0");
    if (c.s2_n_iters < 1) throw ValidationError("stage2.n_iters must be >= 1");
    if (c.s2_lr <= 0) throw ValidationError("stage2.lr must be > 0");
    if (c.s2_bounds_factor < 1 || c.bl_bounds_factor < 1)
        throw ValidationError("bounds_factor must be >= 1");
    if (c.s2_init_factor <= 0 || c.bl_init_factor <= 0)
        throw ValidationError("init_factor must be > 0");
    if (c.obs_times.empty()) {
        if (c.obs_n < 1) throw ValidationError("obs.n_points must be >= 1");
        if (c.obs_t_first <= 0 || c.obs_t_first > c.horizon_h)
            throw ValidationError("obs.t_first must be in (0, horizon]");
    } else {
        for (double t : c.obs_times)
            if (t < 0 || t > c.horizon_h)
                throw ValidationError("obs.times must lie in [0, horizon]");
        for (size_t i = 1; i < c.obs_times.size(); ++i)
            if (c.obs_times[i] <= c.obs_times[i - 1])
                throw ValidationError("obs.times must be increasing");
    }
    if (c.obs_sigma < 0) throw ValidationError("obs.sigma must be >= 0");
    if (c.y_floor < 0 || c.y_floor >= 1)
        throw ValidationError("discovery.y_floor must be in [0, 1)");
    if (c.param_tol <= 0 || c.term_tol <= 0 || c.pi_tol <= 0)
        throw ValidationError("report tolerances must be > 0");
    if (c.output_dir.empty())
        throw ValidationError("paths.output_dir must not be empty");
}

std::string list_text(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
    }
    return s;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line, sec;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t h = line.find_first_of("#;");
        if (h != std::string::npos) line = line.substr(0, h);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": malformed section header");
            sec = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("line " + std::to_string(lineno) +
                                  ": expected key=value");
        if (sec.empty())
            throw ValidationError("line " + std::to_string(lineno) +
                                  ": key outside any section");
        apply(c, sec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_text(const RunConfig& c) {
    std::ostringstream os;
    os << "[model]\n";
    os << "drug = " << c.drug << "\n";
    os << "route = " << (c.route == Route::IV ? "iv" : "oral") << "\n";
    os << "dose_mg = " << format_double(c.dose_mg) << "\n";
    os << "infusion_h = " << format_double(c.infusion_h) << "\n";
    os << "horizon_h = " << format_double(c.horizon_h) << "\n";
    os << "mask_enzyme = " << c.mask_enzyme << "\n";
    os << "\n[grid]\n";
    os << "n_points = " << c.grid_n << "\n";
    os << "\n[net]\n";
    os << "width = " << c.width << "\n";
    os << "w0 = " << list_text(c.w0) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "gamma = " << format_double(c.gamma) << "\n";
    os << "\n[clusters]\n";
    os << "k = " << c.k << "\n";
    os << "\n[weights]\n";
    os << "lambda_ode = " << format_double(c.weights.lam_ode) << "\n";
    os << "lambda_ic = " << format_double(c.weights.lam_ic) << "\n";
    os << "lambda_data = " << format_double(c.weights.lam_data) << "\n";
    os << "ridge_rel = " << format_double(c.weights.ridge_rel) << "\n";
    os << "\n[stage1]\n";
    os << "n_tasks = " << c.s1_n_tasks << "\n";
    os << "n_iters = " << c.s1_n_iters << "\n";
    os << "task_range_factor = " << format_double(c.s1_range_factor) << "\n";
    os << "lr = " << format_double(c.s1_lr) << "\n";
    os << "grad_mode = "
       << (c.s1_grad_mode == GradMode::Implicit ? "implicit" : "frozen")
       << "\n";
    os << "early_nmse = " << format_double(c.s1_early_nmse) << "\n";
    os << "lr_decay_frac = " << format_double(c.s1_lr_decay_frac) << "\n";
    os << "lr_decay = " << format_double(c.s1_lr_decay) << "\n";
    os << "\n[stage2]\n";
    os << "n_iters = " << c.s2_n_iters << "\n";
    os << "lr = " << format_double(c.s2_lr) << "\n";
    os << "bounds_factor = " << format_double(c.s2_bounds_factor) << "\n";
    os << "prior_weight = " << format_double(c.s2_prior_weight) << "\n";
    os << "init_factor = " << format_double(c.s2_init_factor) << "\n";
    os << "mode = " << (c.mode == MaskKind::Term ? "term" : "params") << "\n";
    os << "\n[obs]\n";
    os << "n_points = " << c.obs_n << "\n";
    os << "sigma = " << format_double(c.obs_sigma) << "\n";
    os << "seed = " << c.obs_seed << "\n";
    os << "t_first = " << format_double(c.obs_t_first) << "\n";
    if (!c.obs_times.empty())
        os << "times = " << list_text(c.obs_times) << "\n";
    os << "\n[baseline]\n";
    os << "n_iters = " << c.bl_n_iters << "\n";
    os << "bounds_factor = " << format_double(c.bl_bounds_factor) << "\n";
    os << "init_factor = " << format_double(c.bl_init_factor) << "\n";
    os << "\n[report]\n";
    os << "param_tol = " << format_double(c.param_tol) << "\n";
    os << "term_tol = " << format_double(c.term_tol) << "\n";
    os << "pi_tol = " << format_double(c.pi_tol) << "\n";
    os << "\n[discovery]\n";
    os << "y_floor = " << format_double(c.y_floor) << "\n";
    os << "\n[paths]\n";
    os << "output_dir = " << c.output_dir << "\n";
    return os.str();
}

void write_config(const RunConfig& cfg, const std::string& path) {
    write_text(config_text(cfg), path);
}

int cluster_count(const RunConfig& cfg) {
    if (cfg.k > 0) return cfg.k;
    return cfg.route == Route::IV ? 2 : 3;
}

int masked_enzyme_slot(const RunConfig& cfg) {
    if (cfg.mask_enzyme >= 0) return cfg.mask_enzyme;
    return 2;  // CYP1A2 (DMU) for theophylline, UGT2B15 for paracetamol
}

VectorXd observation_times(const RunConfig& cfg) {
    if (!cfg.obs_times.empty()) {
        VectorXd t(cfg.obs_times.size());
        for (size_t i = 0; i < cfg.obs_times.size(); ++i)
            t[int(i)] = cfg.obs_times[i];
        return t;
    }
    // Geometric schedule: early curvature gets dense coverage, the tail
    // stays sampled.
    VectorXd t(cfg.obs_n);
    if (cfg.obs_n == 1) {
        t[0] = cfg.horizon_h;
        return t;
    }
    double l0 = std::log(cfg.obs_t_first), l1 = std::log(cfg.horizon_h);
    for (int i = 0; i < cfg.obs_n; ++i)
        t[i] = std::exp(l0 + (l1 - l0) * i / (cfg.obs_n - 1));
    t[cfg.obs_n - 1] = cfg.horizon_h;
    return t;
}

DoseSchedule dose_schedule(const RunConfig& cfg) {
    DoseSchedule d;
    d.route = cfg.route;
    d.dose_mg = cfg.dose_mg;
    d.infusion_h = cfg.route == Route::IV ? cfg.infusion_h : 0.0;
    return d;
}

}  // namespace metapinn
