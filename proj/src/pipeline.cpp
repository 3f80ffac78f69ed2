#include "metapinn/pipeline.hpp"

#include "metapinn/baseline.hpp"
#include "metapinn/clustering.hpp"
#include "metapinn/csvio.hpp"
#include "metapinn/discovery.hpp"
#include "metapinn/solver.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace metapinn {

namespace {

std::string join(const std::string& dir, const std::string& name) {
    return dir + "/" + name;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ValidationError("cannot create output dir '" + dir +
                              "': " + ec.message());
}

void require_file(const std::string& path, const std::string& hint) {
    if (!std::filesystem::exists(path))
        throw ValidationError("missing " + path + "; " + hint);
}

// Stage wrapper: failures carry the stage name and what was already
// written, preserving the error class for the exit code.
template <class F>
void stage(const char* name, const std::vector<std::string>& artifacts,
           F&& f) {
    auto annotate = [&](const std::string& what) {
        std::ostringstream os;
        os << "stage '" << name << "' failed";
        if (!artifacts.empty()) {
            os << " (artifacts so far:";
            for (const auto& a : artifacts) os << " " << a;
            os << ")";
        }
        os << ": " << what;
        return os.str();
    };
    try {
        f();
    } catch (const ValidationError& e) {
        throw ValidationError(annotate(e.what()));
    } catch (const NumericError& e) {
        throw NumericError(annotate(e.what()));
    } catch (const std::exception& e) {
        throw NumericError(annotate(e.what()));
    }
}

double rel_err(double got, double truth) {
    return std::abs(got - truth) / std::abs(truth);
}

Stage1Config stage1_config(const RunConfig& cfg) {
    Stage1Config c;
    c.n_iters = cfg.s1_n_iters;
    c.lr = cfg.s1_lr;
    c.grad_mode = cfg.s1_grad_mode;
    c.early_nmse = cfg.s1_early_nmse;
    c.lr_decay_frac = cfg.s1_lr_decay_frac;
    c.lr_decay = cfg.s1_lr_decay;
    return c;
}

Stage2Config stage2_config(const RunConfig& cfg) {
    Stage2Config c;
    c.n_iters = cfg.s2_n_iters;
    c.lr = cfg.s2_lr;
    c.bounds_factor = cfg.s2_bounds_factor;
    c.prior_weight = cfg.s2_prior_weight;
    c.init_factor = cfg.s2_init_factor;
    c.aux_seed = seed_aux(cfg.seed);
    c.gamma = cfg.gamma;
    return c;
}

std::vector<int> read_labels(const PbpkModel& m, const std::string& dir) {
    std::string path = join(dir, "clusters.csv");
    require_file(path, "run the cluster or train command first");
    std::istringstream in(read_text(path));
    std::string line;
    std::getline(in, line);
    if (line != "state_index,state_name,cluster")
        throw ValidationError("clusters.csv: unexpected header");
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t a = line.find(','), b = line.rfind(',');
        if (a == std::string::npos || b <= a)
            throw ValidationError("clusters.csv: malformed row");
        int idx = std::stoi(line.substr(0, a));
        if (idx != int(labels.size()))
            throw ValidationError("clusters.csv: rows out of order");
        std::string name = line.substr(a + 1, b - a - 1);
        if (idx >= m.n_states || name != m.state_names[size_t(idx)])
            throw ValidationError("clusters.csv does not match the model");
        labels.push_back(std::stoi(line.substr(b + 1)));
    }
    if (int(labels.size()) != m.n_states)
        throw ValidationError("clusters.csv rows do not match the model");
    return labels;
}

void write_labels(const PbpkModel& m, const std::vector<int>& labels,
                  const std::string& path) {
    std::ostringstream out;
    out << "state_index,state_name,cluster\n";
    for (size_t s = 0; s < labels.size(); ++s)
        out << s << ',' << m.state_names[s] << ',' << labels[s] << '\n';
    write_text(path, out.str());
}

// Task references drive clustering; the term flavor integrates a
// parameter-style sibling so the swapped values act inside the rate law.
std::vector<MatrixXd> task_references(const RunConfig& cfg,
                                      const PbpkModel& m,
                                      const std::vector<TaskConfig>& tasks) {
    PbpkModel ref =
        m.mask.kind == MaskKind::Term
            ? build_model(m.drug.name, m.dose.route, m.dose,
                          MaskSpec{MaskKind::Parameter, m.mask.enzyme})
            : m;
    CollocationGrid grid = CollocationGrid::uniform(cfg.horizon_h, cfg.grid_n);
    VectorXd u0 = initial_state(ref);
    std::vector<MatrixXd> out;
    for (const auto& t : tasks) {
        RhsOverride ov;
        ov.vk = std::array<double, 2>{t.vmax, t.km};
        out.push_back(integrate(ref, u0, cfg.horizon_h, grid.all, ov).states);
    }
    return out;
}

void write_tasks(const std::vector<TaskConfig>& tasks,
                 const std::string& path) {
    MatrixXd v(int(tasks.size()), 3);
    for (size_t i = 0; i < tasks.size(); ++i)
        v.row(int(i)) << double(i), tasks[i].vmax, tasks[i].km;
    write_csv(path, {"task", "vmax", "km"}, v);
}

void write_matrix_csv(const MatrixXd& m, std::vector<std::string> header,
                      const std::string& path) {
    write_csv(path, header, m);
}

double nominal_nmse(const PbpkModel& m, const CollocationGrid& grid,
                    const std::vector<int>& labels, const Weights& w,
                    const std::vector<BranchNet>& nets,
                    const MatrixXd& ref) {
    auto fb = std::make_shared<FeatureBundle>(eval_bundle(nets, grid.all));
    OmegaSolution sol = lagged_fixed_point(m, grid, fb, labels, w);
    return max_state_nmse(sol.P, ref);
}

}  // namespace

void write_report(const std::vector<ReportRow>& rows,
                  const std::string& path) {
    std::string out = "name,value,threshold,pass\n";
    for (const auto& r : rows) {
        out += r.name;
        out += ",";
        out += format_double(r.value);
        out += ",";
        out += format_double(r.threshold);
        out += ",";
        out += r.pass ? "1" : "0";
        out += "\n";
    }
    write_text(out, path);
}

std::vector<ReportRow> read_report(const std::string& path) {
    std::string text = read_text(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "name,value,threshold,pass")
        throw ValidationError("bad report header in " + path);
    std::vector<ReportRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ReportRow r;
        std::string v, t, p;
        if (!std::getline(ss, r.name, ',') || !std::getline(ss, v, ',') ||
            !std::getline(ss, t, ',') || !std::getline(ss, p, ','))
            throw ValidationError("bad report row in " + path);
        r.value = std::stod(v);
        r.threshold = std::stod(t);
        r.pass = p == "1";
        rows.push_back(r);
    }
    return rows;
}

bool all_pass(const std::vector<ReportRow>& rows) {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return true;
}

PbpkModel masked_model(const RunConfig& cfg) {
    MaskSpec mask{cfg.mode, masked_enzyme_slot(cfg)};
    return build_model(cfg.drug, cfg.route, dose_schedule(cfg), mask);
}

std::vector<TaskConfig> task_set(const RunConfig& cfg, const PbpkModel& m) {
    const auto& e = m.drug.enzymes[m.mask.enzyme];
    std::vector<TaskConfig> tasks{{e.vmax, e.km}};  // task 0 is nominal
    if (cfg.s1_n_tasks > 1) {
        auto drawn = sample_tasks(e.vmax, e.km, cfg.s1_n_tasks - 1,
                                  cfg.s1_range_factor, seed_tasks(cfg.seed));
        tasks.insert(tasks.end(), drawn.begin(), drawn.end());
    }
    return tasks;
}

std::vector<int> compute_labels(const RunConfig& cfg, const PbpkModel& m,
                                const std::vector<TaskConfig>& tasks) {
    auto refs = task_references(cfg, m, tasks);
    return cluster_trajectories(refs, cluster_count(cfg));
}

std::vector<BranchNet> init_nets(const RunConfig& cfg, int k) {
    if (int(cfg.w0.size()) != 1 && int(cfg.w0.size()) != k)
        throw ValidationError(
            "net.w0 must list one value or one per cluster");
    std::vector<BranchNet> nets;
    for (int c = 0; c < k; ++c) {
        double w0 = cfg.w0[cfg.w0.size() == 1 ? 0 : c];
        nets.push_back(BranchNet::init(seed_net(cfg.seed) + uint64_t(c),
                                       cfg.width, w0, cfg.horizon_h));
    }
    return nets;
}

ObservationSet make_observations(const RunConfig& cfg, const PbpkModel& m) {
    VectorXd times = observation_times(cfg);
    Trajectory ref =
        integrate(m, initial_state(m), cfg.horizon_h, times);
    uint64_t seed = cfg.obs_seed ? cfg.obs_seed : seed_obs(cfg.seed);
    return sample_observations(ref, m.venous, times, cfg.obs_sigma, seed);
}

void run_simulate(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    stage("simulate", arts, [&] {
        PbpkModel m =
            build_model(cfg.drug, cfg.route, dose_schedule(cfg), {});
        CollocationGrid grid =
            CollocationGrid::uniform(cfg.horizon_h, cfg.grid_n);
        Trajectory tr =
            integrate(m, initial_state(m), cfg.horizon_h, grid.all);
        write_trajectory_csv(m, tr, join(dir, "trajectory.csv"));
        arts.push_back(join(dir, "trajectory.csv"));

        MatrixXd rep(tr.times.size(), 4);
        for (int i = 0; i < tr.times.size(); ++i) {
            double mass = total_mass(m, tr.states.row(i).transpose());
            double expect = m.dose.route == Route::IV
                                ? m.dose.dose_mg *
                                      std::min(1.0, m.dose.infusion_h > 0
                                                        ? tr.times[i] /
                                                              m.dose.infusion_h
                                                        : 1.0)
                                : m.dose.dose_mg;
            double rel = expect > 0 ? (mass - expect) / expect : mass;
            rep.row(i) << tr.times[i], mass, expect, rel;
        }
        write_matrix_csv(rep, {"time", "mass_mg", "expected_mg", "rel_error"},
                         join(dir, "mass_report.csv"));
        write_constants_csv(m, join(dir, "constants.csv"));
    });
}

void run_cluster(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    stage("cluster", arts, [&] {
        PbpkModel m = masked_model(cfg);
        auto tasks = task_set(cfg, m);
        auto labels = compute_labels(cfg, m, tasks);
        write_labels(m, labels, join(dir, "clusters.csv"));
    });
}

void run_train(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    stage("train", arts, [&] {
        PbpkModel m = masked_model(cfg);
        auto tasks = task_set(cfg, m);
        auto labels = compute_labels(cfg, m, tasks);
        write_labels(m, labels, join(dir, "clusters.csv"));
        arts.push_back(join(dir, "clusters.csv"));
        write_tasks(tasks, join(dir, "tasks.csv"));
        arts.push_back(join(dir, "tasks.csv"));

        CollocationGrid grid =
            CollocationGrid::uniform(cfg.horizon_h, cfg.grid_n);
        auto nets = init_nets(cfg, n_clusters(labels));
        Stage1Result r = stage1_meta_train(m, grid, labels, cfg.weights,
                                           std::move(nets), tasks,
                                           stage1_config(cfg));
        write_matrix_csv(
            r.log,
            {"iter", "task", "loss", "loss_ode", "loss_ic", "loss_data"},
            join(dir, "stage1_log.csv"));
        arts.push_back(join(dir, "stage1_log.csv"));
        write_checkpoint(r.nets, join(dir, "checkpoint.csv"));
        arts.push_back(join(dir, "checkpoint.csv"));

        MatrixXd sum(1, 2);
        sum << double(r.iters_run), r.final_nmse;
        write_matrix_csv(sum, {"iters_run", "final_nmse"},
                         join(dir, "train_summary.csv"));
        write_config(cfg, join(dir, "config_echo.cfg"));
    });
}

bool run_infer(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    bool pass = true;
    stage("infer", arts, [&] {
        PbpkModel m = masked_model(cfg);
        auto labels = read_labels(m, dir);
        require_file(join(dir, "checkpoint.csv"),
                     "run the train command first");
        auto nets = read_checkpoint(join(dir, "checkpoint.csv"));
        if (n_clusters(labels) != int(nets.size()))
            throw ValidationError(
                "checkpoint branches do not match clusters.csv");

        ObservationSet obs = make_observations(cfg, m);
        write_observations_csv(obs, join(dir, "observations.csv"));
        arts.push_back(join(dir, "observations.csv"));

        CollocationGrid grid =
            CollocationGrid::uniform(cfg.horizon_h, cfg.grid_n);
        Stage2Result r = stage2_infer(m, grid, labels, cfg.weights, nets,
                                      obs, stage2_config(cfg));

        std::vector<std::string> th{"iter", "loss", "loss_ode", "loss_ic",
                                    "loss_data"};
        if (cfg.mode == MaskKind::Parameter) {
            th.push_back("vmax");
            th.push_back("km");
        } else {
            for (int j = 0; j < AuxNet::n_params(); ++j)
                th.push_back("p" + std::to_string(j));
        }
        write_matrix_csv(r.trace, th, join(dir, "stage2_trace.csv"));
        arts.push_back(join(dir, "stage2_trace.csv"));

        Trajectory pred;
        pred.times = grid.all;
        pred.states = r.P;
        write_trajectory_csv(m, pred, join(dir, "stage2_prediction.csv"));
        arts.push_back(join(dir, "stage2_prediction.csv"));

        const auto& e = m.drug.enzymes[m.mask.enzyme];
        std::vector<ReportRow> rows;
        if (cfg.mode == MaskKind::Parameter) {
            double rv = rel_err(r.vmax, e.vmax);
            double rk = rel_err(r.km, e.km);
            double rr = rel_err(r.vmax / r.km, e.vmax / e.km);
            rows.push_back({"truth_vmax", e.vmax});
            rows.push_back({"truth_km", e.km});
            rows.push_back({"vmax", r.vmax});
            rows.push_back({"km", r.km});
            rows.push_back({"ratio", r.vmax / r.km});
            rows.push_back(
                {"rel_err_vmax", rv, cfg.param_tol, rv <= cfg.param_tol});
            rows.push_back(
                {"rel_err_km", rk, cfg.param_tol, rk <= cfg.param_tol});
            rows.push_back({"rel_err_ratio", rr});
            rows.push_back({"dof", double(r.dof), 2.0, r.dof == 2});
        } else {
            write_aux_checkpoint(r.aux, join(dir, "aux_checkpoint.csv"));
            arts.push_back(join(dir, "aux_checkpoint.csv"));
            VectorXd ot = grid.ode_times();
            MatrixXd gcsv(ot.size(), 2);
            gcsv.col(0) = ot;
            gcsv.col(1) = r.g_ode;
            write_matrix_csv(gcsv, {"t", "g"}, join(dir, "g_recovered.csv"));
            arts.push_back(join(dir, "g_recovered.csv"));

            Trajectory ref = integrate(m, initial_state(m), cfg.horizon_h,
                                       grid.all);
            VectorXd gtrue(ot.size());
            for (int i = 0; i < ot.size(); ++i)
                gtrue[i] = hepatic_term_rate(m, ref.states(i + 1, m.liver),
                                             e.vmax, e.km);
            double rl2 = (r.g_ode - gtrue).norm() / gtrue.norm();
            rows.push_back(
                {"term_rel_l2", rl2, cfg.term_tol, rl2 <= cfg.term_tol});
            rows.push_back({"dof", double(r.dof), 10.0, r.dof == 10});
        }
        rows.push_back({"best_objective", r.best_objective});
        write_report(rows, join(dir, "infer_report.csv"));
        pass = all_pass(rows);
    });
    return pass;
}

bool run_discover(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    bool pass = true;
    stage("discover", arts, [&] {
        if (cfg.mode != MaskKind::Term)
            throw ValidationError("discover requires stage2.mode = term");
        PbpkModel m = masked_model(cfg);
        require_file(join(dir, "aux_checkpoint.csv"),
                     "run the infer command in term mode first");
        require_file(join(dir, "stage2_prediction.csv"),
                     "run the infer command in term mode first");
        AuxNet aux = read_aux_checkpoint(join(dir, "aux_checkpoint.csv"));
        Trajectory pred =
            read_trajectory_csv(m, join(dir, "stage2_prediction.csv"));
        int n = int(pred.times.size()) - 1;
        VectorXd ot = pred.times.tail(n);
        VectorXd cliv = pred.states.col(m.liver).tail(n);
        VectorXd Y = extract_term_trajectory(aux, ot);

        PiSet set = compute_pi_groups(m, ot, cliv, Y, cfg.y_floor);
        write_pi_csv(set, join(dir, "pi_samples.csv"));
        arts.push_back(join(dir, "pi_samples.csv"));
        PowerLawFit fit = power_law_regress(set.samples);
        write_text(recovered_form(fit), join(dir, "recovered_form.txt"));
        arts.push_back(join(dir, "recovered_form.txt"));

        std::vector<ReportRow> rows;
        rows.push_back({"pi_c", fit.c});
        rows.push_back({"pi_a", fit.a});
        rows.push_back({"pi_b", fit.b});
        rows.push_back({"pi_c_dev", std::abs(fit.c - 1), cfg.pi_tol,
                        std::abs(fit.c - 1) <= cfg.pi_tol});
        rows.push_back({"pi_a_abs", std::abs(fit.a), cfg.pi_tol,
                        std::abs(fit.a) <= cfg.pi_tol});
        rows.push_back({"pi_b_abs", std::abs(fit.b), cfg.pi_tol,
                        std::abs(fit.b) <= cfg.pi_tol});
        rows.push_back({"pi_r2", fit.r2});
        rows.push_back({"pi_n_used", double(fit.n_used)});
        rows.push_back({"pi_n_dropped", double(set.n_dropped)});
        write_report(rows, join(dir, "discover_report.csv"));
        pass = all_pass(rows);
    });
    return pass;
}

void run_baseline(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    stage("baseline", arts, [&] {
        if (cfg.mode != MaskKind::Parameter)
            throw ValidationError("baseline requires stage2.mode = params");
        PbpkModel m = masked_model(cfg);
        ObservationSet obs = make_observations(cfg, m);
        write_observations_csv(obs, join(dir, "observations.csv"));
        arts.push_back(join(dir, "observations.csv"));

        NlsConfig nc;
        nc.max_iters = cfg.bl_n_iters;
        nc.bounds_factor = cfg.bl_bounds_factor;
        nc.init_factor = cfg.bl_init_factor;
        NlsResult r = nls_fit(m, obs, cfg.horizon_h, nc);

        MatrixXd hist(int(r.residual_history.size()), 2);
        for (size_t i = 0; i < r.residual_history.size(); ++i)
            hist.row(int(i)) << double(i), r.residual_history[i];
        write_matrix_csv(hist, {"step", "cost"},
                         join(dir, "baseline_history.csv"));
        arts.push_back(join(dir, "baseline_history.csv"));

        const auto& e = m.drug.enzymes[m.mask.enzyme];
        std::vector<ReportRow> rows;
        rows.push_back({"vmax", r.vmax});
        rows.push_back({"km", r.km});
        rows.push_back({"ratio", r.vmax / r.km});
        rows.push_back({"rel_err_vmax", rel_err(r.vmax, e.vmax)});
        rows.push_back({"rel_err_km", rel_err(r.km, e.km)});
        rows.push_back(
            {"rel_err_ratio", rel_err(r.vmax / r.km, e.vmax / e.km)});
        rows.push_back({"iters", double(r.iters)});
        rows.push_back({"converged", r.converged ? 1.0 : 0.0});
        rows.push_back({"grad_rel", r.grad_rel});
        write_report(rows, join(dir, "baseline_report.csv"));
    });
}

bool run_ablate(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> arts;
    bool pass = true;
    stage("ablate", arts, [&] {
        if (cfg.mode != MaskKind::Parameter)
            throw ValidationError("ablate runs in params mode");
        CollocationGrid grid =
            CollocationGrid::uniform(cfg.horizon_h, cfg.grid_n);
        MatrixXd table(3, 5);
        for (int rep = 0; rep < 3; ++rep) {
            RunConfig c = cfg;
            c.seed = cfg.seed + uint64_t(rep);
            PbpkModel m = masked_model(c);
            auto tasks = task_set(c, m);
            auto labels = compute_labels(c, m, tasks);
            MatrixXd ref0 = task_references(c, m, {tasks[0]})[0];

            Stage1Result multi = stage1_meta_train(
                m, grid, labels, c.weights, init_nets(c, n_clusters(labels)),
                tasks, stage1_config(c));
            double mse_multi = nominal_nmse(m, grid, labels, c.weights,
                                            multi.nets, ref0);

            std::vector<int> one(m.n_states, 0);
            Stage1Result single = stage1_meta_train(
                m, grid, one, c.weights, init_nets(c, 1), tasks,
                stage1_config(c));
            double mse_single =
                nominal_nmse(m, grid, one, c.weights, single.nets, ref0);

            ObservationSet obs = make_observations(c, m);
            Stage2Result s2 = stage2_infer(m, grid, labels, c.weights,
                                           multi.nets, obs,
                                           stage2_config(c));
            const auto& e = m.drug.enzymes[m.mask.enzyme];
            double err2 = std::max(rel_err(s2.vmax, e.vmax),
                                   rel_err(s2.km, e.km));

            JointConfig jc;
            jc.n_iters = c.s1_n_iters;
            jc.lr_theta = c.s1_lr;
            jc.lr_alpha = c.s2_lr;
            jc.bounds_factor = c.s2_bounds_factor;
            jc.init_factor = c.s2_init_factor;
            JointResult jr =
                joint_train(m, grid, labels, c.weights,
                            init_nets(c, n_clusters(labels)), obs, c.seed,
                            jc);
            double errj = std::max(rel_err(jr.vmax, e.vmax),
                                   rel_err(jr.km, e.km));

            table.row(rep) << double(c.seed), mse_multi, mse_single, err2,
                errj;
        }
        write_matrix_csv(table,
                         {"seed", "multi_nmse", "single_nmse", "stage2_err",
                          "joint_err"},
                         join(dir, "ablation.csv"));
        arts.push_back(join(dir, "ablation.csv"));

        double m_multi = table.col(1).mean();
        double m_single = table.col(2).mean();
        double m_s2 = table.col(3).mean();
        double m_joint = table.col(4).mean();
        std::vector<ReportRow> rows;
        rows.push_back({"mean_multi_nmse", m_multi});
        rows.push_back({"mean_single_nmse", m_single});
        rows.push_back({"multi_below_single", m_multi < m_single ? 1.0 : 0.0,
                        1.0, m_multi < m_single});
        rows.push_back({"mean_stage2_err", m_s2});
        rows.push_back({"mean_joint_err", m_joint});
        rows.push_back({"stage2_below_joint", m_s2 < m_joint ? 1.0 : 0.0,
                        1.0, m_s2 < m_joint});
        write_report(rows, join(dir, "ablate_report.csv"));
        pass = all_pass(rows);
    });
    return pass;
}

bool run_pipeline(const RunConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    run_train(cfg, dir);
    bool pass = run_infer(cfg, dir);
    std::vector<ReportRow> rows = read_report(join(dir, "infer_report.csv"));
    if (cfg.mode == MaskKind::Term) {
        pass = run_discover(cfg, dir) && pass;
        auto d = read_report(join(dir, "discover_report.csv"));
        rows.insert(rows.end(), d.begin(), d.end());
    } else {
        run_baseline(cfg, dir);
        auto b = read_report(join(dir, "baseline_report.csv"));
        for (auto& r : b) r.name = "baseline_" + r.name;
        rows.insert(rows.end(), b.begin(), b.end());
    }
    write_report(rows, join(dir, "report.csv"));
    for (const auto& r : rows) {
        std::cout << r.name << " = " << format_double(r.value);
        if (std::isfinite(r.threshold))
            std::cout << " (threshold " << format_double(r.threshold) << ": "
                      << (r.pass ? "pass" : "FAIL") << ")";
        std::cout << "\n";
    }
    std::cout << (pass ? "overall: pass" : "overall: FAIL") << "\n";
    return pass;
}

}  // namespace metapinn
