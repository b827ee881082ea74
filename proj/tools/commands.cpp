#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cubitopo/complex.hpp"
#include "cubitopo/metrics.hpp"
#include "cubitopo/npy.hpp"
#include "cubitopo/optimizer.hpp"
#include "cubitopo/parallel.hpp"
#include "cubitopo/persistence.hpp"
#include "cubitopo/phantom.hpp"
#include "cubitopo/prior.hpp"
#include "cubitopo/topo_loss.hpp"

namespace fs = std::filesystem;

namespace cubitopo::cli {

namespace {

// Raised for bad flags, unreadable inputs and invalid data (exit code 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw UsageError("cannot read '" + path + "': no such file");
}

std::vector<std::size_t> parse_shape(const std::string& s) {
    std::vector<std::size_t> dims;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(part, &used);
            if (used != part.size() || v < 1) throw std::invalid_argument("");
            dims.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("bad shape '" + s + "' (expected e.g. 64x64 or 40x40x40)");
        }
    }
    if (dims.size() != 2 && dims.size() != 3) throw UsageError("shape '" + s + "' must have 2 or 3 extents");
    return dims;
}

std::vector<double> parse_spacing(const std::string& s) {
    if (s.empty()) return {};
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw UsageError("bad spacing '" + s + "' (expected comma-separated numbers)");
        }
    }
    return out;
}

BettiPrior load_prior(const std::string& spec) {
    if (spec == "shortaxis2d") return shortaxis_prior();
    if (spec == "wholeheart3d") return wholeheart_prior(true);
    require_file(spec);
    std::ifstream f(spec);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return prior_from_json(ss.str());
    } catch (const PriorError& e) {
        throw UsageError(spec + ": " + e.what());
    }
}

// Writes to a file, or to `out` when the path is empty or "-".
template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(out);
        return;
    }
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    fn(f);
}

struct Common {
    std::string construction = "v";
    std::size_t threads = 0;

    void add(CLI::App* app) {
        app->add_option("-c,--construction", construction, "Cubical construction: v (vertex) or t (top cell)")
            ->capture_default_str();
        app->add_option("-j,--threads", threads, "Worker threads (default: $CUBITOPO_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
    }
    Construction parsed() const {
        try {
            return parse_construction(construction);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
};

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---- barcode ---------------------------------------------------------------

struct BarcodeCmd {
    Common common;
    std::string input, out;
    int max_dim = -1;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("barcode", "Persistence barcode of a scalar field (.npy) as CSV");
        c->add_option("field", input, "Input field, 2D or 3D .npy")->required();
        c->add_option("--max-dim", max_dim, "Highest homology dimension (default: N-1)");
        c->add_option("-o,--out", out, "Output CSV (default: stdout)");
        common.add(c);
        c->callback([this] { run_ = true; });
    }
    bool run_ = false;

    int exec(std::ostream& out_stream) {
        require_file(input);
        const ScalarField field = npy::load_field(input);
        const int n = field.shape().ndim();
        const int md = max_dim < 0 ? n - 1 : max_dim;
        if (md > n - 1) throw UsageError("--max-dim must be at most " + std::to_string(n - 1));
        const FilteredComplex cx(field, common.parsed());
        const Barcode bc = compute_barcode(cx, md);
        emit(out, out_stream, [&](std::ostream& o) { write_barcode_csv(o, bc, cx); });
        return kExitOk;
    }
};

// ---- betti -----------------------------------------------------------------

struct BettiCmd {
    Common common;
    std::string input;
    std::vector<double> thresholds;
    bool check = false;
    bool run_ = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("betti", "Betti numbers of superlevel sets of a field");
        c->add_option("field", input, "Input field, 2D or 3D .npy")->required();
        c->add_option("-p,--threshold", thresholds, "Threshold(s) p; the set is {value >= p}")->required();
        c->add_flag("--check", check, "Also count directly on the binarised mask and fail on disagreement");
        common.add(c);
        c->callback([this] { run_ = true; });
    }

    int exec(std::ostream& out) {
        require_file(input);
        const ScalarField field = npy::load_field(input);
        const Construction con = common.parsed();
        const Barcode bc = compute_barcode(FilteredComplex(field, con), field.shape().ndim() - 1);
        out << "threshold";
        for (int d = 0; d < field.shape().ndim(); ++d) out << ",b" << d;
        out << '\n';
        bool ok = true;
        for (double p : thresholds) {
            const auto b = bc.betti_at(p);
            out << p;
            for (int v : b) out << ',' << v;
            out << '\n';
            if (check && betti_oracle(binarize(field, p), con) != b) ok = false;
        }
        if (!ok) throw std::runtime_error("barcode Betti numbers disagree with the direct count");
        return kExitOk;
    }
};

// ---- optimize --------------------------------------------------------------

struct OptimizeCmd {
    Common common;
    std::string input, prior_path, out, trace;
    std::optional<double> lambda;
    OptimizerConfig cfg;
    bool no_timing = false;
    bool run_ = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("optimize", "Topological post-processing of a probability stack");
        c->add_option("probs", input, "Probability stack (K, ...) .npy")->required();
        c->add_option("--prior", prior_path, "Prior JSON, or the built-in shortaxis2d / wholeheart3d")
            ->required();
        c->add_option("--lambda", lambda, "Weight of the similarity term (default: 1000 in 2D, 1 in 3D)");
        c->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
        c->add_option("--iters", cfg.iterations, "Iterations (>= 1)")->capture_default_str();
        c->add_option("--seed", cfg.seed, "Seed")->capture_default_str();
        c->add_option("--beta1", cfg.adam_beta1)->capture_default_str();
        c->add_option("--beta2", cfg.adam_beta2)->capture_default_str();
        c->add_option("--adam-eps", cfg.adam_epsilon)->capture_default_str();
        c->add_flag("--clamp", cfg.clamp, "Floor zero probabilities at 1e-7 instead of failing");
        c->add_option("-o,--out", out, "Output probability stack .npy");
        c->add_option("--trace", trace, "Per-iteration loss CSV");
        c->add_flag("--no-timing", no_timing, "Omit the wall-clock column from the trace");
        common.add(c);
        c->callback([this] { run_ = true; });
    }

    int exec(std::ostream& o) {
        require_file(input);
        const BettiPrior prior = load_prior(prior_path);
        const ChannelStack stack = npy::load_stack(input);
        ProbSegmentation seg = [&] {
            try {
                return ProbSegmentation(stack);
            } catch (const std::invalid_argument& e) {
                throw UsageError(input + ": " + e.what());
            }
        }();
        if (seg.num_classes() != prior.num_classes())
            throw UsageError(input + " has " + std::to_string(seg.num_classes()) + " channels but the prior has " +
                             std::to_string(prior.num_classes()) + " classes");
        if (seg.shape().ndim() != prior.ndim()) throw UsageError("prior dimensionality does not match the input");
        cfg.lambda = lambda.value_or(default_lambda(seg.shape().ndim()));
        cfg.construction = common.parsed();
        cfg.threads = common.threads;
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        RunTrace run;
        try {
            run = post_process(seg, prior, cfg);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (!out.empty()) npy::save(out, npy::stack_array(run.final.stack()));
        if (!trace.empty()) emit(trace, o, [&](std::ostream& f) { write_trace_csv(f, run, !no_timing); });
        const auto& first = run.entries.front();
        const auto& last = run.entries.back();
        char buf[256];
        std::snprintf(buf, sizeof(buf), "L_TP %.6g -> %.6g (L_topo %.6g -> %.6g, L_mse %.6g -> %.6g)\n",
                      first.combined, last.combined, first.topo, last.topo, first.mse, last.mse);
        o << buf;
        const auto be0 = betti_error(argmax_labels(seg), prior, cfg.construction);
        const auto be1 = betti_error(argmax_labels(run.final), prior, cfg.construction);
        o << "BE " << be0.total << " -> " << be1.total << '\n';
        return kExitOk;
    }
};

// ---- evaluate --------------------------------------------------------------

LabelMap load_prediction(const std::string& path, int k, const std::vector<double>& spacing) {
    const npy::Array a = npy::load(path);
    const bool integer = a.dtype != npy::DType::F4 && a.dtype != npy::DType::F8;
    if (integer) return npy::load_labels(path, k, spacing);
    const ChannelStack stack = npy::load_stack(path, spacing);
    if (stack.num_channels() != k)
        throw UsageError(path + " has " + std::to_string(stack.num_channels()) + " channels, expected " +
                         std::to_string(k));
    return argmax_labels(ProbSegmentation(stack));
}

struct EvaluateCmd {
    Common common;
    std::string pred, gt, prior_path, spacing, report, csv, case_id;
    bool cca = false;
    bool run_ = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("evaluate", "Topological and overlap metrics of a prediction");
        c->add_option("pred", pred, "Predicted labels (integer .npy, 1-based) or probability stack")->required();
        c->add_option("gt", gt, "Ground-truth labels (integer .npy, 1-based)")->required();
        c->add_option("--prior", prior_path, "Prior JSON, or the built-in shortaxis2d / wholeheart3d")
            ->required();
        c->add_option("--spacing", spacing, "Voxel spacing in mm, comma-separated (default 1)");
        c->add_option("--report", report, "JSON report path (default: stdout)");
        c->add_option("--csv", csv, "Also write a one-row-per-case CSV");
        c->add_option("--case", case_id, "Case identifier in the report");
        c->add_flag("--cca", cca, "Apply the largest-component baseline to the prediction first");
        common.add(c);
        c->callback([this] { run_ = true; });
    }

    int exec(std::ostream& o) {
        require_file(pred);
        require_file(gt);
        const BettiPrior prior = load_prior(prior_path);
        const auto sp = parse_spacing(spacing);
        const int k = prior.num_classes();
        LabelMap p, g;
        try {
            p = load_prediction(pred, k, sp);
            g = npy::load_labels(gt, k, sp);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (cca) p = cca_baseline(p);
        if (!(p.shape().dims() == g.shape().dims())) throw UsageError("prediction and ground truth shapes differ");
        if (p.shape().ndim() != prior.ndim()) throw UsageError("prior dimensionality does not match the input");
        for (const auto& s : required_subsets(k, prior.ndim()))
            if (!prior.find(s)) throw UsageError("prior is missing subset '" + prior.subset_key(s) + "'");
        const std::vector<TopoReport> reports{
            evaluate(p, g, prior, common.parsed(), case_id.empty() ? fs::path(pred).stem().string() : case_id)};
        const Summary summary = aggregate(reports);
        emit(report, o, [&](std::ostream& f) { f << report_json(reports, summary, prior.class_names()); });
        if (!csv.empty()) emit(csv, o, [&](std::ostream& f) { write_report_csv(f, reports, prior.class_names()); });
        return kExitOk;
    }
};

// ---- phantom ---------------------------------------------------------------

struct PhantomCmd {
    std::string task = "shortaxis2d", out, shape;
    std::size_t n = 1;
    std::uint64_t seed = 0;
    std::vector<std::string> defects;
    int random_min = 0, random_max = 0;
    double softness = 0.5, noise = 0.05;
    std::size_t threads = 0;
    bool run_ = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("phantom", "Generate synthetic cases with known topology");
        c->add_option("--task", task, "shortaxis2d or wholeheart3d")->capture_default_str();
        c->add_option("-o,--out", out, "Output directory; cases go to case_000, case_001, ...")->required();
        c->add_option("-n,--n", n, "Number of cases")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--seed", seed, "Corpus seed")->capture_default_str();
        c->add_option("--defect", defects, "type:class[:magnitude[:partner]], repeatable");
        c->add_option("--random-defects", random_min,
                      "Draw this many (to --random-max) defects per case from the standard pool");
        c->add_option("--random-max", random_max, "Upper bound for --random-defects");
        c->add_option("--shape", shape, "Grid shape, e.g. 64x64");
        c->add_option("--softness", softness, "Boundary blur in (0, 0.5]")->capture_default_str();
        c->add_option("--noise", noise, "Logit jitter amplitude")->capture_default_str();
        c->add_option("-j,--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        c->callback([this] { run_ = true; });
    }

    int exec(std::ostream& o) {
        PhantomSpec templ;
        try {
            templ.task = parse_task(task);
            const BettiPrior prior = task_prior(templ.task);
            for (const auto& d : defects) templ.defects.push_back(parse_defect(d, prior));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (!shape.empty()) templ.shape = GridShape(parse_shape(shape));
        templ.softness = softness;
        templ.noise = noise;
        const int rmax = std::max(random_max, random_min);
        try {
            templ.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        std::vector<PhantomCase> cases(n);
        parallel_for(n, threads, [&](std::size_t i) {
            PhantomSpec s = templ;
            s.seed = derive_seed(seed, i);
            cases[i] = rmax > 0 ? random_case(templ, s.seed, random_min, rmax) : generate(s);
        });
        for (std::size_t i = 0; i < n; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "case_%03zu", i);
            write_case(cases[i], fs::path(out) / name);
            const auto be = betti_error(argmax_labels(cases[i].probs), cases[i].prior, Construction::V);
            o << name << " seed " << cases[i].spec.seed << " defects " << cases[i].spec.defects.size() << " BE "
              << be.total << '\n';
        }
        return kExitOk;
    }
};

// ---- bench -----------------------------------------------------------------

struct BenchCmd {
    Common common;
    std::string shape = "352x352", field;
    int repeat = 3;
    bool optimize = false;
    int iters = 100;
    bool run_ = false;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("bench", "Time barcode computation and post-processing");
        c->add_option("--shape", shape, "Phantom shape to time, e.g. 352x352 or 192x160x160")->capture_default_str();
        c->add_option("--field", field, "Time this field instead of a phantom");
        c->add_option("--repeat", repeat, "Barcode repetitions")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_flag("--optimize", optimize, "Also time a full post-processing run");
        c->add_option("--iters", iters, "Iterations of the timed run")->capture_default_str();
        common.add(c);
        c->callback([this] { run_ = true; });
    }

    int exec(std::ostream& o) {
        const Construction con = common.parsed();
        ScalarField f;
        std::optional<PhantomCase> ph;
        if (!field.empty()) {
            require_file(field);
            f = npy::load_field(field);
        } else {
            const auto dims = parse_shape(shape);
            PhantomSpec s;
            s.task = dims.size() == 2 ? PhantomTask::ShortAxis2D : PhantomTask::WholeHeart3D;
            s.shape = GridShape(dims);
            s.seed = 1;
            s.defects = sample_defects(s.task, 1, 2, 2);
            try {
                ph = generate(s);
            } catch (const std::invalid_argument&) {
                s.defects.clear();  // grid too small for defects
                ph = generate(s);
            }
            const std::vector<int> all_fg = [&] {
                std::vector<int> v;
                for (int c = 2; c <= ph->probs.num_classes(); ++c) v.push_back(c);
                return v;
            }();
            f = union_field(ph->probs, all_fg);
        }
        std::string dims_str;
        for (std::size_t d : f.shape().dims()) dims_str += (dims_str.empty() ? "" : "x") + std::to_string(d);
        std::vector<double> times;
        std::size_t bars = 0;
        for (int r = 0; r < repeat; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const Barcode bc = compute_barcode(FilteredComplex(f, con), f.shape().ndim() - 1);
            times.push_back(elapsed_ms(t0));
            bars = bc.bars.size();
        }
        o << std::fixed << std::setprecision(2);
        o << "barcode " << dims_str << " " << to_string(con) << " bars " << bars << " median_ms "
          << percentile(times, 50) << " min_ms " << *std::min_element(times.begin(), times.end()) << '\n';
        if (optimize) {
            if (!ph) throw UsageError("--optimize needs a phantom shape, not --field");
            OptimizerConfig cfg;
            cfg.iterations = iters;
            cfg.lambda = default_lambda(f.shape().ndim());
            cfg.construction = con;
            cfg.threads = common.threads;
            const auto t0 = std::chrono::steady_clock::now();
            const RunTrace run = post_process(ph->probs, ph->prior, cfg);
            const double ms = elapsed_ms(t0);
            o << "optimize " << dims_str << " " << to_string(con) << " iters " << iters << " threads "
              << (common.threads ? common.threads : default_threads()) << " total_s " << ms / 1000.0
              << " per_iter_ms " << ms / iters << '\n';
        }
        return kExitOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Persistent-homology topology tools for multi-class segmentations", "cubitopo"};
    app.require_subcommand(1);
    BarcodeCmd barcode;
    BettiCmd betti;
    OptimizeCmd optimize;
    EvaluateCmd evaluate;
    PhantomCmd phantom;
    BenchCmd bench;
    barcode.add(app);
    betti.add(app);
    optimize.add(app);
    evaluate.add(app);
    phantom.add(app);
    bench.add(app);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    try {
        if (barcode.run_) return barcode.exec(out);
        if (betti.run_) return betti.exec(out);
        if (optimize.run_) return optimize.exec(out);
        if (evaluate.run_) return evaluate.exec(out);
        if (phantom.run_) return phantom.exec(out);
        if (bench.run_) return bench.exec(out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const npy::NpyError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const PriorError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitCompute;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace cubitopo::cli
