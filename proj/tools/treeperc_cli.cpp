#include "treeperc/gff.hpp"
#include "treeperc/interlace.hpp"
#include "treeperc/isocheck.hpp"
#include "treeperc/percolate.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/spec.hpp"
#include "treeperc/tree.hpp"
#include "treeperc/walk.hpp"
#include "treeperc/watershed.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace treeperc;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kSchema = "treeperc.v1";
constexpr const char* kVersion = "0.1.0";

// Hard property violation detected after the output was written.
struct Violation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string spec_path;
    std::string out;
    std::string format = "json";
    std::uint64_t seed = 0;
    int workers = 1;
    double tol = 1e-9;

    std::string x = "root", y = "root";
    double kappa = 1.0;
    double u = 0.5, h = 0.0, p = 0.5;
    int L = 5, D = 4, horizon = 12;
    std::size_t N = 1000;
    std::uint64_t cap = 10'000'000;
    std::string stop = "watershed";
    std::vector<int> depths{8, 12, 16};
    std::string model = "bernoulli";
    double lo = 0.0, hi = 1.0, cut = 0.05;
    bool quenched = false;
    std::vector<std::string> vertices{"root"};
    std::size_t sign_reps = 1000;
    int sign_depth = 2;
    std::size_t budget = 64;
    std::size_t max_path = 1000;
};

void write_double(std::ostream& os, double v)
{
    if (std::isnan(v)) {
        os << "\"nan\"";
    } else if (std::isinf(v)) {
        os << (v > 0 ? "\"inf\"" : "\"-inf\"");
    } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    }
}

bool flat(const json& j)
{
    for (const auto& e : j)
        if (e.is_structured())
            return false;
    return true;
}

void write_json(std::ostream& os, const json& j, int level = 0)
{
    const std::string pad(static_cast<std::size_t>(2 * level), ' '), in(static_cast<std::size_t>(2 * level + 2), ' ');
    if (j.is_number_float()) {
        write_double(os, j.get<double>());
    } else if (j.is_object()) {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first)
                os << ",\n";
            first = false;
            os << in << json(it.key()).dump() << ": ";
            write_json(os, it.value(), level + 1);
        }
        os << "\n" << pad << "}";
    } else if (j.is_array()) {
        if (flat(j)) {
            os << "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i)
                    os << ", ";
                write_json(os, j[i], level + 1);
            }
            os << "]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i)
                os << ",\n";
            os << in;
            write_json(os, j[i], level + 1);
        }
        os << "\n" << pad << "]";
    } else {
        os << j.dump();
    }
}

std::string fmt17(double v)
{
    std::ostringstream os;
    write_double(os, v);
    return os.str();
}

json bracket_json(const Bracket& b)
{
    return json{{"lo", b.lo}, {"hi", b.hi}, {"width", b.width()}, {"converged", b.converged},
                {"certified", b.certified}};
}

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json law_json(const ConductanceLaw& l)
{
    if (l.type == ConductanceLaw::constant)
        return json{{"type", "const"}, {"value", l.lo}};
    return json{{"type", "uniform"}, {"lo", l.lo}, {"hi", l.hi}};
}

json spec_json(const OffspringSpec& s)
{
    json j;
    j["kind"] = s.kind == SpecKind::unit ? "unit" : s.kind == SpecKind::iid ? "iid" : "mixture";
    j["mu"] = s.mu;
    if (s.kind == SpecKind::iid)
        j["conductance"] = law_json(s.law);
    if (s.kind == SpecKind::mixture) {
        json a = json::array();
        for (const auto& m : s.atoms)
            a.push_back(json{{"weight", m.weight}, {"count", m.count}, {"law", law_json(m.law)}});
        j["atoms"] = a;
    }
    j["mean"] = s.mean();
    return j;
}

std::string node_name(const TreeArena& t, int i)
{
    if (i == TreeArena::kOuter)
        return "outer";
    const NodeId v = t.id(i);
    return v.is_root() ? "root" : v.str();
}

json node_names(const TreeArena& t, const std::vector<int>& v)
{
    json a = json::array();
    for (int i : v)
        a.push_back(node_name(t, i));
    return a;
}

class Runner {
public:
    Runner(const Options& o, OffspringSpec spec, std::string spec_name, std::string command)
        : o_(o), spec_(std::move(spec)), spec_name_(std::move(spec_name)), command_(std::move(command))
    {
    }

    int run(const json& params, const std::function<json()>& body, const std::function<void(std::ostream&, const json&)>& csv = {})
    {
        json header{{"schema", kSchema},
                    {"version", kVersion},
                    {"command", command_},
                    {"config", {{"spec_file", spec_name_}, {"spec", spec_json(spec_)}, {"seed", o_.seed}}}};
        for (auto it = params.begin(); it != params.end(); ++it)
            header["config"][it.key()] = it.value();
        std::string violation;
        json result;
        try {
            result = body();
        } catch (const Violation& v) {
            violation = v.what();
            result = v_result_;
        }
        std::ofstream file;
        if (!o_.out.empty()) {
            file.open(o_.out);
            if (!file)
                throw ConfigError("cannot open output file " + o_.out);
        }
        std::ostream& os = o_.out.empty() ? std::cout : file;
        if (o_.format == "csv") {
            if (!csv)
                throw ConfigError("command " + command_ + " has no csv output");
            std::ostringstream h;
            write_json(h, header);
            std::istringstream lines(h.str());
            for (std::string line; std::getline(lines, line);)
                os << "# " << line << "\n";
            csv(os, result);
        } else {
            header["result"] = result;
            write_json(os, header);
            os << "\n";
        }
        if (!violation.empty()) {
            std::cerr << "treeperc: property violation: " << violation << "\n";
            return 4;
        }
        return 0;
    }

    // Records the partial result before raising a violation.
    [[noreturn]] void violate(json partial, const std::string& what)
    {
        v_result_ = std::move(partial);
        throw Violation(what);
    }

private:
    const Options& o_;
    OffspringSpec spec_;
    std::string spec_name_;
    std::string command_;
    json v_result_;
};

void scan_csv(std::ostream& os, const json& r)
{
    os << "parameter,D,N,survival_freq,ci_lo,ci_hi\n";
    for (const auto& c : r["curve"])
        os << fmt17(c["param"].get<double>()) << "," << c["D"].get<int>() << "," << c["N"].get<std::size_t>() << ","
           << fmt17(c["survival_freq"].get<double>()) << "," << fmt17(c["ci"][0].get<double>()) << ","
           << fmt17(c["ci"][1].get<double>()) << "\n";
}

json curve_json(const std::vector<ScanPoint>& curve)
{
    json a = json::array();
    for (const auto& c : curve)
        a.push_back(json{{"param", c.param}, {"D", c.D}, {"N", c.N}, {"survived", c.survived},
                         {"survival_freq", c.freq}, {"ci", interval_json(c.ci)}});
    return a;
}

CriticalExperiment experiment(const Options& o, const OffspringSpec& spec)
{
    if (o.model == "bernoulli")
        return bernoulli_experiment(spec, o.seed, o.quenched);
    if (o.model == "gff")
        return gff_experiment(spec, law_bounds(spec), o.seed, o.quenched, o.horizon);
    if (o.model == "ri")
        return interlacement_marks_experiment(spec, law_bounds(spec), o.u, o.seed);
    throw ConfigError("unknown model '" + o.model + "' (bernoulli, gff, ri)");
}

std::uint64_t resolve_seed(bool given, std::uint64_t flag, const OffspringSpec& spec)
{
    if (given)
        return flag;
    if (const char* env = std::getenv("TREEPERC_SEED")) {
        try {
            std::size_t used = 0;
            const std::string s(env);
            const std::uint64_t v = std::stoull(s, &used);
            if (used != s.size())
                throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(std::string("TREEPERC_SEED is not an unsigned integer: ") + env);
        }
    }
    return spec.has_seed ? spec.seed : 1;
}

int dispatch(CLI::App& app, Options& o, bool seed_given)
{
    OffspringSpec spec = o.spec_path.empty() ? OffspringSpec::unit_law({0, 0, 1}) : load_spec(o.spec_path);
    const std::string spec_name = o.spec_path.empty() ? "builtin:binary" : o.spec_path;
    o.seed = resolve_seed(seed_given, o.seed, spec);
    if (o.format != "json" && o.format != "csv")
        throw ConfigError("format must be json or csv");
    if (o.workers < 1)
        throw ConfigError("workers must be positive");
    if (!(o.tol > 0.0))
        throw ConfigError("tol must be positive");

    CLI::App* group = app.get_subcommands().front();
    CLI::App* leaf = group->get_subcommands().front();
    const std::string command = group->get_name() + " " + leaf->get_name();
    Runner R(o, spec, spec_name, command);
    PotentialOptions popt;
    popt.tol = o.tol;

    if (command == "tree dump") {
        return R.run({{"D", o.D}}, [&] {
            TreeArena t(spec, o.seed);
            ball(t, o.D);
            t.check_invariants();
            std::ostringstream ss;
            t.dump_jsonl(ss, static_cast<unsigned>(o.D));
            json nodes = json::array();
            std::istringstream lines(ss.str());
            for (std::string line; std::getline(lines, line);)
                if (!line.empty())
                    nodes.push_back(json::parse(line));
            std::vector<std::size_t> gen(static_cast<std::size_t>(o.D) + 1, 0);
            for (std::size_t i = 0; i < t.size(); ++i)
                if (static_cast<int>(t.depth(static_cast<int>(i))) <= o.D)
                    ++gen[t.depth(static_cast<int>(i))];
            return json{{"generation_sizes", gen}, {"nodes", nodes}};
        });
    }
    if (command == "walk run") {
        StopRule rule;
        if (o.stop == "watershed")
            rule = StopRule::watershed_time(o.L);
        else if (o.stop == "visits")
            rule = StopRule::visits(o.L);
        else if (o.stop == "depth")
            rule = StopRule::reach_depth(o.D);
        else
            throw ConfigError("stop must be watershed, visits or depth");
        const json params{{"x", o.x}, {"kappa", o.kappa}, {"stop", o.stop}, {"L", o.L}, {"D", o.D}, {"cap", o.cap}};
        return R.run(params, [&] {
            TreeArena t(spec, o.seed, NodeId{}, o.kappa);
            Potential pot(t, law_bounds(spec), popt);
            const int x = t.find(NodeId::parse(o.x));
            Stream s(derive_key(o.seed, Purpose::walk));
            WalkOptions w;
            w.cap = o.cap;
            w.pot = &pot;
            const WalkResult r = run_until(t, x, rule, s, w);
            std::vector<int> head(r.path.steps.begin(),
                                  r.path.steps.begin() +
                                      static_cast<std::ptrdiff_t>(std::min(o.max_path, r.path.steps.size())));
            return json{{"outcome", outcome_name(r.outcome)},
                        {"time", r.time},
                        {"V_L", r.V_L},
                        {"X_VL", node_name(t, r.X_VL)},
                        {"distinct", r.path.distinct()},
                        {"teleported", r.teleported},
                        {"decisions", r.decisions},
                        {"path", node_names(t, head)},
                        {"path_truncated", head.size() < r.path.steps.size()}};
        });
    }
    if (command == "potential green" || command == "potential summary") {
        const json params{{"x", o.x}, {"y", o.y}, {"tol", o.tol}};
        return R.run(params, [&] {
            TreeArena t(spec, o.seed);
            Potential pot(t, law_bounds(spec), popt);
            const int x = t.find(NodeId::parse(o.x));
            json r;
            std::vector<Bracket> checks;
            if (command == "potential green") {
                const int y = t.find(NodeId::parse(o.y));
                const Bracket g = pot.green(x, y, o.tol);
                r["green"] = bracket_json(g);
                checks.push_back(g);
            } else {
                const EscapeProbs e = pot.escape_probs(x, o.tol);
                r["c_down"] = bracket_json(pot.c_down(x, o.tol));
                r["c_up"] = bracket_json(pot.c_up(x, o.tol));
                r["lambda"] = t.lambda(x);
                r["no_return"] = bracket_json(e.no_return);
                r["no_parent"] = bracket_json(e.no_parent);
                r["e_check"] = bracket_json(pot.e_check(x, o.tol));
                r["green_diag"] = bracket_json(pot.green_diag(x, o.tol));
                checks = {e.no_return, pot.green_diag(x, o.tol)};
            }
            for (const Bracket& b : checks)
                if (!b.converged || !(b.width() <= o.tol * std::max(1.0, std::abs(b.hi))))
                    throw UnconvergedError("bracket width " + fmt17(b.width()) + " exceeds tol " + fmt17(o.tol));
            return r;
        });
    }
    if (command == "gff sample") {
        return R.run({{"D", o.D}, {"tol", o.tol}}, [&] {
            TreeArena t(spec, o.seed);
            Potential pot(t, law_bounds(spec), popt);
            const FieldSample f = sample_field(pot, o.D, o.tol, derive_key(o.seed, Purpose::field));
            json v = json::array();
            for (int x : f.window)
                v.push_back(json{{"id", node_name(t, x)}, {"phi", f.phi.at(x)}});
            return json{{"bias_bound", f.bias_bound}, {"field", v}};
        });
    }
    if (command == "gff percolate" || command == "ri percolate") {
        const bool gff = group->get_name() == "gff";
        Options q = o;
        q.model = gff ? "gff" : "ri";
        const double theta = gff ? o.h : o.p;
        json params{{"N", o.N}, {"depths", o.depths}};
        if (gff) {
            params["h"] = o.h;
            params["horizon"] = o.horizon;
            params["quenched"] = o.quenched;
        } else {
            params["u"] = o.u;
            params["p"] = o.p;
        }
        return R.run(
            params,
            [&] {
                const CriticalSamples s =
                    sample_critical(experiment(q, spec), o.N, o.depths, o.workers, {theta, theta});
                const auto curve = survival_curve(s, {theta});
                bool monotone = true;
                for (std::size_t i = 1; i < curve.size(); ++i)
                    monotone = monotone && curve[i].freq <= curve[i - 1].freq;
                return json{{"param", s.param},
                            {"monotone_in_D", monotone},
                            {"refused", s.refused},
                            {"curve", curve_json(curve)}};
            },
            scan_csv);
    }
    if (command == "ri sample") {
        return R.run({{"u", o.u}, {"D", o.D}}, [&] {
            TreeArena t(spec, o.seed);
            Potential pot(t, law_bounds(spec), popt);
            const auto r = sample_interlacements(pot, o.u, o.D, derive_key(o.seed, Purpose::replica));
            json v = json::array();
            for (int x : r.window) {
                const auto g = r.gamma.find(x);
                const auto n = r.visits.find(x);
                const auto l = r.local.find(x);
                v.push_back(json{{"id", node_name(t, x)},
                                 {"gamma", g == r.gamma.end() ? 0 : g->second},
                                 {"visits", n == r.visits.end() ? 0 : n->second},
                                 {"local_time", l == r.local.end() ? 0.0 : l->second}});
            }
            return json{{"flagged", r.flagged}, {"vertices", v}};
        });
    }
    if (command == "watershed run") {
        if (o.x == "root")
            o.x = "1";
        const json params{{"x", o.x}, {"kappa", o.kappa}, {"L", o.L}};
        return R.run(params, [&] {
            const NodeId x = NodeId::parse(o.x);
            if (x.is_root())
                throw ConfigError("watershed start must not be the root");
            const Watershed ws = run_watershed(spec, law_bounds(spec), x, o.kappa, o.L, o.seed);
            const TreeArena& t = *ws.arena;
            json r{{"outcome", outcome_name(ws.outcome())},
                   {"V_L", ws.V_L()},
                   {"X_VL", node_name(t, ws.X_VL())},
                   {"reached_L", ws.reached_L()},
                   {"W", node_names(t, ws.W)},
                   {"free", node_names(t, ws.free)},
                   {"streams_used", ws.streams.size()}};
            const bool ok = !ws.reached_L() || stream_identity(ws);
            r["stream_identity"] = ok;
            if (!ok)
                R.violate(r, "offspring on W differ from the streams");
            return r;
        });
    }
    if (command == "watershed couple") {
        const json params{{"u", o.u}, {"L", o.L}, {"budget", o.budget}};
        return R.run(params, [&] {
            const LawBounds b = law_bounds(spec);
            GoodnessParams gp = default_goodness_params(spec, b, o.L, o.u, o.seed);
            gp.u_tilde = o.u * gp.c_e();
            FreePointTree F(spec, b, gp, o.seed);
            F.grow(o.budget);
            const CouplingReport c = couple_and_check(F, o.u);
            const DriftCheck d = drift_check(F);
            const GoodTreeGrowth g = good_tree_growth(F);
            json r{{"params",
                    {{"L", gp.L}, {"B", gp.B}, {"c_lambda", gp.c_lambda}, {"C_Lambda", gp.C_Lambda}, {"C_g", gp.C_g},
                     {"c_f", gp.c_f}, {"c_L", gp.c_L}, {"c_e", gp.c_e()}, {"u_tilde", gp.u_tilde}}},
                   {"grown", F.grown()},
                   {"good", c.good},
                   {"undecided", c.undecided},
                   {"coupling_violations", c.violations},
                   {"drift", {{"edges", d.edges}, {"violations", d.violations}, {"min_ratio", d.min_ratio},
                              {"bound", d.bound}}},
                   {"good_children", {{"points", g.good_points}, {"mean", g.mean_good_children},
                                      {"ci", interval_json(g.ci)}}}};
            if (c.violations > 0 || d.violations > 0)
                R.violate(r, "coupling or drift bound violated");
            return r;
        });
    }
    if (command == "threshold scan") {
        json params{{"model", o.model}, {"lo", o.lo},       {"hi", o.hi},
                    {"N", o.N},         {"depths", o.depths}, {"cut", o.cut}};
        if (o.model == "ri")
            params["u"] = o.u;
        if (o.model == "gff")
            params["horizon"] = o.horizon;
        params["quenched"] = o.quenched;
        return R.run(
            params,
            [&] {
                const CriticalSamples s = sample_critical(experiment(o, spec), o.N, o.depths, o.workers, {o.lo, o.hi});
                const ThresholdEstimate e = estimate_threshold(s, o.lo, o.hi, o.cut);
                return json{{"param", e.param},     {"estimate", e.estimate}, {"ci", interval_json(e.ci)},
                            {"D", e.D},             {"cut", e.cut},           {"flagged", e.flagged},
                            {"unbounded", e.unbounded}, {"refused", e.refused}, {"curve", curve_json(e.curve)}};
            },
            scan_csv);
    }
    if (command == "iso check") {
        const json params{{"u", o.u},   {"vertices", o.vertices},     {"n", o.N},
                          {"p", o.p},   {"sign_reps", o.sign_reps}, {"sign_depth", o.sign_depth}};
        return R.run(params, [&] {
            TreeArena t(spec, o.seed);
            Potential pot(t, law_bounds(spec), popt);
            std::vector<int> vs;
            for (const auto& v : o.vertices)
                vs.push_back(t.find(NodeId::parse(v)));
            IsoOptions io;
            io.tol = o.tol;
            const IsoReport m = marginal_identity_test(pot, o.u, vs, o.N, o.seed, io);
            json ks = json::array();
            for (std::size_t j = 0; j < vs.size(); ++j)
                ks.push_back(json{{"vertex", node_name(t, vs[j])}, {"ks", m.ks[j].stat}, {"p", m.ks[j].p}});
            json r{{"marginals", ks}};
            if (m.has_pair)
                r["pair_energy"] = json{{"stat", m.pair.stat}, {"p", m.pair.p}};
            if (m.has_power)
                r["power_check"] = json{{"scale", io.power_scale}, {"ks", m.power.stat}, {"p", m.power.p}};
            r["flagged"] = m.flagged;
            if (o.u > 0.0 && o.sign_reps > 0) {
                const IsoReport sgn =
                    sign_inclusion_check(pot, o.u, o.p, o.sign_depth, o.sign_reps, derive_key(o.seed, Purpose::misc));
                r["sign_check"] = json{{"realizations", sgn.N},
                                       {"occupied", sgn.occupied},
                                       {"checked", sgn.sign_checked},
                                       {"violations", sgn.sign_violations},
                                       {"clock_violations", sgn.clock_violations}};
                if (sgn.sign_violations > 0 || sgn.clock_violations > 0)
                    R.violate(r, "gamma below sqrt(2u) on I^u and A_u");
            }
            return r;
        });
    }
    throw ConfigError("unknown command " + command);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Percolation experiments on Galton-Watson trees: free field, interlacements, watersheds"};
    app.require_subcommand(1);
    Options o;
    auto* seed_opt = app.add_option("--seed", o.seed, "RNG seed (default: TREEPERC_SEED, then the spec seed, then 1)");
    app.add_option("--spec", o.spec_path, "offspring law file (default: unit binary tree)");
    app.add_option("--out", o.out, "output path (default: stdout)");
    app.add_option("--format", o.format, "json or csv");
    app.add_option("--workers", o.workers, "worker threads; results do not depend on it");
    app.add_option("--tol", o.tol, "bracket tolerance");
    app.fallthrough();

    auto group = [&](const std::string& name, const std::string& help) {
        auto* g = app.add_subcommand(name, help);
        g->require_subcommand(1);
        g->fallthrough();
        return g;
    };
    auto* tree = group("tree", "lazy Galton-Watson trees");
    auto* walk = group("walk", "random walks");
    auto* potential = group("potential", "electrical quantities");
    auto* gff = group("gff", "Gaussian free field");
    auto* ri = group("ri", "random interlacements");
    auto* watershed = group("watershed", "watershed process and free points");
    auto* threshold = group("threshold", "percolation thresholds");
    auto* iso = group("iso", "isomorphism checks");

    auto* tree_dump = tree->add_subcommand("dump", "sampled nodes up to depth D");
    tree_dump->add_option("--D", o.D, "depth");

    auto* walk_run = walk->add_subcommand("run", "walk from x until a stopping rule");
    walk_run->add_option("--x", o.x, "start vertex (Ulam-Harris word, e.g. 1.2)");
    walk_run->add_option("--kappa", o.kappa, "edge to the outer parent of the root");
    walk_run->add_option("--stop", o.stop, "watershed, visits or depth");
    walk_run->add_option("--L", o.L, "distinct vertices");
    walk_run->add_option("--D", o.D, "depth for the depth rule");
    walk_run->add_option("--cap", o.cap, "step cap");
    walk_run->add_option("--max-path", o.max_path, "steps printed");

    for (auto* c : {potential->add_subcommand("green", "bracket of g(x, y)"),
                    potential->add_subcommand("summary", "conductances and escape probabilities at x")}) {
        c->add_option("--x", o.x, "vertex");
        if (c->get_name() == "green")
            c->add_option("--y", o.y, "second vertex");
    }

    auto* gff_sample = gff->add_subcommand("sample", "field on the ball of depth D");
    gff_sample->add_option("--D", o.D, "depth");
    auto* gff_perc = gff->add_subcommand("percolate", "survival of the level-set cluster of the root");
    gff_perc->set_help_flag("--help", "print this help message and exit");
    gff_perc->add_option("--h", o.h, "level");
    gff_perc->add_option("--N", o.N, "replicas");
    gff_perc->add_option("--depths", o.depths, "depth schedule");
    gff_perc->add_option("--horizon", o.horizon, "bracketing depth for the conductances");
    gff_perc->add_flag("--quenched", o.quenched, "one tree for all replicas");

    auto* ri_sample = ri->add_subcommand("sample", "interlacements on the ball of depth D");
    ri_sample->add_option("--u", o.u, "level");
    ri_sample->add_option("--D", o.D, "depth");
    auto* ri_perc = ri->add_subcommand("percolate", "survival of the root cluster of I^u with marks below p");
    ri_perc->add_option("--u", o.u, "level");
    ri_perc->add_option("--p", o.p, "mark probability");
    ri_perc->add_option("--N", o.N, "replicas");
    ri_perc->add_option("--depths", o.depths, "depth schedule");

    auto* ws_run = watershed->add_subcommand("run", "one watershed below x");
    ws_run->add_option("--x", o.x, "start vertex (default 1)");
    ws_run->add_option("--kappa", o.kappa, "edge from x to its parent");
    ws_run->add_option("--L", o.L, "distinct vertices");
    auto* ws_couple = watershed->add_subcommand("couple", "grow the free-point tree and check the coupling");
    ws_couple->add_option("--u", o.u, "level");
    ws_couple->add_option("--L", o.L, "watershed size");
    ws_couple->add_option("--budget", o.budget, "watersheds grown");

    auto* scan = threshold->add_subcommand("scan", "bisection of the survival frequency against the cut");
    scan->add_option("--model", o.model, "bernoulli, gff or ri");
    scan->add_option("--lo", o.lo, "scan range low end");
    scan->add_option("--hi", o.hi, "scan range high end");
    scan->add_option("--N", o.N, "replicas");
    scan->add_option("--depths", o.depths, "depth schedule");
    scan->add_option("--cut", o.cut, "survival cut");
    scan->add_option("--u", o.u, "interlacement level (ri)");
    scan->add_option("--horizon", o.horizon, "bracketing depth (gff)");
    scan->add_flag("--quenched", o.quenched, "one tree for all replicas");

    auto* iso_check = iso->add_subcommand("check", "marginal identity and sign inclusion");
    iso_check->add_option("--u", o.u, "level");
    iso_check->add_option("--vertices", o.vertices, "vertices (Ulam-Harris words)");
    iso_check->add_option("--n", o.N, "samples");
    iso_check->add_option("--p", o.p, "mark probability for the sign check");
    iso_check->add_option("--sign-reps", o.sign_reps, "realizations for the sign check (0 skips it)");
    iso_check->add_option("--sign-depth", o.sign_depth, "ball depth for the sign check");

    for (auto* g : app.get_subcommands({}))
        for (auto* c : g->get_subcommands({}))
            c->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        return dispatch(app, o, seed_opt->count() > 0);
    } catch (const ConfigError& e) {
        std::cerr << "treeperc: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "treeperc: invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const UnconvergedError& e) {
        std::cerr << "treeperc: refused: " << e.what() << "\n";
        return 3;
    } catch (const ContractViolation& e) {
        std::cerr << "treeperc: contract violation: " << e.what() << "\n";
        return 4;
    }
}
