#include "pinnsearch/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pinnsearch/errors.hpp"
#include "pinnsearch/rng.hpp"

namespace pinnsearch::data {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& token, std::size_t line) {
    char* end = nullptr;
    double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
        throw ParseError("not a number: '" + token + "'", line);
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream is(line);
    while (std::getline(is, token, ',')) out.push_back(token);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

std::vector<physics::OperatingPoint> default_ops(double duty, double f_s) {
    std::vector<physics::OperatingPoint> ops;
    for (int load = 1; load <= 3; ++load) {
        ops.push_back(physics::OperatingPoint{duty, f_s, load});
    }
    return ops;
}

Dataset generate_synthetic(const physics::PhysParams& true_params,
                           const std::vector<physics::OperatingPoint>& ops,
                           std::size_t samples_per_op, double noise_rel, std::uint64_t seed,
                           std::size_t sim_substeps, std::size_t max_cycles) {
    Dataset ds;
    ds.ground_truth = true_params;
    std::ostringstream prov;
    prov << "synthetic seed=" << seed << " noise_rel=" << noise_rel
         << " samples_per_op=" << samples_per_op;
    ds.provenance = prov.str();

    for (std::size_t k = 0; k < ops.size(); ++k) {
        const auto& op = ops[k];
        physics::SteadyState ss =
            physics::run_to_steady_state(true_params, op, sim_substeps, max_cycles);
        // Per-op noise stream, so adding operating points never reshuffles
        // the noise of earlier ones.
        Rng rng(stable_hash(seed, k));
        for (std::size_t s = 0; s < samples_per_op; ++s) {
            Sample sample;
            sample.op = op;
            sample.i_peak = ss.peaks.i_peak +
                            noise_rel * std::fabs(ss.peaks.i_peak) * rng.gauss();
            sample.u_peak = ss.peaks.u_peak +
                            noise_rel * std::fabs(ss.peaks.u_peak) * rng.gauss();
            ds.samples.push_back(sample);
        }
    }
    return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    out << "sample_id,i_peak,u_peak,load_index,duty,f_s\n";
    for (std::size_t k = 0; k < dataset.samples.size(); ++k) {
        const Sample& s = dataset.samples[k];
        out << k << ',' << fmt17(s.i_peak) << ',' << fmt17(s.u_peak) << ',' << s.op.load_index
            << ',' << fmt17(s.op.duty) << ',' << fmt17(s.op.f_s) << '\n';
    }
    if (!out) throw IoError("write failed", path.string());
    if (dataset.ground_truth) {
        save_truth(*dataset.ground_truth, truth_path(path));
    }
}

std::filesystem::path truth_path(const std::filesystem::path& dataset_path) {
    std::filesystem::path p = dataset_path;
    p.replace_extension(".truth");
    return p;
}

void save_truth(const physics::PhysParams& params, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    const auto& names = physics::PhysParams::names();
    for (int j = 0; j < physics::kNumParams; ++j) {
        out << names[j] << " = " << fmt17(params[j]) << '\n';
    }
    if (!out) throw IoError("write failed", path.string());
}

physics::PhysParams load_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open", path.string());
    physics::PhysParams params;
    std::array<bool, physics::kNumParams> seen{};
    std::string line;
    std::size_t line_no = 0;
    const auto& names = physics::PhysParams::names();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'name = value'", line_no);
        std::string name = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t\r");
            s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
        };
        trim(name);
        trim(value);
        bool matched = false;
        for (int j = 0; j < physics::kNumParams; ++j) {
            if (name == names[j]) {
                params[j] = parse_double(value, line_no);
                seen[j] = true;
                matched = true;
                break;
            }
        }
        if (!matched) throw ParseError("unknown parameter '" + name + "'", line_no);
    }
    for (int j = 0; j < physics::kNumParams; ++j) {
        if (!seen[j]) throw MissingColumnError(std::string(names[j]));
    }
    return params;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open", path.string());

    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty file", 1);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const std::vector<std::string> expected = {"sample_id", "i_peak",      "u_peak",
                                               "load_index", "duty", "f_s"};
    std::vector<std::string> cols = split_csv(header);
    for (const auto& name : expected) {
        if (std::find(cols.begin(), cols.end(), name) == cols.end()) {
            throw MissingColumnError(name);
        }
    }
    std::array<std::size_t, 6> idx{};
    for (std::size_t j = 0; j < expected.size(); ++j) {
        idx[j] = static_cast<std::size_t>(
            std::find(cols.begin(), cols.end(), expected[j]) - cols.begin());
    }

    Dataset ds;
    ds.provenance = "loaded from " + path.string();
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv(line);
        if (fields.size() != cols.size()) {
            throw ParseError("expected " + std::to_string(cols.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        Sample s;
        s.i_peak = parse_double(fields[idx[1]], line_no);
        s.u_peak = parse_double(fields[idx[2]], line_no);
        double load = parse_double(fields[idx[3]], line_no);
        s.op.load_index = static_cast<int>(load);
        if (s.op.load_index < 1 || s.op.load_index > 3) {
            throw ParseError("load_index must be 1, 2 or 3", line_no);
        }
        s.op.duty = parse_double(fields[idx[4]], line_no);
        s.op.f_s = parse_double(fields[idx[5]], line_no);
        ds.samples.push_back(s);
    }

    std::filesystem::path truth = truth_path(path);
    if (std::filesystem::exists(truth)) {
        ds.ground_truth = load_truth(truth);
    }
    return ds;
}

InputStats input_stats(const Dataset& dataset) {
    if (dataset.size() < 2) {
        throw TooFewSamplesError("need at least 2 samples for input statistics");
    }
    const double n = static_cast<double>(dataset.size());
    InputStats st;
    for (const Sample& s : dataset.samples) {
        st.mean[0] += s.i_peak;
        st.mean[1] += s.u_peak;
    }
    st.mean[0] /= n;
    st.mean[1] /= n;
    for (const Sample& s : dataset.samples) {
        st.stddev[0] += (s.i_peak - st.mean[0]) * (s.i_peak - st.mean[0]);
        st.stddev[1] += (s.u_peak - st.mean[1]) * (s.u_peak - st.mean[1]);
    }
    for (int f = 0; f < 2; ++f) {
        st.stddev[f] = std::sqrt(st.stddev[f] / n);
        if (st.stddev[f] <= 0.0) {
            std::fprintf(stderr, "warning: zero variance in feature %d, clamping std to 1\n", f);
            st.stddev[f] = 1.0;
        }
    }
    return st;
}

}  // namespace pinnsearch::data
