#include "pinnsearch/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pinnsearch/errors.hpp"

namespace pinnsearch::model_io {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_row_major(std::ofstream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (r != 0 || c != 0) out << ' ';
            out << fmt17(m(r, c));
        }
    }
    out << '\n';
}

std::vector<double> parse_numbers(const std::string& line, std::size_t expect,
                                  std::size_t line_no) {
    std::istringstream is(line);
    std::vector<double> values;
    values.reserve(expect);
    std::string token;
    while (is >> token) {
        char* end = nullptr;
        double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0') {
            throw ParseError("not a number: '" + token + "'", line_no);
        }
        values.push_back(v);
    }
    if (values.size() != expect) {
        throw ParseError("expected " + std::to_string(expect) + " values, got " +
                             std::to_string(values.size()),
                         line_no);
    }
    return values;
}

}  // namespace

void save_model(const SavedModel& saved, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    const auto& m = saved.model;
    out << kFormatTag << " v" << kFormatVersion << '\n';
    out << "arch " << saved.arch.encode() << '\n';
    out << "input_dim " << m.encoder.input_dim << '\n';
    out << "latent_dim " << m.encoder.latent_dim << '\n';
    out << "layers " << m.encoder.layers.size() << '\n';
    for (const auto& l : m.encoder.layers) {
        out << "layer " << (l.linear ? "linear" : net::to_string(l.act)) << ' ' << l.W.rows()
            << ' ' << l.W.cols() << '\n';
        out << "W ";
        write_row_major(out, l.W);
        out << "b ";
        write_row_major(out, l.b);
    }
    out << "log_scales ";
    for (int j = 0; j < physics::kNumParams; ++j) {
        out << (j ? " " : "") << fmt17(m.log_scales[j]);
    }
    out << '\n';
    out << "lambda_ref ";
    for (int j = 0; j < physics::kNumParams; ++j) {
        out << (j ? " " : "") << fmt17(m.lambda_ref[j]);
    }
    out << '\n';
    out << "input_mean " << fmt17(m.input_stats.mean[0]) << ' ' << fmt17(m.input_stats.mean[1])
        << '\n';
    out << "input_std " << fmt17(m.input_stats.stddev[0]) << ' '
        << fmt17(m.input_stats.stddev[1]) << '\n';
    out << "end\n";
    if (!out) throw IoError("write failed", path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open", path.string());

    std::size_t line_no = 0;
    auto next_line = [&](std::string_view what) {
        std::string line;
        if (!std::getline(in, line)) {
            throw ParseError("unexpected end of file, wanted " + std::string(what), line_no);
        }
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    auto expect_key = [&](const std::string& line, std::string_view key) {
        if (line.rfind(std::string(key) + " ", 0) != 0) {
            throw ParseError("expected '" + std::string(key) + " ...'", line_no);
        }
        return line.substr(key.size() + 1);
    };

    std::string header = next_line("header");
    {
        std::istringstream is(header);
        std::string tag, version;
        is >> tag >> version;
        if (tag != kFormatTag) {
            throw FormatError("not a model file: " + path.string());
        }
        if (version != "v" + std::to_string(kFormatVersion)) {
            throw FormatError("unsupported model version '" + version + "' in " + path.string() +
                              " (this build reads v" + std::to_string(kFormatVersion) + ")");
        }
    }

    SavedModel saved;
    saved.arch = net::ArchSpec::parse(expect_key(next_line("arch"), "arch"));
    saved.model.encoder.input_dim = std::stoi(expect_key(next_line("input_dim"), "input_dim"));
    saved.model.encoder.latent_dim = std::stoi(expect_key(next_line("latent_dim"), "latent_dim"));
    std::size_t n_layers =
        static_cast<std::size_t>(std::stoul(expect_key(next_line("layers"), "layers")));

    for (std::size_t li = 0; li < n_layers; ++li) {
        std::string meta = expect_key(next_line("layer"), "layer");
        std::istringstream is(meta);
        std::string act_name;
        Eigen::Index rows = 0, cols = 0;
        if (!(is >> act_name >> rows >> cols) || rows <= 0 || cols <= 0) {
            throw ParseError("bad layer header '" + meta + "'", line_no);
        }
        net::Layer layer;
        if (act_name == "linear") {
            layer.linear = true;
        } else {
            layer.act = net::activation_from_string(act_name);
        }
        auto w_values = parse_numbers(expect_key(next_line("W"), "W"),
                                      static_cast<std::size_t>(rows * cols), line_no);
        layer.W.resize(rows, cols);
        std::size_t at = 0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) layer.W(r, c) = w_values[at++];
        }
        auto b_values = parse_numbers(expect_key(next_line("b"), "b"),
                                      static_cast<std::size_t>(cols), line_no);
        layer.b.resize(cols);
        for (Eigen::Index c = 0; c < cols; ++c) layer.b[c] = b_values[static_cast<std::size_t>(c)];
        saved.model.encoder.layers.push_back(std::move(layer));
    }

    auto scales = parse_numbers(expect_key(next_line("log_scales"), "log_scales"),
                                physics::kNumParams, line_no);
    for (int j = 0; j < physics::kNumParams; ++j) saved.model.log_scales[j] = scales[j];
    auto ref = parse_numbers(expect_key(next_line("lambda_ref"), "lambda_ref"),
                             physics::kNumParams, line_no);
    for (int j = 0; j < physics::kNumParams; ++j) saved.model.lambda_ref[j] = ref[j];
    auto mean = parse_numbers(expect_key(next_line("input_mean"), "input_mean"), 2, line_no);
    saved.model.input_stats.mean = {mean[0], mean[1]};
    auto stddev = parse_numbers(expect_key(next_line("input_std"), "input_std"), 2, line_no);
    saved.model.input_stats.stddev = {stddev[0], stddev[1]};
    if (next_line("end") != "end") throw ParseError("missing end marker", line_no);

    // Cross-check the realized shapes against the declared arch.
    if (net::param_count(saved.arch, saved.model.encoder.input_dim,
                         saved.model.encoder.latent_dim) !=
        saved.model.encoder.scalar_count()) {
        throw FormatError("layer shapes do not match the declared architecture in " +
                          path.string());
    }
    return saved;
}

}  // namespace pinnsearch::model_io
