#include "gradflow/cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <ostream>

namespace gradflow::cli {

namespace {

constexpr KeySpec kKeys[] = {
    {"threads", "0", "worker threads, 0 = one per hardware thread"},
    // encoding
    {"encoding", "tanh", "gradient encoding: tanh or heat"},
    {"alpha", "3.0", "tanh steepness"},
    {"n_diff_factor", "2", "heat iterations per voxel of max cell extent"},
    {"use_log_heat", "true", "differentiate log(1 + heat)"},
    // reconstruction
    {"s_recon", "4", "tracing step scale"},
    {"n_recon", "100", "tracing iterations"},
    {"r_closing", "3", "closing ball radius, voxels"},
    {"fg_threshold", "0.5", "foreground probability threshold"},
    {"connectivity", "26", "sink component connectivity, 6 or 26"},
    // filtering
    {"r_min", "5", "minimum equivalent-sphere radius, voxels"},
    {"r_max", "100", "maximum equivalent-sphere radius, voxels"},
    {"p_overlap", "0.2", "minimum foreground overlap ratio"},
    {"err_gradient", "0.8", "maximum mean absolute flow error"},
    // tiling
    {"patch_dims", "128,128,64", "tile size x,y,z"},
    {"overlap", "32,32,16", "tile overlap x,y,z"},
    // phantom
    {"dims", "64,64,64", "phantom size x,y,z"},
    {"cells", "50", "phantom cell count"},
    {"seed", "1", "phantom RNG seed"},
    {"min_seed_separation", "4", "minimum distance between phantom seeds"},
    {"membrane_width", "1", "pseudo-image membrane width"},
    {"noise_sigma", "0.1", "pseudo-image noise standard deviation"},
    {"margin", "0", "phantom background border width"},
    // raw import
    {"raw_dims", "", "raw file size x,y,z"},
    {"raw_channels", "1", "raw file channel count"},
    {"raw_dtype", "float32", "raw file dtype"},
    // paths
    {"in", "", "input volume"},
    {"out", "", "primary output"},
    {"image", "", "pseudo-image output (synth)"},
    {"labels", "", "label volume input (encode)"},
    {"field", "", "3-channel gradient field"},
    {"foreground", "", "foreground map"},
    {"prediction", "", "4-channel volume: fg, gx, gy, gz"},
    {"gt", "", "ground-truth labels (eval)"},
    {"pred", "", "predicted labels (eval)"},
    {"manifest", "", "tile manifest"},
    {"out_dir", "", "tile output directory"},
    {"report", "", "instance disposition table (reconstruct)"},
    {"summary", "", "score summary (eval)"},
    {"provenance", "", "provenance log, default <out>.provenance.txt"},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, std::string_view expected) {
    throw ConfigError("invalid value '" + value + "' for " + std::string(key) + " (expected " +
                      std::string(expected) + ")");
}

long long to_int(std::string_view key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) bad_value(key, v, "an integer");
    return out;
}

std::size_t to_count(std::string_view key, const std::string& v) {
    const long long n = to_int(key, v);
    if (n < 0) bad_value(key, v, "a non-negative integer");
    return static_cast<std::size_t>(n);
}

double to_double(std::string_view key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) bad_value(key, v, "a number");
        return d;
    } catch (const std::logic_error&) {
        bad_value(key, v, "a number");
    }
}

bool to_bool(std::string_view key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "true or false");
}

Dims to_dims(std::string_view key, const std::string& v) {
    std::string s = v;
    std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == 'x' || c == '\t'; }, ' ');
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto b = s.find_first_not_of(' ', pos);
        if (b == std::string::npos) break;
        const auto e = s.find(' ', b);
        parts.push_back(s.substr(b, e == std::string::npos ? std::string::npos : e - b));
        pos = e == std::string::npos ? s.size() : e;
    }
    if (parts.size() != 3) bad_value(key, v, "three integers such as 64,64,32");
    return {to_count(key, parts[0]), to_count(key, parts[1]), to_count(key, parts[2])};
}

}  // namespace

std::span<const KeySpec> config_keys() { return kKeys; }

PipelineConfig::PipelineConfig() {
    for (const auto& k : kKeys) values_.emplace(std::string(k.key), std::string(k.default_value));
}

void PipelineConfig::set(std::string_view key, std::string value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    it->second = std::move(value);
}

const std::string& PipelineConfig::get(std::string_view key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    return it->second;
}

std::filesystem::path PipelineConfig::path(std::string_view key) const {
    const auto& v = get(key);
    if (v.empty()) throw ConfigError("missing required --" + std::string(key));
    return v;
}

void PipelineConfig::load_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config '" + file.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (values_.find(key) == values_.end())
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": unknown configuration key '" + key +
                              "'");
        set(key, trim(std::string_view(line).substr(eq + 1)));
    }
}

unsigned PipelineConfig::threads() const { return static_cast<unsigned>(to_count("threads", get("threads"))); }

EncodingKind PipelineConfig::encoding() const {
    const auto& v = get("encoding");
    if (v != "tanh" && v != "heat") bad_value("encoding", v, "tanh or heat");
    return parse_encoding(v);
}

EncodeParams PipelineConfig::encode_params() const {
    EncodeParams p;
    p.alpha = to_double("alpha", get("alpha"));
    p.n_diff_factor = to_double("n_diff_factor", get("n_diff_factor"));
    p.use_log_heat = to_bool("use_log_heat", get("use_log_heat"));
    return p;
}

ReconstructionParams PipelineConfig::reconstruction_params() const {
    ReconstructionParams p;
    p.s_recon = static_cast<int>(to_int("s_recon", get("s_recon")));
    p.n_recon = static_cast<int>(to_int("n_recon", get("n_recon")));
    p.r_closing = static_cast<int>(to_int("r_closing", get("r_closing")));
    p.fg_threshold = to_double("fg_threshold", get("fg_threshold"));
    p.connectivity = static_cast<int>(to_int("connectivity", get("connectivity")));
    return p;
}

FilterParams PipelineConfig::filter_params() const {
    FilterParams p;
    p.r_min = to_double("r_min", get("r_min"));
    p.r_max = to_double("r_max", get("r_max"));
    p.p_overlap = to_double("p_overlap", get("p_overlap"));
    p.err_gradient = to_double("err_gradient", get("err_gradient"));
    p.encoding = encoding();
    return p;
}

Dims PipelineConfig::patch_dims() const { return to_dims("patch_dims", get("patch_dims")); }
Dims PipelineConfig::overlap() const { return to_dims("overlap", get("overlap")); }

PhantomSpec PipelineConfig::phantom_spec() const {
    PhantomSpec s;
    s.dims = to_dims("dims", get("dims"));
    s.cell_count = to_count("cells", get("cells"));
    s.seed = static_cast<std::uint64_t>(to_count("seed", get("seed")));
    s.min_seed_separation = to_double("min_seed_separation", get("min_seed_separation"));
    s.membrane_width = to_count("membrane_width", get("membrane_width"));
    s.noise_sigma = to_double("noise_sigma", get("noise_sigma"));
    s.margin = to_count("margin", get("margin"));
    return s;
}

Dims PipelineConfig::raw_dims() const { return to_dims("raw_dims", get("raw_dims")); }

void PipelineConfig::validate() const {
    (void)threads();
    (void)encode_params();
    (void)reconstruction_params();
    (void)filter_params();
    (void)patch_dims();
    (void)overlap();
    (void)phantom_spec();
    (void)to_count("raw_channels", get("raw_channels"));
    if (has("raw_dims")) (void)raw_dims();
    try {
        (void)parse_dtype(get("raw_dtype"));
    } catch (const ValidationError&) {
        bad_value("raw_dtype", get("raw_dtype"), "float32, uint8, uint16 or uint32");
    }
}

void PipelineConfig::write(std::ostream& os) const {
    for (const auto& k : kKeys) os << k.key << " = " << get(k.key) << '\n';
}

}  // namespace gradflow::cli
