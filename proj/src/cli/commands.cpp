#include "gradflow/cli.hpp"

#include "gradflow/eval.hpp"
#include "gradflow/tiling.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace gradflow::cli {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

// Record of what a command read and wrote, for the provenance log.
struct RunLog {
    std::string command;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
};

void write_provenance(const PipelineConfig& cfg, const RunLog& log, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << "# gradflow provenance\n";
    os << "tool = gradflow " << kToolVersion << '\n';
    os << "format_version = " << static_cast<int>(kFormatVersion) << '\n';
    os << "compiler = " << __VERSION__ << '\n';
    os << "command = " << log.command << "\n\n[config]\n";
    cfg.write(os);
    os << "\n[inputs]\n";
    for (const auto& p : log.inputs) os << p.generic_string() << " sha256=" << file_sha256(p) << '\n';
    os << "\n[outputs]\n";
    for (const auto& p : log.outputs) os << p.generic_string() << " sha256=" << file_sha256(p) << '\n';
    os.flush();
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void finish(const PipelineConfig& cfg, const RunLog& log) {
    std::filesystem::path target;
    if (cfg.has("provenance"))
        target = cfg.get("provenance");
    else if (!log.outputs.empty())
        target = log.outputs.front().string() + ".provenance.txt";
    else
        return;
    write_provenance(cfg, log, target);
}

void write_labels(const std::filesystem::path& path, const LabelVolume& labels) {
    write_volume(path, Volume(static_cast<const Array<std::uint32_t>&>(labels)));
}

void ensure_parent(const std::filesystem::path& p) {
    const auto parent = p.parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

void cmd_synth(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"synth", {}, {}};
    const auto spec = cfg.phantom_spec();
    const auto dst = cfg.path("out");
    const Phantom ph = generate_phantom(spec, cfg.threads());
    ensure_parent(dst);
    write_labels(dst, ph.labels);
    log.outputs.push_back(dst);
    if (cfg.has("image")) {
        ensure_parent(cfg.path("image"));
        write_volume(cfg.path("image"), Volume(ph.image));
        log.outputs.push_back(cfg.path("image"));
    }
    out << "synth: " << spec.cell_count << " cells in " << to_string(spec.dims) << " -> " << dst.string() << '\n';
    finish(cfg, log);
}

void cmd_encode(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"encode", {}, {}};
    const auto src = cfg.has("labels") ? cfg.path("labels") : cfg.path("in");
    if (!cfg.has("out") && !cfg.has("prediction"))
        throw ConfigError("missing required --out (gradient field) or --prediction (4-channel output)");
    const auto kind = cfg.encoding();
    const auto params = cfg.encode_params();
    params.validate();

    const LabelVolume labels = to_labels(read_volume(src));
    log.inputs.push_back(src);
    const GradientField field = encode_gradients(labels, kind, params, cfg.threads());
    const ForegroundMap fg = encode_foreground(labels);

    if (cfg.has("out")) {
        write_volume(cfg.path("out"), Volume(static_cast<const Array<float>&>(field)));
        log.outputs.push_back(cfg.path("out"));
    }
    if (cfg.has("foreground")) {
        write_volume(cfg.path("foreground"), Volume(static_cast<const Array<float>&>(fg)));
        log.outputs.push_back(cfg.path("foreground"));
    }
    if (cfg.has("prediction")) {
        Array<float> combined(labels.dims(), 4);
        std::copy(fg.data().begin(), fg.data().end(), combined.channel(0).begin());
        for (std::size_t c = 0; c < 3; ++c)
            std::copy(field.channel(c).begin(), field.channel(c).end(), combined.channel(c + 1).begin());
        write_volume(cfg.path("prediction"), Volume(std::move(combined)));
        log.outputs.push_back(cfg.path("prediction"));
    }
    out << "encode: " << encoding_name(kind) << " field for " << to_string(labels.dims()) << '\n';
    finish(cfg, log);
}

void cmd_reconstruct(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"reconstruct", {}, {}};
    const auto rparams = cfg.reconstruction_params();
    const auto fparams = cfg.filter_params();
    const auto eparams = cfg.encode_params();
    const auto dst = cfg.path("out");

    GradientField field;
    ForegroundMap fg;
    if (cfg.has("prediction")) {
        const auto p = to_float(read_volume(cfg.path("prediction")));
        log.inputs.push_back(cfg.path("prediction"));
        if (p.channels() != 4)
            throw ValidationError("prediction must have 4 channels (fg, gx, gy, gz), got " +
                                  std::to_string(p.channels()));
        fg = ForegroundMap(slice_channels(p, 0, 1));
        field = GradientField(slice_channels(p, 1, 3));
    } else {
        field = GradientField(to_float(read_volume(cfg.path("field"))));
        fg = ForegroundMap(to_float(read_volume(cfg.path("foreground"))));
        log.inputs.push_back(cfg.path("field"));
        log.inputs.push_back(cfg.path("foreground"));
    }

    const FilterResult result = reconstruct_pipeline(field, fg, rparams, fparams, eparams, cfg.threads());
    write_labels(dst, result.labels);
    log.outputs.push_back(dst);
    if (cfg.has("report")) {
        std::ofstream os(cfg.path("report"), std::ios::trunc);
        if (!os) throw IoError("cannot open '" + cfg.get("report") + "' for writing");
        write_disposition_table(os, result.report);
        os.flush();
        if (!os) throw IoError("write failed for '" + cfg.get("report") + "'");
        log.outputs.push_back(cfg.path("report"));
    }
    const auto kept = std::count_if(result.report.begin(), result.report.end(),
                                    [](const auto& r) { return r.fate == Fate::Kept; });
    out << "reconstruct: " << result.report.size() << " candidates, " << kept << " kept\n";
    finish(cfg, log);
}

void cmd_eval(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"eval", {cfg.path("gt"), cfg.path("pred")}, {}};
    const LabelVolume gt = to_labels(read_volume(cfg.path("gt")));
    const LabelVolume pred = to_labels(read_volume(cfg.path("pred")));
    const auto reports = match_and_dice(gt, pred);
    const ScoreSummary summary = summarize(reports);
    if (cfg.has("out")) {
        std::ofstream os(cfg.path("out"), std::ios::trunc);
        if (!os) throw IoError("cannot open '" + cfg.get("out") + "' for writing");
        write_report_csv(os, reports);
        os.flush();
        if (!os) throw IoError("write failed for '" + cfg.get("out") + "'");
        log.outputs.push_back(cfg.path("out"));
    }
    if (cfg.has("summary")) {
        std::ofstream os(cfg.path("summary"), std::ios::trunc);
        if (!os) throw IoError("cannot open '" + cfg.get("summary") + "' for writing");
        write_summary(os, summary);
        os.flush();
        if (!os) throw IoError("write failed for '" + cfg.get("summary") + "'");
        log.outputs.push_back(cfg.path("summary"));
    }
    write_summary(out, summary);
    out << "matched = " << matched_fraction(reports) << '\n';
    finish(cfg, log);
}

void cmd_tile_plan(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"tile-plan", {cfg.path("in")}, {}};
    const auto dir = cfg.path("out_dir");
    const Volume v = read_volume(cfg.path("in"));
    TileManifest m;
    m.grid = plan_tiles(v.dims(), cfg.patch_dims(), cfg.overlap());
    for (const auto& w : m.grid.warnings) out << "warning: " << w << '\n';

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    const auto manifest = cfg.has("manifest") ? cfg.path("manifest") : dir / "manifest.txt";
    const auto manifest_dir = manifest.parent_path().empty() ? std::filesystem::path(".") : manifest.parent_path();

    for (std::size_t i = 0; i < m.grid.origins.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "tile_%04zu.gf3d", i);
        const auto tile_path = dir / name;
        write_volume(tile_path, extract_patch(v, m.grid.origins[i], m.grid.patch_dims));
        ManifestTile t;
        t.index = i;
        t.origin = m.grid.origins[i];
        t.input = std::filesystem::proximate(tile_path, manifest_dir);
        m.tiles.push_back(std::move(t));
        log.outputs.push_back(tile_path);
    }
    write_manifest(manifest, m);
    log.outputs.insert(log.outputs.begin(), manifest);
    out << "tile-plan: " << m.tiles.size() << " tiles of " << to_string(m.grid.patch_dims) << " -> "
        << manifest.string() << '\n';
    finish(cfg, log);
}

void cmd_merge(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"merge", {cfg.path("manifest")}, {}};
    const auto dst = cfg.path("out");
    const TileManifest m = read_manifest(cfg.path("manifest"));
    std::vector<Array<float>> patches;
    patches.reserve(m.tiles.size());
    for (const auto& t : m.tiles) {
        const auto& src = t.prediction.empty() ? t.input : t.prediction;
        patches.push_back(to_float(read_volume(src)));
        log.inputs.push_back(src);
    }
    write_volume(dst, Volume(merge_tiles(m.grid, patches)));
    log.outputs.push_back(dst);
    out << "merge: " << patches.size() << " tiles -> " << dst.string() << '\n';
    finish(cfg, log);
}

void cmd_info(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"info", {cfg.path("in")}, {}};
    const auto src = cfg.path("in");
    const VolumeHeader h = read_header(src);
    const Volume v = read_volume(src);
    out << "path: " << src.string() << '\n'
        << "format: GF3D v" << static_cast<int>(h.version) << '\n'
        << "dtype: " << dtype_name(h.dtype) << '\n'
        << "channels: " << h.channels << '\n'
        << "dims: " << h.dims.nx << ' ' << h.dims.ny << ' ' << h.dims.nz << '\n';
    const Array<float> f = to_float(v);
    for (std::size_t c = 0; c < f.channels(); ++c) {
        const auto ch = f.channel(c);
        const auto [lo, hi] = std::minmax_element(ch.begin(), ch.end());
        out << "channel " << c << ": min " << *lo << " max " << *hi << '\n';
    }
    finish(cfg, log);
}

void cmd_import_raw(const PipelineConfig& cfg, std::ostream& out) {
    RunLog log{"import-raw", {cfg.path("in")}, {}};
    const auto dst = cfg.path("out");
    if (!cfg.has("raw_dims")) throw ConfigError("missing required --raw_dims");
    const auto channels = static_cast<std::size_t>(std::stoul(cfg.get("raw_channels")));
    const Volume v = import_raw(cfg.path("in"), cfg.raw_dims(), channels, parse_dtype(cfg.get("raw_dtype")));
    write_volume(dst, v);
    log.outputs.push_back(dst);
    out << "import-raw: " << to_string(v.dims()) << " x" << v.channels() << ' ' << dtype_name(v.dtype()) << " -> "
        << dst.string() << '\n';
    finish(cfg, log);
}

}  // namespace

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for checksum");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto fail = [&](int code, std::string_view kind, const std::string& msg) {
        err << "error: code=" << code << " kind=" << kind << " message=" << one_line(msg) << '\n';
        return code;
    };

    CLI::App app{"gradflow: 3D gradient-flow instance segmentation toolkit", "gradflow"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "flat 'key = value' config file; flags override it");

    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> flags;
    for (const auto& k : config_keys()) {
        std::string name = "--" + std::string(k.key);
        std::string dashed = name;
        std::replace(dashed.begin() + 2, dashed.end(), '_', '-');
        if (dashed != name) name += "," + dashed;
        flags[std::string(k.key)] =
            app.add_option(name, flag_values[std::string(k.key)], std::string(k.help))->group("Pipeline");
    }

    using Handler = void (*)(const PipelineConfig&, std::ostream&);
    const std::vector<std::tuple<const char*, const char*, Handler>> commands{
        {"synth", "generate a Voronoi phantom and pseudo-image", cmd_synth},
        {"encode", "encode labels into foreground and gradient maps", cmd_encode},
        {"reconstruct", "trace gradients, label sinks and filter instances", cmd_reconstruct},
        {"eval", "per-instance Dice against ground truth", cmd_eval},
        {"tile-plan", "split a volume into overlapping tiles plus a manifest", cmd_tile_plan},
        {"merge", "blend tile predictions listed in a manifest", cmd_merge},
        {"info", "print a GF3D header and value ranges", cmd_info},
        {"import-raw", "wrap a headerless raw array as GF3D", cmd_import_raw},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, handler] : commands) subs.push_back(app.add_subcommand(name, help));

    std::vector<const char*> argv{"gradflow"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        return fail(kBadArgs, "bad_args", e.what());
    }

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& [key, opt] : flags)
            if (opt->count() > 0) cfg.set(key, flag_values[key]);
        cfg.validate();
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) std::get<2>(commands[i])(cfg, out);
        return kOk;
    } catch (const ConfigError& e) {
        return fail(kBadArgs, "bad_args", e.what());
    } catch (const IoError& e) {
        return fail(kIoFailure, "io", e.what());
    } catch (const ValidationError& e) {
        return fail(kValidation, "validation", e.what());
    } catch (const std::exception& e) {
        return fail(kInternal, "internal", e.what());
    }
}

}  // namespace gradflow::cli
