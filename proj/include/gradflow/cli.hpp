#pragma once

#include "gradflow/encode.hpp"
#include "gradflow/reconstruct.hpp"
#include "gradflow/synth.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gradflow::cli {

/// Malformed command line or config file: unknown key, unparsable value,
/// missing required path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kInternal = 1, kBadArgs = 2, kIoFailure = 3, kValidation = 4 };

struct KeySpec {
    std::string_view key;
    std::string_view default_value;
    std::string_view help;
};

/// Every recognised configuration key, in provenance order.
[[nodiscard]] std::span<const KeySpec> config_keys();

/// Flat "key = value" configuration. Defaults, then a config file, then
/// command-line flags; later sources win.
class PipelineConfig {
public:
    PipelineConfig();

    /// Lines "key = value"; '#' starts a comment. Unknown keys throw ConfigError.
    void load_file(const std::filesystem::path& path);
    void set(std::string_view key, std::string value);
    [[nodiscard]] const std::string& get(std::string_view key) const;
    [[nodiscard]] bool has(std::string_view key) const { return !get(key).empty(); }
    /// Throws ConfigError naming the key when it is empty.
    [[nodiscard]] std::filesystem::path path(std::string_view key) const;

    [[nodiscard]] unsigned threads() const;
    [[nodiscard]] EncodingKind encoding() const;
    [[nodiscard]] EncodeParams encode_params() const;
    [[nodiscard]] ReconstructionParams reconstruction_params() const;
    [[nodiscard]] FilterParams filter_params() const;
    [[nodiscard]] Dims patch_dims() const;
    [[nodiscard]] Dims overlap() const;
    [[nodiscard]] PhantomSpec phantom_spec() const;
    [[nodiscard]] Dims raw_dims() const;

    /// Parses every typed value once, so bad values fail before any work.
    void validate() const;
    void write(std::ostream& os) const;

private:
    std::map<std::string, std::string, std::less<>> values_;
};

/// Runs one command. Errors are reported as a single line on `err`:
///   error: code=<n> kind=<bad_args|io|validation|internal> message=<text>
[[nodiscard]] int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's contents.
[[nodiscard]] std::string file_sha256(const std::filesystem::path& path);

}  // namespace gradflow::cli
