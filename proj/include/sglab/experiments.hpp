#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sglab::experiments {

using nlohmann::json;

/// Invalid run configuration; the message starts with the offending key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Applies `dotted.key=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise; intermediate objects are created.
json apply_override(json config, std::string_view assignment);

/// Stable 16-hex-digit FNV-1a hash of the canonical config dump.
std::string config_hash(const json& config);

/// `<root>/<command>-<hash>`; root defaults to $SGLAB_OUTPUT_ROOT, else "runs".
std::filesystem::path run_directory(std::string_view command, const json& config,
                                    const std::filesystem::path& root = {});

/// Each command validates `config` strictly, writes its files under `out_dir`
/// and returns the summary it also writes as summary.json.
json cmd_diffuse(const json& config, const std::filesystem::path& out_dir);
json cmd_spectrum(const json& config, const std::filesystem::path& out_dir);
json cmd_ctmc(const json& config, const std::filesystem::path& out_dir);
json cmd_sweep(const json& config, const std::filesystem::path& out_dir);
json cmd_gen_graph(const json& config, const std::filesystem::path& out_dir);

json run_command(std::string_view command, const json& config, const std::filesystem::path& out_dir);

const std::vector<std::string>& command_names();

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal standalone SVG line chart.
void write_line_plot_svg(const std::filesystem::path& path, std::string_view title, std::string_view x_label,
                         std::string_view y_label, const std::vector<PlotSeries>& series);

}  // namespace sglab::experiments
