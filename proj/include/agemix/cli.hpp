#pragma once

#include "agemix/evaluation.hpp"

#include <cstdint>
#include <optional>
#include <filesystem>
#include <string>

namespace agemix::cli {

struct RunOptions {
    std::uint64_t seed = 1;
    int jobs = 1;
    ElpdMethod elpd = ElpdMethod::Psis;
    int draws = 4000;
    int folds = 10;
    std::size_t qq_samples = 10000;
    int knots = 5;
    double bandwidth = 2.0;
    std::filesystem::path config;  // optional JSON file, recorded in the manifest hash
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Each command returns 0 when every fit converged and every report was written.
int cmd_compare_distributions(const std::filesystem::path& data, const std::filesystem::path& out_dir,
                              const RunOptions& opts);
int cmd_compare_models(const std::filesystem::path& data, const std::filesystem::path& out_dir,
                       const RunOptions& opts);
int cmd_deheap(const std::filesystem::path& data, const std::filesystem::path& out, const RunOptions& opts);
/// A seed given explicitly overrides the one in the generator config.
int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& out,
                 std::optional<std::uint64_t> seed = std::nullopt);
int cmd_moments(const std::filesystem::path& data, const std::filesystem::path& out);

int run(int argc, char** argv);

}  // namespace agemix::cli
