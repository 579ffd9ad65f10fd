#pragma once

#include "canica/dataio.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace canica::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Report fields that legitimately differ between identical runs.
inline const std::vector<std::string> kNondeterministicFields = {"timings_ms"};

/// Subject files in `data_dir` matching sub-*.canmat, sorted by name, with
/// mask.canmat applied when present, standardized.
std::vector<SubjectDataset> load_subjects(const std::filesystem::path& data_dir);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace canica::cli
