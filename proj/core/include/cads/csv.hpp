#pragma once

#include <filesystem>
#include <vector>

#include "cads/gmm.hpp"
#include "cads/sampler.hpp"

namespace cads {

// CSV dialect: comma separators, Unix newlines, mandatory header row,
// coordinates printed with 17 significant digits (round-trip exact).

// header: label,chain,x0,x1
void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<ChainResult>& results);
std::vector<ChainResult> read_samples_csv(const std::filesystem::path& path);

// header: label,x0,x1
void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> read_dataset_csv(const std::filesystem::path& path);

}  // namespace cads
