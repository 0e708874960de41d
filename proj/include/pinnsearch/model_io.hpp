#pragma once

#include <filesystem>

#include "pinnsearch/network.hpp"
#include "pinnsearch/training.hpp"

namespace pinnsearch::model_io {

inline constexpr std::string_view kFormatTag = "pinnsearch-model";
inline constexpr int kFormatVersion = 1;

struct SavedModel {
    net::ArchSpec arch;
    train::PinnModel model;
};

/// Flat versioned text format: arch line, realized layer shapes, row-major
/// weight arrays at 17 significant digits, then log_scales / lambda_ref /
/// input statistics. Round-trips bit-exactly.
void save_model(const SavedModel& saved, const std::filesystem::path& path);

/// Throws FormatError on a version or shape mismatch, ParseError on
/// malformed content.
SavedModel load_model(const std::filesystem::path& path);

}  // namespace pinnsearch::model_io
