#pragma once

#include "minsurro/train/dataset.hpp"
#include "minsurro/train/trainer.hpp"

#include <filesystem>
#include <iosfwd>

namespace minsurro {

/// CSV with header x0.., p0.., f, [g0..], [lam0..], is_optimal. A row
/// without a gradient or multipliers leaves those cells empty.
void write_dataset(const Dataset& data, std::ostream& out);
void write_dataset(const Dataset& data, const std::filesystem::path& path);

/// Optional groups are detected from the header. Throws DataError naming
/// the row (1-based, header excluded) or the missing column.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

/// epoch,loss_total,loss_fit,reg1,reg2
void write_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

} // namespace minsurro
