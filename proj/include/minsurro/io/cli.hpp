#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace minsurro {

/// Entry point of the minsurro tool. Returns 0 on success, 1 on a usage
/// error, 2 on a runtime failure. Settings come from an optional JSON file
/// (--config) overridden by flat `--key value` pairs.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace minsurro
