#pragma once

#include <functional>
#include <string_view>

namespace svdkd {

using WarningHandler = std::function<void(std::string_view)>;

// Non-fatal conditions (single-modality identities, rank-deficient bases,
// degenerate SDM batches) are reported here. Default handler writes to stderr.
void warn(std::string_view message);

// Returns the previous handler. Passing an empty function restores the default.
WarningHandler set_warning_handler(WarningHandler handler);

}  // namespace svdkd
