#pragma once

#include <functional>
#include <string>

namespace liconf {

using WarningSink = std::function<void(const std::string&)>;

// Routes library warnings. The default sink writes "warning: <msg>" to stderr.
// Returns the previous sink so tests can restore it.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace liconf
