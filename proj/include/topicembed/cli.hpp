#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace topicembed {

// Dispatches train / eval / export / lda.  Returns the process exit code:
// 0 on success, 1 on usage or validation errors, 2 on runtime failures.
// Error text is categorized ("config error:", "parse error:", "io error:").
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topicembed
