#pragma once

#include <iosfwd>
#include <vector>

#include "copo/advantage.hpp"

namespace copo {

// The demonstrative five-prompt batch: prompt-level rewards
// [1/6, 1/6, 2/3, 1/2, 1/2]; prompt 3 has rewards [1,1,1,0,0,0] and
// answers [2,2,2,3,3,4] against truth 2.
std::vector<GroupOutcome> worked_example_batch();
inline constexpr std::size_t kWorkedExamplePrompt = 3;

// Replays the worked example and a quick invariant suite, printing one line
// per assertion. Returns true when everything passes.
bool run_check(std::ostream& out);

}  // namespace copo
