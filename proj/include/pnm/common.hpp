#pragma once

#include <cstdint>

namespace pnm {

/// Virtual (or scaled wall-clock) time, in whole time units.
using TimeUnits = std::int64_t;

using MachineId = std::uint64_t;
using ActionInstanceId = std::uint64_t;
using TicketId = std::uint64_t;

} // namespace pnm
