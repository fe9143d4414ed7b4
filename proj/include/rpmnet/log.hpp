#pragma once

#include <spdlog/spdlog.h>

namespace rpmnet {

/// Process-wide stderr logger. Verbosity comes from RPMNET_LOG
/// (trace, debug, info, warn, error, critical, off; default info).
spdlog::logger& log();

}  // namespace rpmnet
