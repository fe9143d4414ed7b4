#include "rpmnet/log.hpp"

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

namespace rpmnet {

spdlog::logger& log() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
        auto logger = std::make_shared<spdlog::logger>("rpmnet", sink);
        logger->set_pattern("[%l] %v");
        const char* env = std::getenv("RPMNET_LOG");
        auto level = spdlog::level::info;
        if (env != nullptr) {
            level = spdlog::level::from_str(env);
            // from_str maps unrecognized names to off.
            if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
        }
        logger->set_level(level);
        return logger;
    }();
    return *instance;
}

}  // namespace rpmnet
