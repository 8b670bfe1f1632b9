#include "rgbx/log.hpp"

#include <mutex>

#include "rgbx/errors.hpp"

namespace rgbx::log {

namespace {
std::mutex g_mutex;
const char* tag(Level level) {
    switch (level) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
        default: return "off";
    }
}
} // namespace

Level& threshold() {
    static Level level = Level::Info;
    return level;
}

void set_threshold(Level level) { threshold() = level; }

Level parse_level(const std::string& name) {
    if (name == "debug") return Level::Debug;
    if (name == "info") return Level::Info;
    if (name == "warn") return Level::Warn;
    if (name == "error") return Level::Error;
    if (name == "off") return Level::Off;
    throw ConfigError("unknown log level: " + name);
}

void write(Level level, const std::string& message) {
    if (level < threshold()) return;
    std::scoped_lock lock(g_mutex);
    std::cerr << "[" << tag(level) << "] " << message << "\n";
}

} // namespace rgbx::log
