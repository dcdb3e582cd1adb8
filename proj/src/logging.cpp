#include "npcluster/logging.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace npcluster {

namespace {

std::mutex g_mutex;

void stderr_sink(LogLevel level, std::string_view message) {
    std::cerr << "[npcluster] " << (level == LogLevel::warning ? "warning: " : "") << message << '\n';
}

LogSink& sink() {
    static LogSink s = stderr_sink;
    return s;
}

}  // namespace

LogSink set_log_sink(LogSink next) {
    std::lock_guard lock(g_mutex);
    return std::exchange(sink(), next ? std::move(next) : LogSink(stderr_sink));
}

void log_message(LogLevel level, std::string_view message) {
    std::lock_guard lock(g_mutex);
    sink()(level, message);
}

}  // namespace npcluster
