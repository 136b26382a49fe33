// SPDX-License-Identifier: Apache-2.0

#include "sparsid/core.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace sparsid {

LogLevel log_level() {
    static const LogLevel lvl = [] {
        const char* env = std::getenv("SPARSID_LOG");
        if (!env) return LogLevel::Error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        return LogLevel::Error;
    }();
    return lvl;
}

void log_msg(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    const char* tag = lvl == LogLevel::Error ? "error" : (lvl == LogLevel::Info ? "info" : "debug");
    std::fprintf(stderr, "[sparsid %s] %s\n", tag, msg.c_str());
}

}  // namespace sparsid
