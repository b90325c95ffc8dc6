// Acceptance harness: one pass/fail line per criterion. Run with criterion
// names as arguments, or "all" (the default) for the full battery.

#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "criteria.hpp"

namespace {

using acceptance::CriterionResult;

struct Entry {
    const char* name;
    std::function<CriterionResult()> fn;
};

const std::vector<Entry>& registry()
{
    static const std::vector<Entry> entries = {
        {"geweke", acceptance::run_geweke},
        {"conditionals", acceptance::run_conditionals},
        {"mh_target", acceptance::run_mh_target},
        {"identification", acceptance::run_identification},
        {"insample", acceptance::run_insample},
        {"missing", acceptance::run_missing},
        {"oos", acceptance::run_oos},
        {"spline_algebra", acceptance::run_spline_algebra},
        {"determinism", acceptance::run_determinism},
    };
    return entries;
}

int run_one(const Entry& e)
{
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
        r = e.fn();
    } catch (const std::exception& ex) {
        r.pass = false;
        r.detail = std::string("exception: ") + ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s (%.1fs) %s\n", r.pass ? "PASS" : "FAIL", e.name, secs, r.detail.c_str());
    std::fflush(stdout);
    return r.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> wanted;
    for (int i = 1; i < argc; ++i) wanted.emplace_back(argv[i]);
    if (wanted.empty() || (wanted.size() == 1 && wanted[0] == "all")) {
        wanted.clear();
        for (const auto& e : registry()) wanted.push_back(e.name);
    }

    int failures = 0;
    for (const std::string& name : wanted) {
        bool found = false;
        for (const auto& e : registry()) {
            if (name == e.name) {
                failures += run_one(e);
                found = true;
                break;
            }
        }
        if (!found) {
            std::printf("FAIL %s (unknown criterion)\n", name.c_str());
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}
