#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace connlatent {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error taxonomy; the CLI maps these onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};
class ShapeError : public Error {
public:
    using Error::Error;
};
class DataError : public Error {
public:
    using Error::Error;
};
class ConfigError : public Error {
public:
    using Error::Error;
};
class TrainError : public Error {
public:
    using Error::Error;
};
class EvalError : public Error {
public:
    using Error::Error;
};

// Non-fatal diagnostics (zero-variance features, non-converged solvers, ...).
// Tests swap the handler to assert that a warning fired.
namespace warnings {

inline std::function<void(const std::string&)>& handler() {
    static std::function<void(const std::string&)> h = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return h;
}

}  // namespace warnings

inline void warn(const std::string& msg) { warnings::handler()(msg); }

// Static-partition parallel loop. Work item i is always executed with the same
// arguments regardless of thread count, so any per-item outputs written into
// preallocated slots are identical in serial and parallel runs.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads < 1) threads = 1;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace connlatent
