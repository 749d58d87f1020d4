#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace forecast_lab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A forward match search ran out of its per-level pull budget.
class SearchBudgetExceeded : public Error {
public:
    SearchBudgetExceeded(std::size_t level, std::uint64_t budget)
        : Error("no recurrence for level " + std::to_string(level) + " within " +
                std::to_string(budget) + " steps"),
          level_(level), budget_(budget) {}

    std::size_t level() const noexcept { return level_; }
    std::uint64_t budget() const noexcept { return budget_; }

private:
    std::size_t level_;
    std::uint64_t budget_;
};

/// A finite source was asked for more symbols than it holds.
class SourceExhausted : public Error {
public:
    explicit SourceExhausted(std::size_t produced)
        : Error("bit source exhausted after " + std::to_string(produced) + " symbols"),
          produced_(produced) {}

    std::size_t produced() const noexcept { return produced_; }

private:
    std::size_t produced_;
};

/// The backward scheme would have to read below the start of the supplied history.
class HistoryExhausted : public Error {
public:
    explicit HistoryExhausted(std::size_t level)
        : Error("history exhausted while searching backward level " + std::to_string(level)),
          level_(level) {}

    std::size_t level() const noexcept { return level_; }

private:
    std::size_t level_;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class NotIrreducible : public Error {
public:
    using Error::Error;
};

class PrefixTooLong : public Error {
public:
    using Error::Error;
};

class InsufficientRuns : public Error {
public:
    using Error::Error;
};

class NumericalUnderflow : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace forecast_lab
