#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdesift {

enum class Errc {
    InvalidArgument,
    StabilityViolation,
    UnsupportedCombination,
    GridTooSmall,
    WindowTooLarge,
    DegenerateFit,
    EmptyAfterTrim,
    SingularSystem,
    NumericalBreakdown,
    UnresolvableLabel,
    UnstableSample,
    Io,
    Config,
};

constexpr std::string_view to_string(Errc code) noexcept
{
    switch (code) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::StabilityViolation: return "StabilityViolation";
        case Errc::UnsupportedCombination: return "UnsupportedCombination";
        case Errc::GridTooSmall: return "GridTooSmall";
        case Errc::WindowTooLarge: return "WindowTooLarge";
        case Errc::DegenerateFit: return "DegenerateFit";
        case Errc::EmptyAfterTrim: return "EmptyAfterTrim";
        case Errc::SingularSystem: return "SingularSystem";
        case Errc::NumericalBreakdown: return "NumericalBreakdown";
        case Errc::UnresolvableLabel: return "UnresolvableLabel";
        case Errc::UnstableSample: return "UnstableSample";
        case Errc::Io: return "Io";
        case Errc::Config: return "Config";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what)
{
    throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what)
{
    if (!cond) fail(code, what);
}

} // namespace pdesift
