#pragma once

#include <stdexcept>
#include <string>

namespace pyd {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySample : Error {
    EmptySample() : Error("empty sample") {}
};
struct DuplicateFrequency : Error {
    explicit DuplicateFrequency(long l) : Error("duplicate frequency l=" + std::to_string(l)) {}
};
struct InvalidSpectrum : Error {
    using Error::Error;
};
struct NeedsFrequencies : Error {
    NeedsFrequencies() : Error("operation requires per-species frequencies") {}
};
struct DomainError : Error {
    using Error::Error;
};
struct PrecisionLoss : Error {
    using Error::Error;
};
struct OutOfRange : Error {
    using Error::Error;
};
struct InvalidTarget : Error {
    using Error::Error;
};
struct InsufficientSpectrum : Error {
    using Error::Error;
};
struct UnknownSpecies : Error {
    using Error::Error;
};
struct InvalidGrid : Error {
    using Error::Error;
};
struct InvalidState : Error {
    using Error::Error;
};
struct SamplerStall : Error {
    SamplerStall() : Error("rejection sampler exceeded proposal budget") {}
};
struct Infeasible : Error {
    using Error::Error;
};
struct Unsupported : Error {
    using Error::Error;
};

}  // namespace pyd
