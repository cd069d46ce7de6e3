#pragma once

#include <stdexcept>
#include <string>

namespace cellgraph {

// Base of every error thrown by the library. The CLI maps subtypes to
// exit codes, so new error conditions should subclass one of these.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// featureio
struct EmptyMaskError : Error {
    using Error::Error;
};
struct MissingColorError : Error {
    using Error::Error;
};
struct DimMismatchError : Error {
    using Error::Error;
};
struct SpecError : Error {
    using Error::Error;
};

// file formats (feature CSV, masks, graph container, checkpoints, config)
struct FormatError : Error {
    using Error::Error;
};

// sampler
struct OutOfBoundsError : Error {
    using Error::Error;
};
struct EmptyDistributionError : Error {
    using Error::Error;
};
struct BudgetMismatchError : Error {
    using Error::Error;
};

// graphbuilder / gnn
struct EmptyGraphError : Error {
    using Error::Error;
};
struct ShapeMismatchError : Error {
    using Error::Error;
};
struct NonScalarLossError : Error {
    using Error::Error;
};
struct PatchCountError : Error {
    using Error::Error;
};

// trainer
struct DegenerateDatasetError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace cellgraph
