#pragma once

#include <stdexcept>
#include <string>

namespace rsteal {

// Base class for all recoverable failures raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define RSTEAL_DEFINE_ERROR(NAME)                                  \
    class NAME : public Error {                                    \
    public:                                                        \
        explicit NAME(const std::string& msg) : Error(msg) {}      \
    }

RSTEAL_DEFINE_ERROR(ShapeMismatch);
RSTEAL_DEFINE_ERROR(BudgetExhausted);
RSTEAL_DEFINE_ERROR(InvalidDistribution);
RSTEAL_DEFINE_ERROR(MissingLabels);
RSTEAL_DEFINE_ERROR(NonFiniteGradient);
RSTEAL_DEFINE_ERROR(NonFiniteLoss);
RSTEAL_DEFINE_ERROR(UnknownPreset);
RSTEAL_DEFINE_ERROR(InvalidFactor);
RSTEAL_DEFINE_ERROR(EmptyBank);
RSTEAL_DEFINE_ERROR(EmptyDataset);
RSTEAL_DEFINE_ERROR(CorruptManifest);
RSTEAL_DEFINE_ERROR(IOFailure);
RSTEAL_DEFINE_ERROR(ConfigInvalid);
RSTEAL_DEFINE_ERROR(DatasetMissing);
RSTEAL_DEFINE_ERROR(DivergedTraining);

#undef RSTEAL_DEFINE_ERROR

} // namespace rsteal
