#pragma once

#include <stdexcept>
#include <string>

namespace tripost {

// Base for every error the pipeline raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TRIPOST_DEFINE_ERROR(name)          \
    class name : public Error {             \
    public:                                 \
        using Error::Error;                 \
    }

TRIPOST_DEFINE_ERROR(ParameterError);
TRIPOST_DEFINE_ERROR(ParseError);
TRIPOST_DEFINE_ERROR(KindError);
TRIPOST_DEFINE_ERROR(ProviderFormatError);
TRIPOST_DEFINE_ERROR(ProviderTransportError);
TRIPOST_DEFINE_ERROR(ImprovementImpossible);
TRIPOST_DEFINE_ERROR(DataError);
TRIPOST_DEFINE_ERROR(BalanceError);
TRIPOST_DEFINE_ERROR(UpdateError);
TRIPOST_DEFINE_ERROR(EvaluationError);
TRIPOST_DEFINE_ERROR(IntegrityError);
TRIPOST_DEFINE_ERROR(IoError);

#undef TRIPOST_DEFINE_ERROR

}  // namespace tripost
