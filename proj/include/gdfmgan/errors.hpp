#pragma once

#include <stdexcept>
#include <string>

namespace gdfmgan {

/// Base of every error raised by the library. `kind()` is the stable name
/// surfaced by the CLI ("SamplingError", "ShapeError", ...).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define GDFMGAN_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    }

GDFMGAN_DEFINE_ERROR(IoError);
GDFMGAN_DEFINE_ERROR(SamplingError);
GDFMGAN_DEFINE_ERROR(ConfigError);
GDFMGAN_DEFINE_ERROR(DataError);
GDFMGAN_DEFINE_ERROR(CoverageError);
GDFMGAN_DEFINE_ERROR(DegenerateSiteError);
GDFMGAN_DEFINE_ERROR(ShapeError);
GDFMGAN_DEFINE_ERROR(LagError);
GDFMGAN_DEFINE_ERROR(SymmetryError);
GDFMGAN_DEFINE_ERROR(SegmentError);
GDFMGAN_DEFINE_ERROR(NumericsError);
GDFMGAN_DEFINE_ERROR(RankError);
GDFMGAN_DEFINE_ERROR(DivergenceError);
GDFMGAN_DEFINE_ERROR(DegenerateError);
GDFMGAN_DEFINE_ERROR(BinError);

#undef GDFMGAN_DEFINE_ERROR

}  // namespace gdfmgan
