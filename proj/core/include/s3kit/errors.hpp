#pragma once

#include <stdexcept>
#include <string>

namespace s3kit {

/// Coarse failure class, used by the CLI to pick an exit code:
/// domain errors exit 1, parse/I-O errors exit 2.
enum class ErrorKind {
    Domain,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define S3KIT_DEFINE_ERROR(Name, Kind)                                                  \
    class Name : public Error {                                                         \
    public:                                                                             \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}        \
    }

S3KIT_DEFINE_ERROR(OutOfBoundsError, Domain);
S3KIT_DEFINE_ERROR(SizeMismatchError, Domain);
S3KIT_DEFINE_ERROR(InvalidDomainError, Domain);
S3KIT_DEFINE_ERROR(NotInViewError, Domain);
S3KIT_DEFINE_ERROR(GridShapeMismatchError, Domain);
S3KIT_DEFINE_ERROR(UnknownPatternError, Domain);
S3KIT_DEFINE_ERROR(DimensionError, Domain);
S3KIT_DEFINE_ERROR(NonFiniteScoreError, Domain);
S3KIT_DEFINE_ERROR(NonFiniteError, Domain);
S3KIT_DEFINE_ERROR(SpecInvalidError, Domain);
S3KIT_DEFINE_ERROR(SingularAfterDampingError, Domain);
S3KIT_DEFINE_ERROR(SingularBlockError, Domain);
S3KIT_DEFINE_ERROR(SingularError, Domain);
S3KIT_DEFINE_ERROR(AlreadyPrunedError, Domain);
S3KIT_DEFINE_ERROR(ZeroReferenceError, Domain);
S3KIT_DEFINE_ERROR(TooLargeError, Domain);
S3KIT_DEFINE_ERROR(UnsupportedBitsError, Domain);
S3KIT_DEFINE_ERROR(IoError, Io);
S3KIT_DEFINE_ERROR(ParseError, Io);

#undef S3KIT_DEFINE_ERROR

}  // namespace s3kit
