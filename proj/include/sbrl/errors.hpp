#ifndef SBRL_ERRORS_HPP_
#define SBRL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sbrl {

#define SBRL_DEFINE_ERROR(Name)                          \
  struct Name : std::runtime_error {                     \
    explicit Name(const std::string& msg)                \
        : std::runtime_error(std::string(#Name ": ") + msg) {} \
  }

SBRL_DEFINE_ERROR(DegenerateCurve);
SBRL_DEFINE_ERROR(OutOfRange);
SBRL_DEFINE_ERROR(IllConditioned);
SBRL_DEFINE_ERROR(InsufficientData);
SBRL_DEFINE_ERROR(IndexOutOfRange);
SBRL_DEFINE_ERROR(SingularCovariance);
SBRL_DEFINE_ERROR(EmptyBatch);
SBRL_DEFINE_ERROR(NumericalBlowup);
SBRL_DEFINE_ERROR(ShapeMismatch);
SBRL_DEFINE_ERROR(StaleCache);
SBRL_DEFINE_ERROR(EmptyDataset);
SBRL_DEFINE_ERROR(NoFutures);
SBRL_DEFINE_ERROR(InvalidGeometry);
SBRL_DEFINE_ERROR(ExpertFailed);
SBRL_DEFINE_ERROR(ConfigError);
SBRL_DEFINE_ERROR(IoError);

#undef SBRL_DEFINE_ERROR

}  // namespace sbrl

#endif  // SBRL_ERRORS_HPP_
