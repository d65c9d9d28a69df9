#ifndef DODO_ERROR_HPP_
#define DODO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dodo {

enum class Errc {
  kInvalidArg,
  kShape,
  kLength,
  kPosition,
  kMask,
  kIndex,
  kConfig,
  kVocab,
  kDecode,
  kCalibration,
  kIo,
  kFormat,
  kNanLoss,
  kState,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace dodo

#endif  // DODO_ERROR_HPP_
