#pragma once

#include <string>

#include "signal.hpp"

namespace relrange {

// RIFF/WAVE I/O. Writing always produces 32-bit float mono (the canonical
// interchange format); reading additionally accepts 16-bit PCM. Multichannel
// files collapse to the first channel with a warning on stderr.
Signal read_wav(const std::string& path);
void write_wav(const std::string& path, const Signal& signal);

}  // namespace relrange
