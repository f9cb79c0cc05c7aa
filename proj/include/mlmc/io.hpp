#pragma once

#include <map>
#include <string>
#include <vector>

#include "mlmc/image.hpp"
#include "mlmc/solver.hpp"

namespace mlmc {

// 8-bit PNG or binary PGM/PPM, picked by file magic on read and by
// extension on write. Values map linearly between [0,255] and [0,1].
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

// Row-major plain-text matrix, one row per line. Authoritative kernel format.
void write_kernel_text(const std::string& path, const Kernel& k);
Kernel read_kernel_text(const std::string& path);

// Max-normalized 8-bit grayscale rendering for display.
void write_kernel_image(const std::string& path, const Kernel& k);

// Flat `key = value` files (configs and run manifests).
using KvMap = std::map<std::string, std::string>;
KvMap read_kv(const std::string& path);
void write_kv(const std::string& path, const KvMap& kv);

// Every SolverConfig field has a key; unknown keys are rejected.
void apply_kv(SolverConfig& cfg, const KvMap& kv);
KvMap config_to_kv(const SolverConfig& cfg);

std::string format_double(double v);  // round-trip exact

}  // namespace mlmc
