#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "gmmcache/gmm.hpp"

namespace gmmcache {

// Timestamp-window parameters the model was trained with. A model scored
// against samples built with different windows sees a different feature.
struct FeatureWindows {
  std::uint32_t len_window = 0;
  std::uint32_t len_access_shot = 0;

  friend bool operator==(const FeatureWindows&, const FeatureWindows&) = default;
};

struct ModelFile {
  GmmModel model;
  std::optional<FeatureWindows> windows;
};

// Text format, version 1:
//
//   gmmcache-gmm 1
//   features len_window <u32> len_access_shot <u32>     (optional)
//   K <count>
//   standardizer mean <p> <t> scale <p> <t>
//   component <weight> mean <p> <t> cov <pp> <pt> <tt>  (K lines)
//   threshold <value|none>
//
// Reals are written with 17 significant digits, so reading reproduces every
// double exactly. Lines starting with '#' are ignored.
void write_model(std::ostream& out, const GmmModel& model,
                 const std::optional<FeatureWindows>& windows = {});
ModelFile read_model(std::istream& in);

void save_model(const std::string& path, const GmmModel& model,
                const std::optional<FeatureWindows>& windows = {});
ModelFile load_model(const std::string& path);

}  // namespace gmmcache
