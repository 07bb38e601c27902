#include "neurotok/patching.hpp"

namespace neurotok {

PatchGrid patchify(const Segment& seg, int patch_len) {
  const int t = seg.length();
  if (patch_len < 1) raise(Err::PatchTooLong, "patch length must be positive");
  if (patch_len > t)
    raise(Err::PatchTooLong, "patch of " + std::to_string(patch_len) +
                                 " samples exceeds segment of " + std::to_string(t));
  if (!seg.data.allFinite()) raise(Err::NonFinite, "segment contains NaN or Inf");

  PatchGrid grid;
  grid.channels = seg.channels();
  grid.patches_per_channel = t / patch_len;
  grid.patch_len = patch_len;
  grid.data.resize(grid.sequence_length(), patch_len);
  for (int c = 0; c < grid.channels; ++c)
    for (int a = 0; a < grid.patches_per_channel; ++a)
      grid.data.row(grid.flat_index(c, a)) = seg.data.row(c).segment(a * patch_len, patch_len);
  return grid;
}

Segment unpatchify(const PatchGrid& grid, double sample_rate_hz) {
  Segment seg;
  seg.sample_rate_hz = sample_rate_hz;
  seg.data.resize(grid.channels, grid.patches_per_channel * grid.patch_len);
  for (int c = 0; c < grid.channels; ++c)
    for (int a = 0; a < grid.patches_per_channel; ++a)
      seg.data.row(c).segment(a * grid.patch_len, grid.patch_len) =
          grid.data.row(grid.flat_index(c, a));
  return seg;
}

}  // namespace neurotok
