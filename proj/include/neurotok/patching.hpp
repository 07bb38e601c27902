#pragma once

#include "neurotok/common.hpp"
#include "neurotok/preprocess.hpp"

namespace neurotok {

// C×A×P tensor of patches stored flat: row i = patch (c = i / A, a = i % A),
// i.e. channel-major so each channel's temporal run stays contiguous.
struct PatchGrid {
  int channels = 0;
  int patches_per_channel = 0;
  int patch_len = 0;
  Matd data;  // (C·A)×P

  int sequence_length() const { return channels * patches_per_channel; }
  int flat_index(int c, int a) const { return c * patches_per_channel + a; }
  std::pair<int, int> unflatten(int i) const {
    return {i / patches_per_channel, i % patches_per_channel};
  }
  auto patch(int c, int a) const { return data.row(flat_index(c, a)); }
};

// data[c][a][p] = seg[c][a*P + p]; the trailing T mod P samples are dropped.
PatchGrid patchify(const Segment& seg, int patch_len);

// Exact inverse on the retained prefix: patchify(unpatchify(g), P) == g.
Segment unpatchify(const PatchGrid& grid, double sample_rate_hz = 0.0);

}  // namespace neurotok
