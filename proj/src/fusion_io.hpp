#pragma once

#include "binio.hpp"
#include "semtok/fusion.hpp"

namespace semtok::detail {

// Header fields then f32 tables and scorer parameters:
//   u32 n_l, u32 E, u8 embed_mode, n_l x u32 K_l, n_l x u32 layer_id,
//   u32 H, u8 shared_scorer
void write_fusion_header(binio::Writer& w, const LayerFusion& fusion);
void write_fusion_values(binio::Writer& w, const LayerFusion& fusion);
LayerFusion read_fusion_header(binio::Reader& r);
void read_fusion_values(binio::Reader& r, LayerFusion& fusion);

void write_values(binio::Writer& w, const grad::Parameter& p);
void read_values(binio::Reader& r, grad::Parameter& p);

}  // namespace semtok::detail
