#pragma once

#include <vector>

#include "pesao/eval/eval.hpp"

namespace pesao::eval {

/// Hit records in (record, object) order. The OpenMP version fills fixed
/// slots so its output equals the serial reference exactly.
std::vector<HitRecord> compute_hits(const proc::SyncedDataset& ds, const std::vector<ObjectSpec>& objects);
std::vector<HitRecord> compute_hits_serial(const proc::SyncedDataset& ds, const std::vector<ObjectSpec>& objects);

/// Frusta for the given record indices (each must carry a head pose).
std::vector<Frustum> compute_frusta(const proc::SyncedDataset& ds, const std::vector<std::size_t>& records,
                                    const FrustumParams& p);
std::vector<Frustum> compute_frusta_serial(const proc::SyncedDataset& ds, const std::vector<std::size_t>& records,
                                           const FrustumParams& p);

}  // namespace pesao::eval
