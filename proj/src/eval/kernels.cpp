#include "pesao/eval/kernels.hpp"

namespace pesao::eval {

namespace {

const proc::ObjectPose* pose_of(const proc::SyncedRecord& r, int body_id) {
  for (const auto& o : r.objects) {
    if (o.body_id == body_id) return &o;
  }
  return nullptr;
}

std::size_t hit_count(const proc::SyncedRecord& r, const std::vector<ObjectSpec>& objects) {
  if (!r.ray) return 0;
  std::size_t n = 0;
  for (const auto& o : objects) n += pose_of(r, o.body_id) != nullptr ? 1 : 0;
  return n;
}

void fill_hits(const proc::SyncedRecord& r, std::size_t index, const std::vector<ObjectSpec>& objects,
               HitRecord* out) {
  if (!r.ray) return;
  for (const auto& o : objects) {
    const auto* p = pose_of(r, o.body_id);
    if (p == nullptr) continue;
    const auto [d, ahead] = ray_point_distance(r.ray->origin, r.ray->dir, p->pose.position);
    *out++ = HitRecord{r.t_world, index, o.body_id, ahead, ahead && d <= o.radius_m, d};
  }
}

}  // namespace

std::vector<HitRecord> compute_hits(const proc::SyncedDataset& ds, const std::vector<ObjectSpec>& objects) {
  const std::size_t n = ds.records.size();
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offset[i + 1] = offset[i] + hit_count(ds.records[i], objects);
  std::vector<HitRecord> out(offset[n]);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto k = static_cast<std::size_t>(i);
    fill_hits(ds.records[k], k, objects, out.data() + offset[k]);
  }
  return out;
}

std::vector<HitRecord> compute_hits_serial(const proc::SyncedDataset& ds, const std::vector<ObjectSpec>& objects) {
  std::vector<HitRecord> out;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (!r.ray) continue;
    for (const auto& o : objects) {
      const auto* p = pose_of(r, o.body_id);
      if (p == nullptr) continue;
      const auto [d, ahead] = ray_point_distance(r.ray->origin, r.ray->dir, p->pose.position);
      out.push_back({r.t_world, i, o.body_id, ahead, ahead && d <= o.radius_m, d});
    }
  }
  return out;
}

std::vector<Frustum> compute_frusta(const proc::SyncedDataset& ds, const std::vector<std::size_t>& records,
                                    const FrustumParams& p) {
  std::vector<Frustum> out(records.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
    const auto& r = ds.records[records[static_cast<std::size_t>(i)]];
    out[static_cast<std::size_t>(i)] = compute_frustum(*r.head, p, r.t_world);
  }
  return out;
}

std::vector<Frustum> compute_frusta_serial(const proc::SyncedDataset& ds, const std::vector<std::size_t>& records,
                                           const FrustumParams& p) {
  std::vector<Frustum> out;
  out.reserve(records.size());
  for (const auto idx : records) out.push_back(compute_frustum(*ds.records[idx].head, p, ds.records[idx].t_world));
  return out;
}

}  // namespace pesao::eval
