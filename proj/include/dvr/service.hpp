// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

// Transport-independent core of the render service: the volume catalog,
// scene resolution shared with the CLI, per-session state with revisioned
// edits, the binary frame format, and a latest-wins frame scheduler.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvr/common.hpp"
#include "dvr/image.hpp"
#include "dvr/io.hpp"
#include "dvr/raycaster.hpp"
#include "dvr/scene.hpp"
#include "dvr/views.hpp"

namespace dvr {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kDefaultImageSize = 512;

// ---------------------------------------------------------------------------
// Catalog

using Histogram = std::array<std::uint64_t, 256>;

template <std::floating_point T>
Histogram intensity_histogram(const BasicVolumeGrid<T>& grid) {
  Histogram h{};
  for (const T v : grid.values()) {
    const int bin = std::min(255, static_cast<int>(static_cast<double>(v) * 256.0));
    ++h[static_cast<std::size_t>(std::max(bin, 0))];
  }
  return h;
}

struct VolumeEntry {
  std::string id;
  std::shared_ptr<const VolumeGrid> grid;
  Histogram histogram{};
};

// Read-only after construction, so it can be shared across sessions.
class Catalog {
 public:
  Catalog() = default;

  void add(std::string id, VolumeGrid grid) {
    auto shared = std::make_shared<const VolumeGrid>(std::move(grid));
    Histogram h = intensity_histogram(*shared);
    entries_[id] = VolumeEntry{id, std::move(shared), h};
  }

  // Every `<name>.raw` with a `<name>.json` sidecar becomes volume `<name>`.
  // RAW files without a sidecar are skipped and reported in `warnings`.
  static Catalog from_directory(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw FormatError("data directory '" + dir.string() + "' does not exist");
    Catalog c;
    std::vector<fs::path> raws;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".raw") raws.push_back(e.path());
    }
    std::sort(raws.begin(), raws.end());
    for (const fs::path& raw : raws) {
      fs::path meta_path = raw;
      meta_path.replace_extension(".json");
      if (!fs::exists(meta_path)) {
        if (warnings) warnings->push_back("skipping " + raw.string() + ": no sidecar " + meta_path.string());
        continue;
      }
      const auto meta_bytes = read_file_bytes(meta_path.string());
      const VolumeMeta meta =
          parse_volume_meta_text(std::string_view(reinterpret_cast<const char*>(meta_bytes.data()), meta_bytes.size()),
                                 warnings);
      c.add(raw.stem().string(), load_raw_volume(read_file_bytes(raw.string()), meta));
    }
    return c;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  const VolumeEntry& at(const std::string& id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw NotFoundError("unknown volume '" + id + "'");
    return it->second;
  }

  std::optional<std::string> first_id() const {
    if (entries_.empty()) return std::nullopt;
    return entries_.begin()->first;
  }

  // [{id, dims, spacing, histogram}] in id order.
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [id, e] : entries_) {
      const Index3& d = e.grid->dims();
      const Vec3& s = e.grid->spacing();
      arr.push_back({{"id", id},
                     {"dims", {d.i, d.j, d.k}},
                     {"spacing", {s.x, s.y, s.z}},
                     {"histogram", e.histogram}});
    }
    return arr;
  }

 private:
  std::map<std::string, VolumeEntry> entries_;
};

// ---------------------------------------------------------------------------
// Scene resolution

// A complete, validated set of render inputs.
struct ResolvedScene {
  TransferFunction tf = TransferFunction::ramp();
  ShadingConfig shading;
  SamplingConfig sampling;
  Camera camera;
};

// Fills the parts missing from `doc` with defaults: the ramp transfer
// function, default shading and sampling, and either the preset camera for
// `view` or the three-quarter free camera at width x height.
template <std::floating_point T>
ResolvedScene resolve_scene(const BasicVolumeGrid<T>& grid, const SceneDoc& doc,
                            std::optional<SliceAxis> view = std::nullopt, int width = kDefaultImageSize,
                            int height = kDefaultImageSize) {
  Camera camera = doc.camera ? *doc.camera
                             : (view ? preset_camera(grid, *view, width, height) : free_camera(grid, width, height));
  ResolvedScene s{doc.tf.value_or(TransferFunction::ramp()), doc.shading.value_or(ShadingConfig{}),
                  doc.sampling.value_or(SamplingConfig{}), std::move(camera)};
  s.shading.validate();
  s.sampling.validate();
  return s;
}

template <std::floating_point T>
FrameImage render_scene(const BasicVolumeGrid<T>& grid, const ResolvedScene& s, RenderOptions options = {},
                        RenderStats* stats = nullptr) {
  return render(grid, s.tf, s.shading, s.sampling, s.camera, options, stats);
}

// Camera edit applied on top of the preset for `view`, or the free camera
// when there is none. The size comes from the edit when present.
template <std::floating_point T>
Camera camera_over_view(const nlohmann::json& edit, const BasicVolumeGrid<T>& grid, std::optional<SliceAxis> view,
                        int width = kDefaultImageSize, int height = kDefaultImageSize) {
  if (!edit.is_object()) throw ValidationError("camera", "expected an object");
  if (edit.contains("width")) width = detail::json_int(edit.at("width"), "camera.width");
  if (edit.contains("height")) height = detail::json_int(edit.at("height"), "camera.height");
  const Camera base = view ? preset_camera(grid, *view, width, height) : free_camera(grid, width, height);
  return camera_from_json(edit, base);
}

inline std::optional<SliceAxis> parse_view(const nlohmann::json& v, const std::string& field) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw ValidationError(field, "expected a string");
  const std::string name = v.get<std::string>();
  if (name == "free") return std::nullopt;
  try {
    return parse_slice_axis(name);
  } catch (const ValidationError& e) {
    throw ValidationError(field, e.message());
  }
}

// Stateless render to PNG bytes. Request: {volume, view?, camera?, tf?,
// shading?, sampling?}. A camera, complete or partial, is applied on top of
// the view's camera.
inline std::vector<std::uint8_t> render_once(const Catalog& catalog, const nlohmann::json& request,
                                             RenderOptions options = {}) {
  if (!request.is_object()) throw ValidationError("request", "expected an object");
  if (!request.contains("volume") || !request.at("volume").is_string())
    throw ValidationError("volume", "expected a volume id");
  const VolumeEntry& entry = catalog.at(request.at("volume").get<std::string>());
  const std::optional<SliceAxis> view = parse_view(request.value("view", nlohmann::json(nullptr)), "view");
  SceneDoc doc;
  try {
    nlohmann::json rest = request;
    rest.erase("camera");
    doc = scene_from_json(rest);
    if (request.contains("camera")) doc.camera = camera_over_view(request.at("camera"), *entry.grid, view);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scene", e.what());
  }
  const ResolvedScene scene = resolve_scene(*entry.grid, doc, view);
  return encode_png(to_rgb8(render_scene(*entry.grid, scene, options)));
}

inline nlohmann::json error_json(const std::string& field, const std::string& message) {
  return {{"type", "error"}, {"field", field}, {"message", message}};
}

// ---------------------------------------------------------------------------
// Binary frames: u32 little-endian header length, JSON header, PNG bytes.

struct FrameHeader {
  std::uint64_t revision = 0;
  int width = 0;
  int height = 0;
  bool refined = true;
  friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

inline std::vector<std::uint8_t> encode_frame_message(const FrameHeader& h, std::span<const std::uint8_t> png) {
  const nlohmann::json j{{"revision", h.revision},
                         {"width", h.width},
                         {"height", h.height},
                         {"encoding", "png"},
                         {"refined", h.refined}};
  const std::string text = j.dump();
  const auto n = static_cast<std::uint32_t>(text.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + text.size() + png.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((n >> (8 * b)) & 0xFF));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), png.begin(), png.end());
  return out;
}

struct DecodedFrame {
  FrameHeader header;
  std::vector<std::uint8_t> png;
};

inline DecodedFrame decode_frame_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("frame shorter than its length prefix");
  const std::uint32_t n = static_cast<std::uint32_t>(bytes[0]) | static_cast<std::uint32_t>(bytes[1]) << 8 |
                          static_cast<std::uint32_t>(bytes[2]) << 16 | static_cast<std::uint32_t>(bytes[3]) << 24;
  if (bytes.size() < 4 + static_cast<std::size_t>(n)) throw FormatError("frame header truncated");
  const auto j = detail::parse_json_text(
      std::string_view(reinterpret_cast<const char*>(bytes.data() + 4), n), "frame header");
  if (j.value("encoding", "") != "png") throw UnsupportedFormatError("frame encoding is not png");
  DecodedFrame f;
  f.header.revision = j.at("revision").get<std::uint64_t>();
  f.header.width = j.at("width").get<int>();
  f.header.height = j.at("height").get<int>();
  f.header.refined = j.value("refined", true);
  f.png.assign(bytes.begin() + 4 + n, bytes.end());
  return f;
}

// ---------------------------------------------------------------------------
// Session state

struct SessionState {
  std::uint64_t revision = 0;
  std::optional<std::string> volume_id;
  TransferFunction tf = TransferFunction::ramp();
  ShadingConfig shading;
  SamplingConfig sampling;
  std::optional<Camera> camera;
};

inline nlohmann::json to_json(const SessionState& s) {
  nlohmann::json j{{"revision", s.revision},
                   {"volume", s.volume_id ? nlohmann::json(*s.volume_id) : nlohmann::json(nullptr)},
                   {"tf", to_json(s.tf)},
                   {"shading", to_json(s.shading)},
                   {"sampling", to_json(s.sampling)}};
  j["camera"] = s.camera ? to_json(*s.camera) : nlohmann::json(nullptr);
  return j;
}

struct ApplyResult {
  bool accepted = false;
  // Ack on success, error otherwise. Both echo client_echo when present.
  nlohmann::json reply;
};

// Revisioned scene state of one viewer connection. Each accepted edit is
// validated in full before it replaces the current state, so the state is
// valid at all times and a rejected edit leaves it untouched. Not
// thread-safe; the transport serializes edits per session.
class Session {
 public:
  explicit Session(const Catalog& catalog) : catalog_(&catalog) {
    if (const auto id = catalog.first_id()) select(*id, state_);
  }

  const SessionState& state() const { return state_; }

  // Message: {type, payload, client_echo?}.
  ApplyResult apply(const nlohmann::json& msg) {
    nlohmann::json echo = nullptr;
    if (msg.is_object() && msg.contains("client_echo")) echo = msg.at("client_echo");
    auto fail = [&](const std::string& field, const std::string& message) {
      nlohmann::json e = error_json(field, message);
      e["client_echo"] = echo;
      return ApplyResult{false, std::move(e)};
    };
    if (!msg.is_object()) return fail("message", "expected a JSON object");
    if (!msg.contains("type") || !msg.at("type").is_string()) return fail("type", "missing message type");
    const std::string type = msg.at("type").get<std::string>();
    const nlohmann::json payload = msg.value("payload", nlohmann::json(nullptr));

    SessionState next = state_;
    try {
      if (type == "set_tf") {
        next.tf = transfer_function_from_json(payload);
      } else if (type == "set_shading") {
        next.shading = shading_from_json(payload, next.shading);
      } else if (type == "set_sampling") {
        next.sampling = sampling_from_json(payload, next.sampling);
      } else if (type == "set_camera") {
        next.camera = camera_edit(payload, next);
      } else if (type == "select_volume") {
        std::string id;
        if (payload.is_string())
          id = payload.get<std::string>();
        else if (payload.is_object() && payload.contains("id") && payload.at("id").is_string())
          id = payload.at("id").get<std::string>();
        else
          return fail("payload", "expected a volume id");
        select(id, next);
      } else {
        return fail("type", "unknown message type '" + type + "'");
      }
    } catch (const ValidationError& e) {
      return fail(e.field(), e.message());
    } catch (const NotFoundError& e) {
      return fail("volume", e.what());
    } catch (const nlohmann::json::exception& e) {
      return fail("payload", e.what());
    }
    next.revision = state_.revision + 1;
    state_ = std::move(next);
    return {true, {{"type", "ack"}, {"revision", state_.revision}, {"client_echo", echo}}};
  }

  // Grid of the selected volume, or null when none is selected.
  std::shared_ptr<const VolumeGrid> grid() const {
    if (!state_.volume_id) return nullptr;
    return catalog_->at(*state_.volume_id).grid;
  }

 private:
  // With a "view" key the edit applies on top of that preset (or the free
  // camera) for the selected volume instead of the current camera.
  std::optional<Camera> camera_edit(const nlohmann::json& payload, const SessionState& s) const {
    if (!payload.is_object() || !payload.contains("view")) return camera_from_json(payload, s.camera);
    const std::optional<SliceAxis> view = parse_view(payload.at("view"), "camera.view");
    if (!s.volume_id) throw ValidationError("volume", "no volume selected");
    return camera_over_view(payload, *catalog_->at(*s.volume_id).grid, view,
                            s.camera ? s.camera->width() : kDefaultImageSize,
                            s.camera ? s.camera->height() : kDefaultImageSize);
  }

  // A new volume gets the free camera, keeping the current image size.
  void select(const std::string& id, SessionState& s) const {
    const VolumeEntry& e = catalog_->at(id);
    const int w = s.camera ? s.camera->width() : kDefaultImageSize;
    const int h = s.camera ? s.camera->height() : kDefaultImageSize;
    s.volume_id = id;
    s.camera = free_camera(*e.grid, w, h);
  }

  const Catalog* catalog_;
  SessionState state_;
};

// Scene of a session snapshot, as resolve_scene would produce for the CLI.
inline ResolvedScene scene_of(const SessionState& s) {
  if (!s.camera) throw ValidationError("camera", "no camera set");
  return ResolvedScene{s.tf, s.shading, s.sampling, *s.camera};
}

// Reduced size for interactive frames: the camera size scaled down so that
// neither side exceeds `limit`, keeping the aspect ratio.
inline std::pair<int, int> interactive_size(int width, int height, int limit) {
  if (width <= limit && height <= limit) return {width, height};
  const double scale = static_cast<double>(limit) / std::max(width, height);
  return {std::max(1, static_cast<int>(std::lround(width * scale))),
          std::max(1, static_cast<int>(std::lround(height * scale)))};
}

// ---------------------------------------------------------------------------
// Latest-wins frame scheduling

struct SchedulerOptions {
  int interactive_limit = 384;
  std::chrono::milliseconds refine_delay{300};
  RenderOptions render;
};

// Renders session snapshots on a private thread. submit() replaces any
// snapshot still waiting, and a finished frame is dropped when a newer
// snapshot arrived while it rendered, so slow renders never queue up. A
// frame always carries the revision of the snapshot it was rendered from.
// When the interactive frame was reduced, a full-size frame of the same
// revision follows once no edit has arrived for refine_delay.
class FrameScheduler {
 public:
  using Deliver = std::function<void(const FrameHeader&, std::vector<std::uint8_t> png)>;

  FrameScheduler(Deliver deliver, SchedulerOptions options = {})
      : deliver_(std::move(deliver)), options_(options), thread_([this](std::stop_token st) { run(st); }) {}

  ~FrameScheduler() {
    {
      std::lock_guard lock(mu_);
      thread_.request_stop();
    }
    cv_.notify_all();
  }

  FrameScheduler(const FrameScheduler&) = delete;
  FrameScheduler& operator=(const FrameScheduler&) = delete;

  void submit(std::shared_ptr<const VolumeGrid> grid, SessionState state) {
    {
      std::lock_guard lock(mu_);
      pending_ = Job{std::move(grid), std::move(state), false};
      refine_.reset();
      latest_ = pending_->state.revision;
    }
    cv_.notify_all();
  }

  // Blocks until nothing is pending, rendering or waiting to refine.
  void wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return !pending_ && !refine_ && !busy_; });
  }

 private:
  struct Job {
    std::shared_ptr<const VolumeGrid> grid;
    SessionState state;
    bool full = false;
  };

  void run(std::stop_token st) {
    std::unique_lock lock(mu_);
    while (!st.stop_requested()) {
      if (!pending_ && refine_ && std::chrono::steady_clock::now() >= refine_at_) {
        pending_ = std::move(refine_);
        refine_.reset();
      }
      if (!pending_) {
        idle_cv_.notify_all();
        if (refine_)
          cv_.wait_until(lock, refine_at_);
        else
          cv_.wait(lock, [&] { return pending_ || st.stop_requested(); });
        continue;
      }
      Job job = std::move(*pending_);
      pending_.reset();
      busy_ = true;
      lock.unlock();

      std::optional<FrameHeader> header;
      std::vector<std::uint8_t> png;
      bool reduced = false;
      try {
        ResolvedScene scene = scene_of(job.state);
        const Camera& full = scene.camera;
        const auto [w, h] = job.full ? std::pair{full.width(), full.height()}
                                     : interactive_size(full.width(), full.height(), options_.interactive_limit);
        reduced = w != full.width() || h != full.height();
        if (reduced) scene.camera = full.resized(w, h);
        png = encode_png(to_rgb8(render_scene(*job.grid, scene, options_.render)));
        header = FrameHeader{job.state.revision, w, h, !reduced};
      } catch (const std::exception&) {
        header.reset();
      }

      lock.lock();
      busy_ = false;
      const bool stale = latest_ != job.state.revision || pending_.has_value();
      if (header && !stale) {
        if (reduced) {
          refine_ = Job{job.grid, job.state, true};
          refine_at_ = std::chrono::steady_clock::now() + options_.refine_delay;
        }
        lock.unlock();
        deliver_(*header, std::move(png));
        lock.lock();
      }
    }
  }

  Deliver deliver_;
  SchedulerOptions options_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::optional<Job> pending_;
  std::optional<Job> refine_;
  std::chrono::steady_clock::time_point refine_at_;
  std::uint64_t latest_ = 0;
  bool busy_ = false;
  std::jthread thread_;
};

}  // namespace dvr
