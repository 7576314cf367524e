// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

// dvr: render volumes, generate phantoms, score segmentations, serve viewers.
//
// Exit status: 0 ok, 1 input error, 2 internal error. Diagnostics go to
// stderr; data and written paths go to stdout.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvr/evaluation.hpp"
#include "dvr/io.hpp"
#include "dvr/scene.hpp"
#include "dvr/service.hpp"
#include "dvr/views.hpp"
#include "server.hpp"

namespace fs = std::filesystem;
using namespace dvr;

namespace {

// Bad user input. The message names the offending file or field.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw InputError(what + " " + path + ": no such file");
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

// Runs `f`, prefixing any input error with the file it came from.
template <typename F>
auto from_file(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw InputError(path + ": " + e.field() + ": " + e.message());
  } catch (const FormatError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string with_suffix(const std::string& out, const std::string& suffix) {
  const fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "_" + suffix + p.extension().string())).string();
}

std::vector<std::string> sorted_pngs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("directory " + dir + ": not found");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// ---------------------------------------------------------------------------
// Volume and scene flags shared by render, ablate and shininess-sweep.

struct VolumeFlags {
  std::string volume;
  std::string meta;

  void add(CLI::App& app) {
    app.add_option("--volume", volume, "RAW volume, or a directory of 8-bit grayscale PNG slices")->required();
    app.add_option("--meta", meta, "JSON sidecar (default: volume path with .json)");
  }

  VolumeGrid load() const {
    if (fs::is_directory(volume)) {
      const auto files = sorted_pngs(volume);
      return from_file(volume, [&] { return load_slice_stack_files(std::span<const std::string>(files)); });
    }
    std::string meta_path = meta;
    if (meta_path.empty()) meta_path = fs::path(volume).replace_extension(".json").string();
    const std::string meta_text = read_text(meta_path, "meta file");
    std::vector<std::string> warnings;
    const VolumeMeta m = from_file(meta_path, [&] { return parse_volume_meta_text(meta_text, &warnings); });
    for (const std::string& w : warnings) std::cerr << "dvr: " << meta_path << ": " << w << '\n';
    if (!fs::exists(volume)) throw InputError("volume " + volume + ": no such file");
    const auto bytes = read_file_bytes(volume);
    return from_file(volume, [&] { return load_raw_volume(bytes, m); });
  }
};

struct SceneFlags {
  VolumeFlags vol;
  std::string tf_path, shading_path, camera_path, sampling_path;
  std::string view = "free";
  std::string model;
  double step = 0, ambient = 0, diffuse = 0, specular = 0, shininess = 0, early = 0;
  int cel_bands = 0, width = kDefaultImageSize, height = kDefaultImageSize;
  std::vector<double> background, light_dir;
  unsigned threads = 0;
  bool print_config = false;
  std::string out;

  CLI::App* app = nullptr;

  void add(CLI::App& a) {
    app = &a;
    vol.add(a);
    a.add_option("--tf", tf_path, "transfer function JSON");
    a.add_option("--shading", shading_path, "shading config JSON");
    a.add_option("--camera", camera_path, "camera JSON, complete or partial, applied on top of --view");
    a.add_option("--sampling", sampling_path, "sampling config JSON");
    a.add_option("--view", view, "preset view")->check(CLI::IsMember({"axial", "coronal", "sagittal", "free"}));
    a.add_option("--step", step, "ray step in millimeters");
    a.add_option("--early-termination", early, "opacity at which rays stop");
    a.add_option("--background", background, "background color r g b")->expected(3);
    a.add_option("--model", model, "shading model")->check(CLI::IsMember({"phong", "cel", "none"}));
    a.add_option("--ambient", ambient, "ambient coefficient");
    a.add_option("--diffuse", diffuse, "diffuse coefficient");
    a.add_option("--specular", specular, "specular coefficient");
    a.add_option("--shininess", shininess, "specular exponent");
    a.add_option("--cel-bands", cel_bands, "diffuse bands for cel shading");
    a.add_option("--light-dir", light_dir, "direction toward the light x y z (default: headlight)")->expected(3);
    a.add_option("--width", width, "image width");
    a.add_option("--height", height, "image height");
    a.add_option("--threads", threads, "render threads (default: hardware parallelism)");
    a.add_flag("--print-config", print_config, "print the effective scene JSON to stdout");
    a.add_option("--out", out, "output image (.png or .ppm)")->required();
  }

  bool given(const char* flag) const { return app->count(flag) > 0; }

  ResolvedScene resolve(const VolumeGrid& grid) const {
    SceneDoc doc;
    if (!tf_path.empty()) {
      const std::string text = read_text(tf_path, "tf file");
      doc.tf = from_file(tf_path, [&] { return parse_document(text, "tf", transfer_function_from_json); });
    }
    ShadingConfig shading;
    if (!shading_path.empty()) {
      const std::string text = read_text(shading_path, "shading file");
      shading = from_file(shading_path, [&] {
        return parse_document(text, "shading", [](const json& j) { return shading_from_json(j); });
      });
    }
    json sh = json::object();
    if (given("--model")) sh["model"] = model;
    if (given("--ambient")) sh["ambient"] = ambient;
    if (given("--diffuse")) sh["diffuse"] = diffuse;
    if (given("--specular")) sh["specular"] = specular;
    if (given("--shininess")) sh["shininess"] = shininess;
    if (given("--cel-bands")) sh["cel_bands"] = cel_bands;
    if (given("--light-dir")) sh["light_dir"] = light_dir;
    doc.shading = from_file("command line", [&] { return shading_from_json(sh, shading); });

    SamplingConfig sampling;
    if (!sampling_path.empty()) {
      const std::string text = read_text(sampling_path, "sampling file");
      sampling = from_file(sampling_path, [&] {
        return parse_document(text, "sampling", [](const json& j) { return sampling_from_json(j); });
      });
    }
    json sa = json::object();
    if (given("--step")) sa["step"] = step;
    if (given("--early-termination")) sa["early_termination_alpha"] = early;
    if (given("--background")) sa["background"] = background;
    doc.sampling = from_file("command line", [&] { return sampling_from_json(sa, sampling); });

    std::optional<SliceAxis> axis;
    if (view != "free") axis = parse_slice_axis(view);
    if (!camera_path.empty()) {
      // Applied on top of the --view camera; flags win over the file for size.
      const std::string text = read_text(camera_path, "camera file");
      Camera cam = from_file(camera_path, [&] {
        return parse_document(text, "camera", [&](const json& j) { return camera_over_view(j, grid, axis, width, height); });
      });
      if (given("--width") || given("--height"))
        cam = from_file("command line", [&] {
          return cam.resized(given("--width") ? width : cam.width(), given("--height") ? height : cam.height());
        });
      doc.camera = cam;
    }
    return from_file("command line", [&] { return resolve_scene(grid, doc, axis, width, height); });
  }

  void maybe_print(const ResolvedScene& s) const {
    if (!print_config) return;
    SceneDoc d{s.camera, s.sampling, s.tf, s.shading};
    std::cout << to_json(d).dump(2) << '\n';
  }
};

void render_to(const VolumeGrid& grid, const ResolvedScene& scene, unsigned threads, const std::string& path) {
  RenderStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  const FrameImage img = render_scene(grid, scene, RenderOptions{threads}, &stats);
  const auto t1 = std::chrono::steady_clock::now();
  write_file_bytes(path, encode_frame(img, path));
  const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  std::cout << path << " render_ms=" << static_cast<long long>(std::llround(ms)) << " rays_cast=" << stats.rays_cast
            << " rays_hit=" << stats.rays_hit << " samples=" << stats.samples
            << " early_terminations=" << stats.early_terminations << '\n';
}

int cmd_render(const SceneFlags& f) {
  const VolumeGrid grid = f.vol.load();
  const ResolvedScene scene = f.resolve(grid);
  f.maybe_print(scene);
  render_to(grid, scene, f.threads, f.out);
  return 0;
}

// All eight on/off combinations of the three Phong terms. Enabled terms keep
// their configured coefficients.
int cmd_ablate(const SceneFlags& f) {
  const VolumeGrid grid = f.vol.load();
  const ResolvedScene base = f.resolve(grid);
  f.maybe_print(base);
  for (int mask = 0; mask < 8; ++mask) {
    ResolvedScene s = base;
    s.shading.model = ShadingModel::phong;
    std::string suffix;
    if (mask & 1) suffix += "a"; else s.shading.ambient = 0.0;
    if (mask & 2) suffix += "d"; else s.shading.diffuse = 0.0;
    if (mask & 4) suffix += "s"; else s.shading.specular = 0.0;
    render_to(grid, s, f.threads, with_suffix(f.out, suffix.empty() ? "none" : suffix));
  }
  return 0;
}

int cmd_sweep(const SceneFlags& f, const std::vector<double>& values) {
  const VolumeGrid grid = f.vol.load();
  const ResolvedScene base = f.resolve(grid);
  f.maybe_print(base);
  for (const double n : values) {
    ResolvedScene s = base;
    s.shading.shininess = n;
    from_file("command line", [&] { s.shading.validate(); return 0; });
    render_to(grid, s, f.threads, with_suffix(f.out, "n" + format_number(n)));
  }
  return 0;
}

struct DiceFlags {
  VolumeFlags vol;
  std::string gt_dir, axis = "axial", tf_path, pathway = "threshold", out;
  double theta = 0.5;
  bool foreground_only = false;
};

int cmd_dice(const DiceFlags& f) {
  const VolumeGrid grid = f.vol.load();
  const SliceAxis axis = parse_slice_axis(f.axis);
  std::optional<TransferFunction> tf;
  if (!f.tf_path.empty()) {
    const std::string text = read_text(f.tf_path, "tf file");
    tf = from_file(f.tf_path, [&] { return parse_document(text, "tf", transfer_function_from_json); });
  }
  std::vector<BinaryMask> gt;
  for (const std::string& p : sorted_pngs(f.gt_dir))
    gt.push_back(from_file(p, [&] { return mask_from_gray8(decode_png(read_file_bytes(p))); }));
  const auto pathway = f.pathway == "rendered" ? SegmentationPathway::rendered : SegmentationPathway::threshold;
  const DiceCurve curve =
      from_file(f.gt_dir, [&] { return dice_curve(grid, gt, axis, f.theta, tf ? &*tf : nullptr, pathway); });
  const double mean = f.foreground_only ? mean_dice_over_foreground(curve) : curve.mean;
  std::size_t scored = 0;
  for (const DiceEntry& e : curve.entries) scored += !f.foreground_only || !e.gt_empty;
  std::ostringstream summary;
  summary << "mean_dice=" << std::fixed << std::setprecision(6) << mean << " slices=" << scored;
  if (f.out.empty()) {
    std::cout << curve.to_csv();
    std::cerr << summary.str() << '\n';
  } else {
    const std::string csv = curve.to_csv();
    write_file_bytes(f.out, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    std::cout << f.out << ' ' << summary.str() << '\n';
  }
  return 0;
}

struct PhantomFlags {
  std::string spec_path, preset = "sphere-pyramid", out = ".", name = "phantom";
  int size = 64;
  bool masks = true;
};

// Writes <name>.raw (u16 little-endian), <name>.json and, per primitive and
// axis, one 0/255 PNG mask per slice under <name>_masks/<primitive>/<axis>/.
int cmd_phantom(const PhantomFlags& f) {
  PhantomSpec spec;
  if (!f.spec_path.empty()) {
    const std::string text = read_text(f.spec_path, "phantom spec");
    spec = from_file(f.spec_path, [&] { return parse_phantom_spec_text(text); });
  } else if (f.preset == "sphere-pyramid") {
    spec = sphere_pyramid_phantom(f.size);
  } else {
    const double c = (f.size - 1) / 2.0;
    spec.dims = {f.size, f.size, f.size};
    spec.primitives.push_back({"sphere", Sphere{{c, c, c}, 0.375 * (f.size - 1)}, 0.8});
  }
  const Phantom<> ph = from_file(f.spec_path.empty() ? "preset" : f.spec_path, [&] { return generate_phantom(spec); });
  fs::create_directories(f.out);
  const fs::path dir(f.out);
  const IntensityRange range{0.0, 65535.0};
  const VolumeMeta meta{ph.grid.dims(), ph.grid.spacing(), SampleType::u16le, range};
  const std::string raw = (dir / (f.name + ".raw")).string();
  const std::string meta_path = (dir / (f.name + ".json")).string();
  write_file_bytes(raw, write_raw_volume(ph.grid, SampleType::u16le, range));
  const std::string meta_text = to_json(meta).dump(2) + "\n";
  write_file_bytes(meta_path, std::span(reinterpret_cast<const std::uint8_t*>(meta_text.data()), meta_text.size()));
  std::cout << raw << '\n' << meta_path << '\n';
  if (!f.masks) return 0;
  for (std::size_t m = 0; m < ph.masks.size(); ++m) {
    for (const SliceAxis axis : {SliceAxis::axial, SliceAxis::coronal, SliceAxis::sagittal}) {
      const fs::path sub = dir / (f.name + "_masks") / spec.primitives[m].name / std::string(to_string(axis));
      fs::create_directories(sub);
      const int n = ph.grid.dims()[static_cast<std::size_t>(slice_layout(axis).normal_axis)];
      for (int k = 0; k < n; ++k) {
        char file[32];
        std::snprintf(file, sizeof file, "%04d.png", k);
        write_file_bytes((sub / file).string(), encode_png(mask_to_gray8(extract_mask_slice(ph.masks[m], axis, k))));
      }
      std::cout << sub.string() << '\n';
    }
  }
  return 0;
}

struct ServeFlags {
  std::string data, address = "127.0.0.1";
  unsigned short port = 8080;
  unsigned threads = 0;
  int io_threads = 2, interactive = 384, refine_ms = 300, idle_s = 600;
};

int cmd_serve(const ServeFlags& f) {
  std::vector<std::string> warnings;
  auto catalog = std::make_shared<const Catalog>(
      from_file(f.data, [&] { return Catalog::from_directory(f.data, &warnings); }));
  for (const std::string& w : warnings) std::cerr << "dvr: " << w << '\n';
  server::ServerOptions opt;
  opt.address = f.address;
  opt.port = f.port;
  opt.io_threads = f.io_threads;
  opt.scheduler.interactive_limit = f.interactive;
  opt.scheduler.refine_delay = std::chrono::milliseconds(f.refine_ms);
  opt.scheduler.render.threads = f.threads;
  opt.idle_timeout = std::chrono::seconds(f.idle_s);
  opt.handle_signals = true;
  server::Server srv(catalog, opt);
  std::cout << "listening on http://" << f.address << ':' << srv.port() << " with " << catalog->size() << " volume(s)"
            << std::endl;
  srv.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct volume rendering by ray casting"};
  app.require_subcommand(1);

  SceneFlags render_flags, ablate_flags, sweep_flags;
  render_flags.add(*app.add_subcommand("render", "render one image"));
  ablate_flags.add(*app.add_subcommand("ablate", "render all 8 ambient/diffuse/specular combinations"));
  auto* sweep = app.add_subcommand("shininess-sweep", "render one image per shininess value");
  sweep_flags.add(*sweep);
  std::vector<double> sweep_values{5, 20, 60, 200};
  sweep->add_option("--values", sweep_values, "shininess values")->capture_default_str();

  DiceFlags dice_flags;
  auto* dice_cmd = app.add_subcommand("dice", "score slices against ground-truth masks");
  dice_flags.vol.add(*dice_cmd);
  dice_cmd->add_option("--gt", dice_flags.gt_dir, "directory of 0/255 PNG masks, one per slice in name order")
      ->required();
  dice_cmd->add_option("--axis", dice_flags.axis, "slice axis")->check(CLI::IsMember({"axial", "coronal", "sagittal"}));
  dice_cmd->add_option("--theta", dice_flags.theta, "segmentation threshold")->capture_default_str();
  dice_cmd->add_option("--tf", dice_flags.tf_path, "transfer function applied before thresholding");
  dice_cmd->add_option("--pathway", dice_flags.pathway, "segmentation pathway")
      ->check(CLI::IsMember({"threshold", "rendered"}));
  dice_cmd->add_flag("--foreground-only", dice_flags.foreground_only, "average only slices with non-empty masks");
  dice_cmd->add_option("--out", dice_flags.out, "CSV output (default: stdout)");

  PhantomFlags phantom_flags;
  auto* phantom = app.add_subcommand("phantom", "generate a synthetic phantom with masks");
  phantom->add_option("--spec", phantom_flags.spec_path, "phantom spec JSON");
  phantom->add_option("--preset", phantom_flags.preset, "built-in spec when --spec is absent")
      ->check(CLI::IsMember({"sphere-pyramid", "sphere"}));
  phantom->add_option("--size", phantom_flags.size, "edge length of preset phantoms")->check(CLI::Range(8, 1024));
  phantom->add_option("--out", phantom_flags.out, "output directory")->capture_default_str();
  phantom->add_option("--name", phantom_flags.name, "file name stem")->capture_default_str();
  bool no_masks = false;
  phantom->add_flag("--no-masks", no_masks, "skip mask images");

  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "run the HTTP/WebSocket render service");
  serve->add_option("--data", serve_flags.data, "directory of <id>.raw + <id>.json volumes")->required();
  serve->add_option("--port", serve_flags.port, "listen port")->capture_default_str();
  serve->add_option("--address", serve_flags.address, "listen address")->capture_default_str();
  serve->add_option("--threads", serve_flags.threads, "render threads per frame");
  serve->add_option("--io-threads", serve_flags.io_threads, "network threads")->capture_default_str();
  serve->add_option("--interactive-size", serve_flags.interactive, "max side of interactive frames")
      ->capture_default_str();
  serve->add_option("--refine-ms", serve_flags.refine_ms, "idle delay before the full-size frame")
      ->capture_default_str();
  serve->add_option("--idle-timeout", serve_flags.idle_s, "seconds before an idle session closes")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("render")) return cmd_render(render_flags);
    if (app.got_subcommand("ablate")) return cmd_ablate(ablate_flags);
    if (app.got_subcommand("shininess-sweep")) return cmd_sweep(sweep_flags, sweep_values);
    if (app.got_subcommand("dice")) return cmd_dice(dice_flags);
    if (app.got_subcommand("phantom")) {
      phantom_flags.masks = !no_masks;
      return cmd_phantom(phantom_flags);
    }
    if (app.got_subcommand("serve")) return cmd_serve(serve_flags);
  } catch (const InputError& e) {
    std::cerr << "dvr: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "dvr: " << e.field() << ": " << e.message() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "dvr: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dvr: internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
