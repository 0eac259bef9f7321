// dhm: offline reconstruction, focus sweeps, benchmarks, synthetic holograms
// and the live reconstruction service.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dhm/bench.hpp"
#include "dhm/focus.hpp"
#include "dhm/image_io.hpp"
#include "dhm/ingest.hpp"
#include "dhm/pipeline.hpp"
#include "dhm/service.hpp"

namespace fs = std::filesystem;
using namespace dhm;

namespace {

// Raised for invalid flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputFlags {
  std::string input;
  double pitch = 0.0;
  double wavelength = 650e-9;
  Index target_width = 0;
  Index target_height = 0;
};

void add_input_flags(CLI::App* cmd, InputFlags& f) {
  cmd->add_option("--input", f.input, "Hologram image (PNG, PGM, RIMG or CFLD)")->required();
  cmd->add_option("--pitch", f.pitch, "Pixel pitch in meters (required for PNG/PGM)");
  cmd->add_option("--wavelength", f.wavelength, "Wavelength in meters")->capture_default_str();
  cmd->add_option("--target-width", f.target_width, "Downsample to this width first");
  cmd->add_option("--target-height", f.target_height, "Downsample to this height first");
}

HologramFrame load_input(const InputFlags& f) {
  std::optional<Pitch> pitch;
  if (f.pitch != 0.0) pitch = Pitch::square(f.pitch);
  const ImageFileFormat format = detect_format(f.input);
  if (!pitch && (format == ImageFileFormat::Png || format == ImageFileFormat::Pgm))
    throw UsageError("--pitch is required for PNG and PGM input");
  Image img = read_grayscale(f.input, pitch);
  if (f.target_width > 0 || f.target_height > 0)
    img = downsample(img, f.target_width > 0 ? f.target_width : img.width(),
                     f.target_height > 0 ? f.target_height : img.height());
  OpticalParams optics{f.wavelength};
  optics.validate();
  return {std::move(img), std::nullopt, optics};
}

ReconstructionParams make_params(double focus, double zoom, const std::string& method, OutputKind output) {
  ReconstructionParams p;
  p.z = -focus;
  p.magnification = zoom;
  p.method = method_from_string(method);
  p.output = output;
  const ClampResult r = clamp_params(p);
  if (r.clamped) std::cerr << "dhm: " << r.advisory << "\n";
  return r.params;
}

void write_output(const fs::path& path, const Image& display) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_image_file(path, display, 8);
}

struct ReconstructFlags {
  InputFlags in;
  double z = 0.011;
  double zoom = 1.0;
  std::string method = "bldsf";
  std::string out_amp;
  std::string out_phase;
};

int cmd_reconstruct(const ReconstructFlags& f) {
  if (f.out_amp.empty() && f.out_phase.empty()) throw UsageError("give --out-amp and/or --out-phase");
  const HologramFrame frame = load_input(f.in);
  const OutputKind out = f.out_amp.empty() ? OutputKind::Phase : (f.out_phase.empty() ? OutputKind::Amplitude : OutputKind::Both);
  const ReconstructionParams params = make_params(f.z, f.zoom, f.method, out);
  Reconstructor r(1);
  const auto t0 = Clock::now();
  const TimedFrame tf = r.reconstruct(frame, params);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  if (tf.amplitude) write_output(f.out_amp, Image(tf.amplitude->values(), tf.output_pitch));
  if (tf.phase) write_output(f.out_phase, Image(tf.phase->values(), tf.output_pitch));
  std::cout << "method " << to_string(tf.params.method) << ", z " << tf.params.focus_distance() << " m, M "
            << tf.params.magnification << ", " << frame.image.width() << "x" << frame.image.height()
            << ", output pitch " << tf.output_pitch.x << " m, " << std::fixed << std::setprecision(1) << ms << " ms\n";
  return 0;
}

struct SweepFlags {
  InputFlags in;
  double z_start = 0.0;
  double z_end = 0.0;
  int steps = 0;
  double zoom = 1.0;
  std::string method = "bldsf";
  std::string out_dir = "sweep";
  std::string report;
  double roi = 0.5;
};

int cmd_sweep(const SweepFlags& f) {
  if (f.steps < 2) throw UsageError("--steps must be at least 2");
  if (f.z_start == f.z_end) throw UsageError("--z-start and --z-end must differ");
  const HologramFrame frame = load_input(f.in);
  fs::create_directories(f.out_dir);
  SweepOptions opt;
  opt.method = method_from_string(f.method);
  opt.magnification = f.zoom;
  opt.roi_fraction = f.roi;
  int index = 0;
  opt.on_image = [&](const SweepPoint& p, const Image& amp) {
    std::ostringstream name;
    name << "amp_" << std::setw(4) << std::setfill('0') << index++ << "_" << std::fixed << std::setprecision(3)
         << p.focus_distance * 1e3 << "mm.png";
    write_png(fs::path(f.out_dir) / name.str(), to_display(amp, DisplayMode::Amplitude), 8);
  };
  const SweepResult res = focus_sweep(frame, linspace(f.z_start, f.z_end, f.steps), opt);
  const fs::path report = f.report.empty() ? fs::path(f.out_dir) / "sweep.txt" : fs::path(f.report);
  std::ofstream out(report);
  if (!out) throw IoError("cannot write " + report.string());
  out << "# z_m normalized_variance\n" << std::setprecision(9);
  for (std::size_t i = 0; i < res.points.size(); ++i)
    out << res.points[i].focus_distance << " " << res.points[i].sharpness << (i == res.best ? " *max" : "") << "\n";
  out << "best_z_m " << res.best_distance() << "\n";
  std::cout << "best focus " << std::setprecision(6) << res.best_distance() << " m (" << res.points.size()
            << " steps), report " << report.string() << "\n";
  return 0;
}

struct BenchFlags {
  Index width = 1920;
  Index height = 1440;
  int frames = 5;
  std::string methods = "asm,bldsf";
  std::uint64_t seed = 1;
  double zoom = 1.0;
};

int cmd_bench(const BenchFlags& f) {
  if (f.width < 64 || f.height < 64) throw UsageError("--width and --height must be at least 64");
  BenchOptions o;
  o.width = f.width;
  o.height = f.height;
  o.frames = f.frames;
  o.seed = f.seed;
  o.magnification = f.zoom;
  o.methods.clear();
  std::stringstream ss(f.methods);
  for (std::string m; std::getline(ss, m, ',');)
    if (!m.empty()) {
      try {
        o.methods.push_back(method_from_string(m));
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
    }
  if (o.methods.empty()) throw UsageError("--methods is empty");
  std::cout << bench_report_json_lines(run_bench(o)) << std::flush;
  return 0;
}

struct ServeFlags {
  std::string config;
  int port = -1;
  std::string viewer_dir;
};

int cmd_serve(const ServeFlags& f) {
  KeyValueConfig cfg = f.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(f.config);
  if (f.port >= 0) cfg.set("server.port", std::to_string(f.port));
  if (!f.viewer_dir.empty()) cfg.set("server.viewer_dir", f.viewer_dir);
  SourceConfig src = source_config_from(cfg);
  if (src.kind == SourceKind::Synthetic && src.object.shapes.empty()) src.object = particle_scene(1);
  const ServiceConfig svc_cfg = service_config_from(cfg);

  std::unique_ptr<FrameSource> source = make_source(src);
  auto first = source->next_frame();
  if (!first) throw IoError("source produced no frames");
  const ServiceInfo info{first->image.width(), first->image.height(), first->image.pitch(), first->optics.wavelength,
                         svc_cfg.initial};
  if (src.kind == SourceKind::RawStream) source = std::make_unique<LatestFrameSource>(std::move(source));
  Service service(svc_cfg, std::make_unique<PrefetchedSource>(std::move(*first), std::move(source)), info);
  service.start();
  std::cout << "listening on http://" << svc_cfg.address << ":" << service.port() << " (" << info.width << "x"
            << info.height << ", source " << to_string(src.kind) << ")" << std::endl;
  service.wait();
  service.stop();
  return 0;
}

struct SimulateFlags {
  std::string preset = "disk";
  std::string config;
  double z = 0.011;
  Index width = 256;
  Index height = 256;
  double pitch = 2.5e-6;
  double wavelength = 650e-9;
  double noise = 0.0;
  std::uint64_t seed = 1;
  double gain = 16384.0;
  std::string out;
};

int cmd_simulate(const SimulateFlags& f) {
  const GridSpec grid{f.width, f.height, Pitch::square(f.pitch)};
  ObjectSpec spec;
  if (!f.config.empty()) {
    spec = object_spec_from_config(KeyValueConfig::load(f.config));
  } else if (f.preset == "disk") {
    spec = ObjectSpec::opaque_disk(50e-6);
  } else if (f.preset == "phase_disk") {
    spec = ObjectSpec::phase_disk(50e-6, std::numbers::pi / 2);
  } else if (f.preset == "bars") {
    BarTarget b;
    b.width = 200e-6;
    b.height = 200e-6;
    spec = ObjectSpec::bar_target(b);
  } else if (f.preset == "particles") {
    spec = particle_scene(f.seed);
  } else if (f.preset == "random") {
    spec = random_scene(f.seed, grid);
  } else {
    throw UsageError("unknown preset '" + f.preset + "'");
  }
  const HologramFrame h = generate_hologram(spec, f.z, grid, OpticalParams{f.wavelength}, NoiseOptions{f.noise, f.seed});
  const fs::path out(f.out);
  const std::string ext = out.extension().string();
  if (ext == ".png" || ext == ".pgm")
    write_image_file(out, Image(h.image.values() * f.gain, h.image.pitch()), 16);
  else
    save_image(out, h.image);
  std::cout << "wrote " << out.string() << " (" << f.width << "x" << f.height << ", z " << f.z << " m)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inline digital holographic microscopy reconstruction"};
  app.require_subcommand(1);

  ReconstructFlags rf;
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct one hologram to amplitude/phase images");
  add_input_flags(rec, rf.in);
  rec->add_option("--z", rf.z, "Focus distance in meters")->capture_default_str();
  rec->add_option("--zoom", rf.zoom, "Magnification M (BL-DSF only)")->capture_default_str();
  rec->add_option("--method", rf.method, "asm or bldsf")->check(CLI::IsMember({"asm", "bldsf"}))->capture_default_str();
  rec->add_option("--out-amp", rf.out_amp, "Amplitude image (.png, .pgm, or .rimg with pitch)");
  rec->add_option("--out-phase", rf.out_phase, "Phase image (.png, .pgm, or .rimg with pitch)");

  SweepFlags sf;
  auto* sweep = app.add_subcommand("sweep", "Reconstruct over a range of focus distances");
  add_input_flags(sweep, sf.in);
  sweep->add_option("--z-start", sf.z_start, "First focus distance (m)")->required();
  sweep->add_option("--z-end", sf.z_end, "Last focus distance (m)")->required();
  sweep->add_option("--steps", sf.steps, "Number of distances")->required();
  sweep->add_option("--zoom", sf.zoom, "Magnification M")->capture_default_str();
  sweep->add_option("--method", sf.method, "asm or bldsf")->check(CLI::IsMember({"asm", "bldsf"}))->capture_default_str();
  sweep->add_option("--out-dir", sf.out_dir, "Directory for images and report")->capture_default_str();
  sweep->add_option("--report", sf.report, "Report path (default OUT_DIR/sweep.txt)");
  sweep->add_option("--roi", sf.roi, "Central fraction scored per axis")->check(CLI::Range(0.01, 1.0))->capture_default_str();

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Time ASM and BL-DSF reconstruction");
  bench->add_option("--width", bf.width)->capture_default_str();
  bench->add_option("--height", bf.height)->capture_default_str();
  bench->add_option("--frames", bf.frames)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--methods", bf.methods, "Comma-separated list")->capture_default_str();
  bench->add_option("--seed", bf.seed)->capture_default_str();
  bench->add_option("--zoom", bf.zoom)->capture_default_str();

  ServeFlags vf;
  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket reconstruction service");
  serve->add_option("--config", vf.config, "key = value config file");
  serve->add_option("--port", vf.port, "Override server.port (0 picks a free port)");
  serve->add_option("--viewer-dir", vf.viewer_dir, "Override server.viewer_dir");

  SimulateFlags mf;
  auto* sim = app.add_subcommand("simulate", "Write a synthetic in-line hologram");
  sim->add_option("--preset", mf.preset, "disk, phase_disk, bars, particles or random")->capture_default_str();
  sim->add_option("--objects", mf.config, "Object config file (object.N.* keys); overrides --preset");
  sim->add_option("--z", mf.z, "Object distance (m)")->capture_default_str();
  sim->add_option("--width", mf.width)->capture_default_str();
  sim->add_option("--height", mf.height)->capture_default_str();
  sim->add_option("--pitch", mf.pitch)->capture_default_str();
  sim->add_option("--wavelength", mf.wavelength)->capture_default_str();
  sim->add_option("--noise", mf.noise, "Gaussian noise sigma (intensity units)")->capture_default_str();
  sim->add_option("--seed", mf.seed)->capture_default_str();
  sim->add_option("--gain", mf.gain, "Intensity scale for PNG/PGM output")->capture_default_str();
  sim->add_option("--out", mf.out, "Output path (.rimg, .png or .pgm)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "dhm: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*rec) return cmd_reconstruct(rf);
    if (*sweep) return cmd_sweep(sf);
    if (*bench) return cmd_bench(bf);
    if (*serve) return cmd_serve(vf);
    if (*sim) return cmd_simulate(mf);
  } catch (const UsageError& e) {
    std::cerr << "dhm: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dhm: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
