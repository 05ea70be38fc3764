// trainer: command-line front end for the ultrasound feedback pipeline.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "usf/config.hpp"
#include "usf/dataset.hpp"
#include "usf/error.hpp"
#include "usf/json_io.hpp"
#include "usf/media_io.hpp"
#include "usf/pipeline.hpp"
#include "usf/service.hpp"
#include "usf/slippage.hpp"

namespace fs = std::filesystem;
using namespace usf;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid: return 2;
    case ErrorCode::SessionNotFound: return 3;
    case ErrorCode::ManifestCorrupt: return 4;
    case ErrorCode::DirNotWritable:
    case ErrorCode::DiskFull: return 5;
    default: return 1;
  }
}

struct RunOptions {
  std::string config;
  bool headless = false;
  std::string record;
  std::string listen;
  std::string rgb_source, us_source, audio_source;
  bool no_audio = false;
  std::optional<CalibrationProfile> calibration;  // used when the config has none
};

PipelineConfig build_config(const RunOptions& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : PipelineConfig::load(o.config);
  if (!o.rgb_source.empty()) cfg.rgb_source = o.rgb_source;
  if (!o.us_source.empty()) cfg.us_source = o.us_source;
  if (!o.audio_source.empty()) cfg.audio_source = o.audio_source;
  if (o.no_audio) cfg.audio_source.reset();
  if (!o.record.empty()) cfg.record_dir = fs::path(o.record);
  if (!cfg.calibration && !cfg.calibration_path) cfg.calibration = o.calibration;
  return cfg;
}

nlohmann::json summary_json(Pipeline& p) {
  nlohmann::json s = p.control({{"type", "get_status"}});
  s.erase("re");
  s.erase("ok");
  if (auto m = p.last_recording()) {
    nlohmann::json rec = {{"session_id", m->session_id}};
    for (const auto& st : m->streams) rec["frames"][std::string(to_string(st.id))] = st.frames.size();
    s["recorded"] = rec;
  }
  return s;
}

int run_pipeline(const RunOptions& o) {
  PipelineConfig cfg = build_config(o);
  Pipeline pipeline(cfg);

  std::unique_ptr<Service> service;
  std::string listen = o.listen;
  if (listen.empty() && !o.headless) listen = "127.0.0.1:8765";
  if (!listen.empty()) {
    const auto [host, port] = ws::parse_address(listen);
    service = std::make_unique<Service>(pipeline, host, port);
    std::cerr << "listening on " << (host.empty() ? "0.0.0.0" : host) << ":" << service->port() << "\n";
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  pipeline.start();
  while (!g_interrupted && (pipeline.running() || (service && !o.headless))) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  pipeline.stop();
  pipeline.wait();
  if (service) service->stop();
  std::cout << summary_json(pipeline).dump(2) << "\n";
  return 0;
}

int cmd_verify(const std::string& dir, bool decode) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::SessionNotFound, "no session directory " + dir);
  const VerifyReport r = verify_session(dir, decode);
  nlohmann::json j = {{"ok", r.ok}, {"problems", r.problems}, {"frames", r.frame_counts}};
  std::cout << j.dump(2) << "\n";
  return r.ok ? 0 : exit_code(ErrorCode::ManifestCorrupt);
}

int cmd_extract(const std::string& dir, const std::string& method, double threshold, int max_gap,
                const std::string& csv_path, const std::string& jsonl_path) {
  const auto contours = extract_session_contours(dir, parse_extraction_method(method), threshold, max_gap);
  std::ofstream csv_file;
  std::ostream* csv = &std::cout;
  if (!csv_path.empty()) {
    csv_file.open(csv_path);
    if (!csv_file) throw Error(ErrorCode::IoError, "cannot write " + csv_path);
    csv = &csv_file;
  }
  *csv << "frame_index,point_index,x,y\n";
  for (const auto& c : contours) {
    for (std::size_t i = 0; i < c.contour.points.size(); ++i) {
      *csv << c.frame_index << ',' << i << ',' << c.contour.points[i].x() << ',' << c.contour.points[i].y() << '\n';
    }
  }
  if (!jsonl_path.empty()) {
    std::ofstream out(jsonl_path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + jsonl_path);
    for (const auto& c : contours) out << contour_record(c.frame_index, c.ts, c.contour).dump() << '\n';
  }
  return 0;
}

int cmd_calibrate(const std::string& frame, const std::string& out, const std::string& detector_config, int us_w,
                  int us_h, const std::vector<double>& anchor) {
  ColorBlobConfig blob;
  if (!detector_config.empty()) {
    const auto j = read_json_file(detector_config);
    blob = (j.contains("detector") ? j["detector"].value("color_blob", nlohmann::json::object()) : j).get<ColorBlobConfig>();
  }
  const KeypointPair kp = detect_markers(read_png(frame), blob);
  const Point2d offset = anchor.size() == 2 ? Point2d(anchor[0], anchor[1]) : Point2d(0.5, 0.25);
  const CalibrationProfile cal = calibrate_from_markers(kp, FrameDims{us_w, us_h}, offset);
  write_json_file(out, cal);
  std::cout << nlohmann::json(cal).dump(2) << "\n";
  return 0;
}

int cmd_slippage(const std::string& csv, const std::string& out) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + csv);
  const nlohmann::json report = slippage_report_json(read_slippage_csv(in));
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json_file(out, report);
  }
  return 0;
}

int cmd_augment(const std::string& in, const std::string& out, const std::string& spec) {
  const auto specs = parse_augment_specs(read_json_file(spec));
  const AugmentSummary s = augment_dataset(in, out, specs);
  std::cout << nlohmann::json{{"written", s.written}, {"skipped", s.skipped}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ultrasound tongue-feedback pipeline"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run the live pipeline");
  run_cmd->add_option("--config", run.config, "Pipeline config JSON");
  run_cmd->add_flag("--headless", run.headless, "Process until the sources end, without a server");
  run_cmd->add_option("--record", run.record, "Record a session into this directory");
  run_cmd->add_option("--listen", run.listen, "Serve clients at addr:port");
  run_cmd->add_option("--rgb-source", run.rgb_source, "synthetic:<spec> | replay:<dir> | stub:<id>");
  run_cmd->add_option("--us-source", run.us_source, "synthetic:<spec> | replay:<dir> | stub:<id>");
  run_cmd->add_option("--audio-source", run.audio_source, "synthetic:<spec> | replay:<dir> | stub:<id>");
  run_cmd->add_flag("--no-audio", run.no_audio, "Run without an audio source");

  std::string replay_dir;
  RunOptions replay_opts;
  replay_opts.headless = true;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the pipeline on a recorded session");
  replay_cmd->add_option("dir", replay_dir, "Session directory")->required();
  replay_cmd->add_option("--config", replay_opts.config, "Pipeline config JSON");
  replay_cmd->add_option("--record", replay_opts.record, "Record the replayed run");
  replay_cmd->add_option("--listen", replay_opts.listen, "Serve clients at addr:port");

  std::string verify_dir;
  bool verify_decode = false;
  auto* verify_cmd = app.add_subcommand("verify", "Check a session against its manifest");
  verify_cmd->add_option("dir", verify_dir, "Session directory")->required();
  verify_cmd->add_flag("--decode", verify_decode, "Also decode every frame");

  std::string extract_dir, method = "top", csv_out, jsonl_out;
  double threshold = 0.5;
  int max_gap = kDefaultMaxGap;
  auto* extract_cmd = app.add_subcommand("extract-contours", "Extract tongue contours from a session's US frames");
  extract_cmd->add_option("dir", extract_dir, "Session directory")->required();
  extract_cmd->add_option("--method", method, "top | skeleton")->check(CLI::IsMember({"top", "skeleton"}));
  extract_cmd->add_option("--threshold", threshold, "Segmentation threshold")->check(CLI::Range(0.0, 1.0));
  extract_cmd->add_option("--max-gap", max_gap, "Largest column gap bridged by the top-pixel method");
  extract_cmd->add_option("--csv", csv_out, "CSV output (default stdout)");
  extract_cmd->add_option("--jsonl", jsonl_out, "JSON-lines output");

  std::string cal_frame, cal_out = "calib.json", cal_detector;
  int us_w = 256, us_h = 256;
  std::vector<double> anchor;
  auto* cal_cmd = app.add_subcommand("calibrate", "Write a calibration profile from a marker frame");
  cal_cmd->add_option("--from-frame", cal_frame, "RGB PNG showing both markers")->required();
  cal_cmd->add_option("--out", cal_out, "Output calib.json");
  cal_cmd->add_option("--detector-config", cal_detector, "ColorBlobConfig JSON or pipeline config");
  cal_cmd->add_option("--us-width", us_w, "Ultrasound frame width");
  cal_cmd->add_option("--us-height", us_h, "Ultrasound frame height");
  cal_cmd->add_option("--anchor-offset", anchor, "Anchor in marker units: x y")->expected(2);

  std::string slip_csv, slip_out;
  auto* slip_cmd = app.add_subcommand("analyze-slippage", "Summarise probe slippage trials");
  slip_cmd->add_option("csv", slip_csv, "trial,t_us,x,y,z,roll,yaw,pitch[,condition]")->required();
  slip_cmd->add_option("--out", slip_out, "Report JSON (default stdout)");

  std::string aug_in, aug_out, aug_spec;
  auto* aug_cmd = app.add_subcommand("augment", "Augment a labelled marker dataset");
  aug_cmd->add_option("--in", aug_in, "Directory with labels.jsonl and PNGs")->required();
  aug_cmd->add_option("--out", aug_out, "Output directory")->required();
  aug_cmd->add_option("--spec", aug_spec, "AugmentSpec JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_pipeline(run);
    if (*replay_cmd) {
      const std::string src = "replay:" + replay_dir;
      replay_opts.rgb_source = replay_opts.us_source = src;
      if (!fs::is_directory(replay_dir)) throw Error(ErrorCode::SessionNotFound, "no session directory " + replay_dir);
      const SessionManifest m = load_manifest(replay_dir);
      replay_opts.calibration = m.calibration;
      if (m.audio) {
        replay_opts.audio_source = src;
      } else {
        replay_opts.no_audio = true;
      }
      if (!replay_opts.listen.empty()) replay_opts.headless = false;
      return run_pipeline(replay_opts);
    }
    if (*verify_cmd) return cmd_verify(verify_dir, verify_decode);
    if (*extract_cmd) return cmd_extract(extract_dir, method, threshold, max_gap, csv_out, jsonl_out);
    if (*cal_cmd) return cmd_calibrate(cal_frame, cal_out, cal_detector, us_w, us_h, anchor);
    if (*slip_cmd) return cmd_slippage(slip_csv, slip_out);
    if (*aug_cmd) return cmd_augment(aug_in, aug_out, aug_spec);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
