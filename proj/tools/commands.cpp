#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "bdnn/container.hpp"
#include "bdnn/error.hpp"
#include "bdnn/manifest.hpp"
#include "bdnn/report.hpp"
#include "bdnn/rng.hpp"
#include "bdnn/synthetic.hpp"

namespace bdnn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

double relative_l2(const Tensor& approx, const Tensor& exact) {
  if (approx.size() != exact.size()) throw Error(ErrorCode::ShapeMismatch, "output sizes differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = static_cast<double>(approx[i]) - exact[i];
    num += d * d;
    den += static_cast<double>(exact[i]) * exact[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::sqrt(num);
  return std::sqrt(num / den);
}

std::size_t argmax(const Tensor& t) {
  const auto d = t.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

namespace {

Tensor input_for(const ModelShape& shape, std::uint64_t seed, std::size_t i) {
  return random_tensor(shape.input, derive_seed(seed, {i}));
}

void check_same_shape(const NetworkModel& model, const DecomposedModel& dec) {
  if (!(model.shape.input == dec.shape.input) || !(model.shape.layers == dec.shape.layers))
    throw Error(ErrorCode::ShapeMismatch, "decomposed model '" + dec.shape.name +
                                              "' does not match model '" + model.name() + "'");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
double time_once(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<CompareCell> compare_models(const NetworkModel& model,
                                        const std::vector<DecomposedModel>& decomposed,
                                        const CompareOptions& opts) {
  validate_model(model);
  std::vector<CompareCell> cells;
  if (opts.inputs == 0) return cells;
  const std::size_t first = first_weighted_layer(model.shape);

  std::vector<std::vector<Tensor>> exact;
  exact.reserve(opts.inputs);
  for (std::size_t i = 0; i < opts.inputs; ++i)
    exact.push_back(forward_layers(model, input_for(model.shape, opts.seed, i), opts.threads));

  for (DecomposedModel dec : decomposed) {
    check_same_shape(model, dec);
    if (opts.keep_exact_first) keep_layer_exact(dec, model, first);
    for (int bits : opts.bits) {
      CompareCell cell;
      cell.rank = dec.rank;
      cell.bits = bits;
      cell.inputs = opts.inputs;
      cell.first_layer_identical = true;
      std::vector<double> errs;
      std::size_t agree = 0;
      for (std::size_t i = 0; i < opts.inputs; ++i) {
        const ForwardOptions fo{Mode::Approx, bits, opts.threads};
        const std::vector<Tensor> approx = forward_layers(dec, input_for(model.shape, opts.seed, i), fo);
        errs.push_back(relative_l2(approx.back(), exact[i].back()));
        agree += argmax(approx.back()) == argmax(exact[i].back()) ? 1 : 0;
        cell.first_layer_identical = cell.first_layer_identical && approx[first] == exact[i][first];
      }
      double mean = 0.0;
      for (double e : errs) mean += e;
      mean /= static_cast<double>(errs.size());
      double var = 0.0;
      for (double e : errs) var += (e - mean) * (e - mean);
      var = errs.size() > 1 ? var / static_cast<double>(errs.size() - 1) : 0.0;
      cell.mean_rel_error = mean;
      cell.stderr_rel_error = std::sqrt(var / static_cast<double>(errs.size()));
      cell.top1_agreement = static_cast<double>(agree) / static_cast<double>(opts.inputs);
      cells.push_back(cell);
    }
  }
  return cells;
}

json compare_to_json(const std::vector<CompareCell>& cells, const CompareOptions& opts) {
  json out{{"schema", "bdnn.compare/1"}, {"inputs", opts.inputs}, {"seed", opts.seed},
           {"keep_exact_first", opts.keep_exact_first}, {"cells", json::array()}};
  for (const CompareCell& c : cells) {
    json cell{{"rank", c.rank}, {"bits", c.bits}, {"inputs", c.inputs},
              {"mean_rel_error", c.mean_rel_error}, {"stderr_rel_error", c.stderr_rel_error},
              {"top1_agreement", c.top1_agreement}};
    if (opts.keep_exact_first) cell["first_layer_identical"] = c.first_layer_identical;
    out["cells"].push_back(std::move(cell));
  }
  return out;
}

BenchResult bench_model(const DecomposedModel& decomposed, const NetworkModel& reference,
                        const BenchOptions& opts) {
  if (opts.runs < kMinBenchRuns)
    throw Error(ErrorCode::BadConfig, "bench needs at least " + std::to_string(kMinBenchRuns) + " runs");
  check_same_shape(reference, decomposed);
  const Tensor input = input_for(reference.shape, opts.seed, 0);
  const ForwardOptions fo{Mode::Approx, opts.bits, opts.threads};

  Tensor exact_out = forward(reference, input, opts.threads);
  Tensor approx_out = forward(decomposed, input, fo);

  BenchResult r;
  r.rank = decomposed.rank;
  r.bits = opts.bits;
  r.runs = opts.runs;
  r.threads = opts.threads;
  for (std::size_t i = 0; i < opts.runs; ++i)
    r.exact_samples.push_back(time_once([&] { exact_out = forward(reference, input, opts.threads); }));
  for (std::size_t i = 0; i < opts.runs; ++i)
    r.approx_samples.push_back(time_once([&] { approx_out = forward(decomposed, input, fo); }));
  r.exact_seconds = median(r.exact_samples);
  r.approx_seconds = median(r.approx_samples);
  r.speedup = r.exact_seconds / r.approx_seconds;
  r.rel_error = relative_l2(approx_out, exact_out);
  r.top1_agree = argmax(approx_out) == argmax(exact_out);
  const SizeReport size = size_report(decomposed.shape, decomposed.rank);
  r.size_original_mb = to_mib(size.conv_original_bytes + size.fc_original_bytes);
  r.size_decomposed_mb = to_mib(size.conv_decomposed_bytes + size.fc_decomposed_bytes);
  return r;
}

json bench_to_json(const BenchResult& r, const std::string& baseline) {
  return {{"schema", "bdnn.bench/1"},
          {"rank", r.rank},
          {"bits", r.bits},
          {"runs", r.runs},
          {"threads", r.threads},
          {"exact_ms", r.exact_seconds * 1e3},
          {"approx_ms", r.approx_seconds * 1e3},
          {"speedup", r.speedup},
          {"rel_error", r.rel_error},
          {"top1_agree", r.top1_agree},
          {"size", {{"original_mb", r.size_original_mb}, {"decomposed_mb", r.size_decomposed_mb}}},
          {"baseline", baseline},
          {"context", {{"reported_full_model_speedup", {{"alexnet", 1.79}, {"vgg16", 2.07}}}}}};
}

namespace {

ModelShape load_any_shape(const std::string& what) {
  fs::path path(what);
  if (!fs::exists(path)) {
    const fs::path bundled = bundled_manifest(what);
    if (!fs::exists(bundled)) throw Error(ErrorCode::Io, "no model or manifest named '" + what + "'");
    path = bundled;
  }
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "BDN1")) {
    const AnyModel m = deserialize(bytes);
    return std::visit([](const auto& v) { return v.shape; }, m);
  }
  return load_shape_manifest(path);
}

NetworkModel load_dense(const std::string& path) {
  return deserialize_dense(read_file(path));
}

DecomposedModel load_decomposed(const std::string& path) {
  return deserialize_decomposed(read_file(path));
}

std::vector<int> parse_bits(const std::vector<int>& bits) {
  for (int b : bits)
    if (b < 1 || b > 16) throw CLI::ValidationError("--qbits", "bit depth must be in [1, 16]");
  return bits;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binary-decomposed network inference and compression toolkit", "bdnn"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Structured JSON output on stdout");

  // generate
  std::string gen_manifest, gen_out, gen_mode = "gaussian";
  std::size_t gen_rank = 2;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dense model");
  gen->add_option("--manifest", gen_manifest, "Shape manifest path or bundled name")->required();
  gen->add_option("-o,--out", gen_out, "Output container")->required();
  gen->add_option("--mode", gen_mode, "gaussian | exact")->check(CLI::IsMember({"gaussian", "exact"}));
  gen->add_option("--rank", gen_rank, "Rank of exactly decomposable weights")->check(CLI::Range(1, 16));
  gen->add_option("--seed", gen_seed);
  gen->add_flag("--json", as_json);

  // decompose
  std::string dec_in, dec_out;
  DecomposeConfig cfg;
  int dec_threads = 1;
  bool dec_keep_first = false;
  auto* dec = app.add_subcommand("decompose", "Decompose every conv/fc layer into binary bases");
  dec->add_option("in", dec_in, "Dense model container")->required();
  dec->add_option("out", dec_out, "Decomposed model container")->required();
  dec->add_option("--rank", cfg.rank, "Basis rank k")->check(CLI::Range(1, 16));
  dec->add_option("--restarts", cfg.restarts, "Random restarts L")->check(CLI::Range(1, 1 << 20));
  dec->add_option("--max-iters", cfg.max_iters, "Alternations per restart")->check(CLI::Range(1, 1 << 20));
  dec->add_option("--tol", cfg.rel_tol, "Relative cost-decrease stopping threshold")->check(CLI::PositiveNumber);
  dec->add_option("--seed", cfg.seed);
  dec->add_option("--threads", dec_threads)->check(CLI::Range(1, 1024));
  dec->add_flag("--keep-exact-first", dec_keep_first, "Leave the first conv/fc layer dense");
  dec->add_flag("--json", as_json);

  // compare
  std::string cmp_model;
  std::vector<std::string> cmp_decomposed;
  CompareOptions cmp;
  std::vector<int> cmp_bits{4, 6, 8};
  auto* cmpc = app.add_subcommand("compare", "Exact vs approximate forward error and agreement");
  cmpc->add_option("model", cmp_model, "Dense model container")->required();
  cmpc->add_option("decomposed", cmp_decomposed, "One or more decomposed containers")->required();
  cmpc->add_option("--qbits", cmp_bits, "Bit depths to sweep")->delimiter(',');
  cmpc->add_option("--inputs", cmp.inputs, "Number of seeded random inputs");
  cmpc->add_option("--seed", cmp.seed);
  cmpc->add_option("--threads", cmp.threads)->check(CLI::Range(1, 1024));
  cmpc->add_flag("--keep-exact-first", cmp.keep_exact_first);
  cmpc->add_flag("--json", as_json);

  // bench
  std::string bench_model_path, bench_ref;
  BenchOptions bopts;
  auto* bench = app.add_subcommand("bench", "Median wall clock of exact vs binary forward");
  bench->add_option("decomposed", bench_model_path, "Decomposed container")->required();
  bench->add_option("--qbits", bopts.bits)->check(CLI::Range(1, 16));
  bench->add_option("--runs", bopts.runs, "Timed runs per path (>= 5)")
      ->check(CLI::Range(kMinBenchRuns, std::size_t{1} << 20));
  bench->add_option("--threads", bopts.threads)->check(CLI::Range(1, 1024));
  bench->add_option("--seed", bopts.seed);
  bench->add_option("--reference", bench_ref, "Dense container for the exact path (default: M c)");
  bench->add_flag("--json", as_json);

  // report
  std::string rep_model;
  std::size_t rep_rank = 6;
  int rep_bits = 6;
  auto* rep = app.add_subcommand("report", "Model size and operation-count accounting");
  rep->add_option("model", rep_model, "Manifest path, bundled manifest name, or container")->required();
  rep->add_option("--rank", rep_rank)->check(CLI::Range(1, 16));
  rep->add_option("--qbits", rep_bits)->check(CLI::Range(1, 16));
  rep->add_flag("--json", as_json);

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (std::string& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    cmp.bits = parse_bits(cmp_bits);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      SyntheticOptions so;
      so.mode = gen_mode == "exact" ? SyntheticMode::ExactlyDecomposable : SyntheticMode::Gaussian;
      so.rank = gen_rank;
      so.seed = gen_seed;
      const NetworkModel m = generate_synthetic(load_any_shape(gen_manifest), so);
      save_model(m, gen_out);
      if (as_json)
        out << json{{"schema", "bdnn.generate/1"}, {"out", gen_out}, {"layers", m.size()}}.dump(2) << '\n';
      else
        out << "wrote " << gen_out << " (" << m.size() << " layers)\n";
    } else if (*dec) {
      if (cfg.rank < 4) err << "warning: rank " << cfg.rank << " < 4 gives large approximation error\n";
      const std::vector<std::uint8_t> bytes = read_file(dec_in);
      const NetworkModel m = deserialize_dense(bytes);
      std::vector<LayerResidual> residuals;
      DecomposedModel d = decompose_model(m, cfg, {dec_threads, dec_keep_first}, &residuals);
      d.source_hash = fingerprint(bytes);
      save_model(d, dec_out);

      json layers = json::array();
      std::ostringstream text;
      text << fmt("%-6s %-6s %6s %8s %14s %14s %12s\n", "layer", "kind", "N", "D", "mean cost",
                  "max cost", "rel resid");
      for (const LayerResidual& r : residuals) {
        const LayerSpec& s = m.shape.layers[r.layer];
        double sum = 0.0, mx = 0.0;
        for (double c : r.costs) {
          sum += c;
          mx = std::max(mx, c);
        }
        const double mean = sum / static_cast<double>(r.costs.size());
        const double rel = r.weight_norm_sq > 0.0 ? sum / r.weight_norm_sq : 0.0;
        layers.push_back({{"layer", r.layer}, {"kind", to_string(s.kind)}, {"units", s.out_maps},
                          {"dim", s.weight_dim()}, {"mean_cost", mean}, {"max_cost", mx},
                          {"relative_residual", rel}});
        text << fmt("%-6zu %-6s %6zu %8zu %14.6g %14.6g %12.6g\n", r.layer, to_string(s.kind),
                    s.out_maps, s.weight_dim(), mean, mx, rel);
      }
      if (as_json)
        out << json{{"schema", "bdnn.decompose/1"}, {"rank", cfg.rank}, {"out", dec_out},
                    {"layers", std::move(layers)}}.dump(2) << '\n';
      else
        out << text.str();
    } else if (*cmpc) {
      const NetworkModel m = load_dense(cmp_model);
      std::vector<DecomposedModel> ds;
      for (const std::string& p : cmp_decomposed) ds.push_back(load_decomposed(p));
      const std::vector<CompareCell> cells = compare_models(m, ds, cmp);
      if (as_json) {
        out << compare_to_json(cells, cmp).dump(2) << '\n';
      } else {
        out << fmt("%4s %4s %14s %12s %10s\n", "k", "Q", "mean rel err", "std err", "top-1");
        for (const CompareCell& c : cells)
          out << fmt("%4zu %4d %14.6g %12.3g %10.3f\n", c.rank, c.bits, c.mean_rel_error,
                     c.stderr_rel_error, c.top1_agreement);
      }
    } else if (*bench) {
      const DecomposedModel d = load_decomposed(bench_model_path);
      const NetworkModel ref = bench_ref.empty() ? d.reconstructed() : load_dense(bench_ref);
      const BenchResult r = bench_model(d, ref, bopts);
      const std::string baseline =
          "scalar float dot product, double accumulation, no manual vectorization";
      if (as_json) {
        out << bench_to_json(r, baseline).dump(2) << '\n';
      } else {
        out << fmt("k=%zu Q=%d runs=%zu threads=%d\n", r.rank, r.bits, r.runs, r.threads)
            << fmt("exact  %10.3f ms (median)\n", r.exact_seconds * 1e3)
            << fmt("binary %10.3f ms (median)\n", r.approx_seconds * 1e3)
            << fmt("speedup %.3fx  rel error %.4g  top-1 %s\n", r.speedup, r.rel_error,
                   r.top1_agree ? "agrees" : "differs")
            << fmt("size %.2f MB -> %.2f MB\n", r.size_original_mb, r.size_decomposed_mb)
            << "baseline: " << baseline << '\n';
      }
    } else if (*rep) {
      const ModelShape shape = load_any_shape(rep_model);
      const SizeReport size = size_report(shape, rep_rank);
      const OpCountReport ops = opcount_report(shape, rep_rank, rep_bits);
      if (as_json)
        out << json{{"schema", "bdnn.report/1"}, {"model", shape.name}, {"size", to_json(size)},
                    {"ops", to_json(ops)}}.dump(2) << '\n';
      else
        out << shape.name << '\n' << to_text(size) << '\n' << to_text(ops);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace bdnn::cli
