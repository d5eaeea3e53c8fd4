// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Criteria 5 to 9 run the desk profile end to end, twice, in temp workspaces.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iterator>
#include <string>
#include <vector>

#include "haptigrasp/catalog.hpp"
#include "haptigrasp/commands.hpp"
#include "haptigrasp/dataset.hpp"
#include "haptigrasp/digest.hpp"
#include "haptigrasp/localize.hpp"
#include "haptigrasp/nn/loss.hpp"
#include "haptigrasp/nn/lstm.hpp"
#include "haptigrasp/nn/mlp.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/workspace.hpp"

using namespace hg;
using namespace hg::nn;
using hg::testing::numeric_gradient;
using hg::testing::relative_error;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = uniform(rng, -scale, scale);
  return m;
}

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  const auto track = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { worst = std::max(worst, relative_error(a, b)); };

  const std::vector<std::tuple<int, int, int, Activation>> dense_shapes{
      {5, 8, 3, Activation::tanh}, {3, 2, 1, Activation::sigmoid}, {7, 4, 5, Activation::identity},
      {6, 6, 2, Activation::relu}, {1, 9, 4, Activation::tanh}};
  for (const auto& [in, out, batch, act] : dense_shapes) {
    Dense<double> d(in, out, act);
    d.init(rng);
    d.b = random_matrix(out, 1, rng, 0.5);
    Eigen::MatrixXd x = random_matrix(in, batch, rng);
    const Eigen::MatrixXd r = random_matrix(out, batch, rng);
    const auto loss = [&] { return dense_forward(d, x).cwiseProduct(r).sum(); };
    const auto g = dense_backward(d, x, r);
    track(g.dx, numeric_gradient(loss, x));
    track(g.dW, numeric_gradient(loss, d.W));
    track(g.db, numeric_gradient(loss, d.b));
  }

  // Length-one sequences exercise the single recurrent step, longer ones BPTT.
  const std::vector<std::tuple<int, int, int, int>> lstm_shapes{{4, 6, 1, 1}, {3, 2, 1, 3}, {2, 3, 1, 2},
                                                                {5, 4, 1, 1}, {1, 5, 1, 4}, {4, 6, 7, 1},
                                                                {3, 2, 5, 2}, {1, 3, 9, 1}, {5, 4, 3, 3},
                                                                {2, 5, 6, 2}};
  for (const auto& [in, hidden, steps, batch] : lstm_shapes) {
    Lstm<double> cell(in, hidden);
    cell.init(rng);
    cell.b = random_matrix(4 * hidden, 1, rng, 0.5);
    std::vector<Eigen::MatrixXd> xs, rs;
    for (int t = 0; t < steps; ++t) {
      xs.push_back(random_matrix(in, batch, rng));
      rs.push_back(random_matrix(hidden, batch, rng));
    }
    const auto loss = [&] {
      const auto c = lstm_forward(cell, xs);
      double v = 0.0;
      for (int t = 0; t < steps; ++t) v += c[t].h.cwiseProduct(rs[t]).sum();
      return v;
    };
    const auto g = lstm_backward(cell, lstm_forward(cell, xs), rs, Eigen::MatrixXd());
    track(g.dW, numeric_gradient(loss, cell.W));
    track(g.db, numeric_gradient(loss, cell.b));
    for (int t = 0; t < steps; ++t) track(g.dxs[t], numeric_gradient(loss, xs[t]));
  }

  for (const auto& [r, c] : std::vector<std::pair<int, int>>{{5, 3}, {1, 1}, {12, 4}, {3, 9}, {7, 2}}) {
    Eigen::MatrixXd p = random_matrix(r, c, rng);
    const Eigen::MatrixXd t = random_matrix(r, c, rng);
    const auto f = [&] { return loss_l2<double>(p, t).value; };
    track(loss_l2<double>(p, t).grad, numeric_gradient(f, p));
  }

  for (int n : {1, 3, 6, 10, 17}) {
    Eigen::MatrixXd z = random_matrix(1, n, rng, 3.0);
    std::vector<int> y;
    for (int j = 0; j < n; ++j) y.push_back(uniform_int(rng, 0, 1));
    const auto f = [&] { return loss_bce<double>(z, y).value; };
    track(loss_bce<double>(z, y).grad, numeric_gradient(f, z));
  }

  for (int n : {1, 2, 5, 10, 16}) {
    Eigen::MatrixXd z = random_matrix(kRegraspLogits, n, rng, 2.0);
    std::vector<ExecutedBins> bins;
    std::vector<int> y;
    for (int j = 0; j < n; ++j) {
      bins.push_back({uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4)});
      y.push_back(uniform_int(rng, 0, 1));
    }
    const auto f = [&] { return loss_regrasp<double>(z, bins, y).value; };
    track(loss_regrasp<double>(z, bins, y).grad, numeric_gradient(f, z));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0, fmt("worst relative error %.2e over 30 checks, %.1f s", worst, secs)};
}

Verdict masked_loss_semantics() {
  Rng rng(202);
  const double ln2 = std::log(2.0);
  bool exact = true;
  for (int k = 0; k < 200; ++k) {
    const ExecutedBins b{uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4)};
    const int y = k % 2;
    const auto r = loss_regrasp<double>(Eigen::MatrixXd::Zero(kRegraspLogits, 1), {b}, std::vector<int>{y});
    exact = exact && r.value == 4.0 * ln2;
  }
  int nonzero = 0, checked = 0;
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + k % 7;
    const Eigen::MatrixXd z = random_matrix(kRegraspLogits, n, rng, 3.0);
    std::vector<ExecutedBins> bins;
    std::vector<int> y;
    for (int j = 0; j < n; ++j) {
      bins.push_back({uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4)});
      y.push_back(uniform_int(rng, 0, 1));
    }
    const auto r = loss_regrasp<double>(z, bins, y);
    for (int j = 0; j < n; ++j)
      for (int row = 0; row < kRegraspLogits; ++row)
        if (bins[j][row / kBinsPerDim] != row % kBinsPerDim) {
          ++checked;
          nonzero += r.grad(row, j) != 0.0;
        }
  }
  return {exact && nonzero == 0,
          fmt("zero-logit loss %s 4 ln 2 on 200 samples; %d of %d non-executed gradients nonzero",
              exact ? "==" : "!=", nonzero, checked)};
}

Verdict particle_filter() {
  const auto t0 = Clock::now();
  ParticleSet s;
  s.particles.resize(2, 4);
  s.particles << 0.1, 0.2, 0.3, 0.4, 0.1, 0.2, 0.3, 0.4;
  s.weights = Eigen::Vector4d(0.75, 0.25, 0.0, 0.0);
  int strata_bad = 0;
  std::vector<double> offsets;
  for (int k = 0; k < 1000; ++k) offsets.push_back(k / 1000.0);
  offsets.push_back(std::nextafter(1.0, 0.0));
  for (double offset : offsets) {
    const ParticleSet r = resample_with_offset(s, offset);
    // Enumerated strata: targets (u + i) / 4 fall in [0, 0.75) three times, then once in [0.75, 1).
    for (int i = 0; i < 4; ++i) strata_bad += r.particles.col(i) != s.particles.col(i < 3 ? 0 : 1);
  }

  const Catalog cat = generate_catalog(21, 20, 10);
  const LocalizeParams p;
  double worst_sum = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Scene scene = create_scene(derive_seed(31, k), cat.entries[k % cat.entries.size()]);
    Rng rng(derive_seed(32, k));
    ParticleSet set = init_uniform(scene.workspace, p.n_particles, rng);
    for (const auto& cmd : ScanPlan::raster(scene.workspace).scans) {
      set = predict(set, p.motion, scene.workspace, rng);
      const auto u = update(set, line_scan(scene.workspace, scene.object, cmd.start, cmd.direction, cmd.max_len),
                            p.measurement);
      worst_sum = std::max(worst_sum, std::abs(u.set.weights.sum() - 1.0));
      set = resample(u.set, rng);
    }
  }

  int good = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Scene scene = create_scene(derive_seed(22, k), cat.entries[k % cat.entries.size()]);
    Rng rng(derive_seed(23, k));
    const auto r = localize(scene, ScanPlan::raster(scene.workspace, p.n_scans, p.scan_spacing), p, rng);
    good += (r.estimate - r.final_scene.object.centroid()).norm() < 0.025;
  }
  const double secs = seconds_since(t0);
  return {strata_bad == 0 && worst_sum <= 1e-12 && good >= 90 && secs < 120.0,
          fmt("strata mismatches %d over 1001 offsets; max |sum w - 1| %.1e; %d/100 scenes within 0.025 m; %.1f s",
              strata_bad, worst_sum, good, secs)};
}

Verdict line_scan_oracle() {
  double worst = 0.0;
  int disagreements = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto c = hg::testing::random_aimed_scan(50000 + seed);
    const double len = hg::testing::exit_distance(c.scene.workspace, c.start, c.direction);
    const auto oracle = hg::testing::ray_march_hit(c.scene.object.world_polygon(), c.start, c.direction, len);
    const ContactResult r = line_scan(c.scene.workspace, c.scene.object, c.start, c.direction, len);
    if (oracle.has_value() != r.contact) {
      ++disagreements;
      continue;
    }
    if (oracle) worst = std::max(worst, std::abs(*oracle - (*r.contact_point - c.start).norm()));
  }
  return {disagreements == 0 && worst < 2e-4,
          fmt("max discrepancy %.2e m over 1000 scenes, %d hit/miss disagreements", worst, disagreements)};
}

struct DeskRun {
  std::unique_ptr<hg::testing::TempDir> dir;
  CommandContext ctx;
  double train_ae_seconds = 0.0;
  double total_seconds = 0.0;
};

DeskRun run_desk(const std::string& tag) {
  DeskRun r;
  r.dir = std::make_unique<hg::testing::TempDir>(tag);
  r.ctx = hg::testing::profile_context("desk", r.dir->str());
  const auto t0 = Clock::now();
  const std::vector<std::pair<const char*, std::function<std::string(const CommandContext&)>>> steps{
      {"gen-catalog", cmd_gen_catalog},       {"collect", cmd_collect},
      {"train-ae", cmd_train_ae},             {"train-heads", cmd_train_heads},
      {"eval-perception", cmd_eval_perception}, {"eval-grasping", cmd_eval_grasping},
      {"report", cmd_report}};
  for (const auto& [name, fn] : steps) {
    const auto s0 = Clock::now();
    std::printf("  [%s] %s\n", tag.c_str(), fn(r.ctx).c_str());
    std::fflush(stdout);
    if (std::string(name) == "train-ae") r.train_ae_seconds = seconds_since(s0);
  }
  r.total_seconds = seconds_since(t0);
  return r;
}

Verdict autoencoder(const DeskRun& run) {
  const json doc = open_sealed(run.ctx.reports_dir() + "/autoencoder.json", "autoencoder");
  const json& p = doc.at("payload");
  const double train = p.at("train_loss").back().get<double>();
  const double val = p.at("validation_loss").back().get<double>();
  const double base = p.at("baseline_train").get<double>();
  const int episodes = p.at("train_episodes").get<int>() + p.at("validation_episodes").get<int>();
  // The curve's first entry is the loss before any update.
  const int epochs = static_cast<int>(p.at("train_loss").size()) - 1;
  const double ratio = val / train;
  const bool ok = train < base && ratio < 2.0 && episodes <= 2000 && epochs <= 20 && run.train_ae_seconds < 1800.0;
  return {ok, fmt("train %.4f vs baseline %.4f; val/train %.3f; %d episodes, %d epochs, %.0f s", train, base, ratio,
                  episodes, epochs, run.train_ae_seconds)};
}

double cell_score(const json& cells, const std::string& task, const std::string& features, const std::string& clf,
                  const char* field = "score") {
  for (const auto& c : cells)
    if (c.at("task") == task && c.at("features") == features && c.at("classifier") == clf) return c.at(field).get<double>();
  throw Error("perception report lacks " + task + "/" + features + "/" + clf);
}

Verdict perception(const DeskRun& run) {
  const json cells = open_sealed(run.ctx.reports_dir() + "/perception.json", "perception").at("payload").at("cells");
  bool ok = true;
  std::string detail;
  for (const std::string task : {"material", "stability"})
    for (const std::string clf : {"deep", "linear_hinge"}) {
      const double ae = cell_score(cells, task, "autoencoder", clf);
      const double hc = cell_score(cells, task, "handcrafted", clf);
      ok = ok && ae >= hc;
      detail += fmt("%s/%s ae %.3f hc %.3f; ", task.c_str(), clf.c_str(), ae, hc);
    }
  const double chance2 = 2.0 / kNumMaterials;
  const double mat = std::max(cell_score(cells, "material", "autoencoder", "deep"),
                              cell_score(cells, "material", "autoencoder", "linear_hinge"));
  const double stab = std::max(cell_score(cells, "stability", "autoencoder", "deep"),
                               cell_score(cells, "stability", "autoencoder", "linear_hinge"));
  const double majority = cell_score(cells, "stability", "autoencoder", "deep", "majority_rate");
  ok = ok && mat >= chance2 && stab >= majority + 0.10;
  detail += fmt("material %.3f vs 2x chance %.3f; stability %.3f vs majority %.3f + 0.10", mat, chance2, stab, majority);
  return {ok, detail};
}

const json& arm(const json& arms, const std::string& name) {
  for (const auto& a : arms)
    if (a.at("name") == name) return a;
  throw Error("grasping report lacks arm " + name);
}

Verdict regrasping(const DeskRun& run) {
  const json arms = open_sealed(run.ctx.reports_dir() + "/grasping.json", "grasping").at("payload").at("regrasping");
  const json& learned = arm(arms, "oracle+learned");
  const json& random = arm(arms, "oracle+random");
  const int trials = learned.at("trials").get<int>();
  const double a = learned.at("accuracy").get<double>(), b = random.at("accuracy").get<double>();
  return {trials >= 200 && random.at("trials").get<int>() == trials && a >= b + 0.05,
          fmt("learned %.3f vs random %.3f over %d paired trials", a, b, trials)};
}

Verdict full_pipeline(const DeskRun& run) {
  const json arms = open_sealed(run.ctx.reports_dir() + "/grasping.json", "grasping").at("payload").at("gwos");
  const double tl = arm(arms, "touch+learned").at("accuracy").get<double>();
  const double tn = arm(arms, "touch+none").at("accuracy").get<double>();
  const double nl = arm(arms, "noisy_oracle+learned").at("accuracy").get<double>();
  const double nn = arm(arms, "noisy_oracle+none").at("accuracy").get<double>();
  const int trials = arm(arms, "touch+learned").at("trials").get<int>();
  return {trials >= 200 && tl >= tn + 0.08 && nl >= nn,
          fmt("touch+learned %.3f vs touch+none %.3f; noisy+learned %.3f vs noisy+none %.3f; %d trials", tl, tn, nl,
              nn, trials)};
}

Verdict determinism(const DeskRun& a, const DeskRun& b) {
  const std::vector<std::string> files{"catalog.txt",           "dataset/episodes.jsonl", "dataset/haptics.bin",
                                       "dataset/manifest.json", "models/autoencoder.hgw", "models/stability.hgw",
                                       "models/policy.hgw",     "models/latents.tsv",     "reports/autoencoder.json",
                                       "reports/perception.json", "reports/grasping.json", "reports/report.md"};
  int differ = 0;
  std::string which;
  for (const auto& f : files)
    if (file_digest(a.ctx.path(f)) != file_digest(b.ctx.path(f))) {
      ++differ;
      which += " " + f;
    }

  // Offline replay of closed-loop traces from the trained models.
  const Models models = load_models(a.ctx);
  const RunConfig& c = a.ctx.config;
  const auto test = read_catalog(a.ctx.catalog_path()).split(Split::test);
  int replays = 0, mismatches = 0;
  for (InitializerKind init : {InitializerKind::touch, InitializerKind::noisy_oracle, InitializerKind::oracle})
    for (std::uint64_t k = 0; k < 10; ++k) {
      GwosConfig g = c.gwos;
      g.localize = c.localize;
      g.initializer = init;
      g.regrasp = RegraspMode::learned;
      const Scene scene = create_scene(derive_seed(77, k), test[k % test.size()], c.workspace, c.sim);
      const GwosResult r = run_gwos(scene, models, g, c.context(), derive_seed(78, k));
      ++replays;
      mismatches += !replay_matches(r, models, g, c.context());
    }
  return {differ == 0 && mismatches == 0,
          fmt("%d of %zu artifacts differ%s; %d of %d replays diverge", differ, files.size(), which.c_str(), mismatches,
              replays)};
}

Verdict protocol_arithmetic(const DeskRun& run) {
  // Default counts are the full-scale protocol; set-2 objects are drawn
  // from the same 52 training objects.
  const CollectionCounts full;
  const int full_objects = 52;
  const Catalog big = generate_catalog(5, full_objects, 0);
  const CollectionTally t = plan_collection(big, full, 5).tally();
  const double expected = expected_executed_grasps(full, full_objects);
  const bool full_ok = std::abs(static_cast<double>(t.executed_grasps) - 7800.0) <= 0.05 * 7800.0 &&
                        std::abs(expected - 7800.0) <= 0.05 * 7800.0 && t.objects == full_objects;

  const RunConfig& c = run.ctx.config;
  const CollectionCounts& k = c.collection;
  const bool fixed = k.set1_grasps_min == k.set1_grasps_max && k.set1_regrasps_min == k.set1_regrasps_max &&
                     k.set2_grasps_min == k.set2_grasps_max && k.set2_regrasps_min == k.set2_regrasps_max;
  const long long n_train = c.catalog.n_train, n_test = c.catalog.n_test;
  const long long want_train = n_train * k.set1_grasps_min * (1 + k.set1_regrasps_min) +
                               static_cast<long long>(k.set2_objects) * k.set2_grasps_min * (1 + k.set2_regrasps_min);
  const long long want_test = n_test * k.test_grasps_per_object * (1 + k.test_regrasps);
  const json m = json::parse(std::ifstream(run.ctx.dataset_dir() + "/manifest.json"));
  const long long got_train = m.at("planned").at("train").at("executed_grasps").get<long long>();
  const long long got_test = m.at("planned").at("test").at("executed_grasps").get<long long>();
  const long long collected = m.at("collected").at("executed_grasps").get<long long>();
  const bool desk_ok = fixed && got_train == want_train && got_test == want_test && collected == want_train + want_test;
  return {full_ok && desk_ok,
          fmt("full scale %lld executed grasps (%lld re-grasp pairs, expectation %.0f) over %d objects; desk "
              "train %lld/%lld test %lld/%lld collected %lld",
              t.executed_grasps, t.regrasp_interactions, expected, t.objects, got_train, want_train, got_test,
              want_test, collected)};
}

int failures = 0;

void emit(int n, const char* name, const std::function<Verdict()>& fn) {
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("raised: ") + e.what()};
  }
  failures += !v.pass;
  std::printf("criterion %2d %-24s %s  %s\n", n, name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  emit(1, "gradient-correctness", gradient_correctness);
  emit(2, "masked-regrasp-loss", masked_loss_semantics);
  emit(3, "particle-filter", particle_filter);
  emit(4, "line-scan-oracle", line_scan_oracle);

  std::optional<DeskRun> first, second;
  try {
    first = run_desk("accept_a");
    second = run_desk("accept_b");
  } catch (const std::exception& e) {
    std::printf("desk run raised: %s\n", e.what());
  }
  const auto need = [&](auto fn) {
    return [&, fn]() -> Verdict {
      if (!first || !second) return {false, "desk run did not complete"};
      return fn();
    };
  };
  emit(5, "autoencoder", need([&] { return autoencoder(*first); }));
  emit(6, "perception-orderings", need([&] { return perception(*first); }));
  emit(7, "regrasping-ordering", need([&] { return regrasping(*first); }));
  emit(8, "full-pipeline-ordering", need([&] { return full_pipeline(*first); }));
  emit(9, "determinism-replay", need([&] { return determinism(*first, *second); }));
  emit(10, "protocol-arithmetic", need([&] { return protocol_arithmetic(*first); }));
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
